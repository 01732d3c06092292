#pragma once

#include "mfsoc/riccati.hpp"
#include "mfsoc/sde.hpp"

namespace mfsoc {

/// Iteration failure that still carries the partial trace.
struct IterationFailure : std::runtime_error {
  IterationFailure(const std::string& what, IterationTrace t)
      : std::runtime_error(what), trace(std::move(t)) {}
  IterationTrace trace;
};

/// The l-row integral data matrices driving the feedback iteration. Row j
/// covers the window [t_j, t_j + T):
///   delta_xhat: E[xhat(t_j+T) - xhat(t_j)]      (l x n(n+1)/2)
///   Ixx:        E[int x (x) x dtau]             (l x n^2)
///   Ixu:        E[int x (x) u dtau]             (l x n m)
///   Iuhat:      E[int uhat dtau]                (l x m(m+1)/2)
struct FeedbackDataset {
  Matrix delta_xhat;
  Matrix Ixx;
  Matrix Ixu;
  Matrix Iuhat;
  SamplingPlan plan;
  Eigen::Index n = 0;
  Eigen::Index m = 0;

  Eigen::Index rows() const { return delta_xhat.rows(); }
  int required_rank() const {
    return static_cast<int>(n * (n + 1) / 2 + m * n + m * (m + 1) / 2);
  }
};

namespace detail {

// Cumulative trapezoid integral along rows; row g holds int_0^{t_g}.
inline Matrix cumulative_trapezoid(const Matrix& series, double dt) {
  Matrix out = Matrix::Zero(series.rows(), series.cols());
  for (Eigen::Index g = 1; g < series.rows(); ++g)
    out.row(g) = out.row(g - 1) + 0.5 * dt * (series.row(g) + series.row(g - 1));
  return out;
}

inline void check_windows_fit(const SamplingPlan& plan, Eigen::Index grid_rows) {
  const int last_end = plan.window_start_index(plan.l - 1) + plan.window_steps();
  if (plan.window_start_index(0) < 0 || last_end >= grid_rows)
    throw std::invalid_argument("dataset build: window outside the simulation grid");
}

}  // namespace detail

/// Ensemble-mean expectations, trapezoid quadrature on the dt grid, window
/// endpoints snapped to grid indices.
inline FeedbackDataset build_feedback_dataset(const Ensemble& ens, const SamplingPlan& plan) {
  if (ens.paths.empty()) throw std::invalid_argument("build_feedback_dataset: empty ensemble");
  const Eigen::Index n = ens.paths.front().states.cols();
  const Eigen::Index m = ens.paths.front().inputs.cols();
  const Eigen::Index G = ens.paths.front().times.size();
  const double dt = plan.dt;
  detail::check_windows_fit(plan, G);

  const Eigen::Index qx = n * (n + 1) / 2;
  const Eigen::Index qu = m * (m + 1) / 2;
  Matrix xhat = Matrix::Zero(G, qx);   // E[xhat(t)]
  Matrix xx = Matrix::Zero(G, n * n);  // E[x (x) x](t)
  Matrix xu = Matrix::Zero(G, n * m);  // E[x (x) u](t)
  Matrix uhat = Matrix::Zero(G, qu);   // E[uhat(t)]
  for (const Trajectory& p : ens.paths) {
    for (Eigen::Index g = 0; g < G; ++g) {
      const Vector x = p.states.row(g).transpose();
      const Vector u = p.inputs.row(g).transpose();
      xhat.row(g) += quad_features(x).transpose();
      xx.row(g) += vec(x * x.transpose()).transpose();  // entry i*n+j = x_i x_j
      xu.row(g) += vec((x * u.transpose()).transpose()).transpose();  // entry i*m+a = x_i u_a
      uhat.row(g) += quad_features(u).transpose();
    }
  }
  const double invM = 1.0 / static_cast<double>(ens.paths.size());
  xhat *= invM; xx *= invM; xu *= invM; uhat *= invM;

  const Matrix cxx = detail::cumulative_trapezoid(xx, dt);
  const Matrix cxu = detail::cumulative_trapezoid(xu, dt);
  const Matrix cuh = detail::cumulative_trapezoid(uhat, dt);

  FeedbackDataset ds;
  ds.plan = plan; ds.n = n; ds.m = m;
  ds.delta_xhat.resize(plan.l, qx);
  ds.Ixx.resize(plan.l, n * n);
  ds.Ixu.resize(plan.l, n * m);
  ds.Iuhat.resize(plan.l, qu);
  const int steps = plan.window_steps();
  for (int j = 0; j < plan.l; ++j) {
    const int s = plan.window_start_index(j);
    const int e = s + steps;
    ds.delta_xhat.row(j) = xhat.row(e) - xhat.row(s);
    ds.Ixx.row(j) = cxx.row(e) - cxx.row(s);
    ds.Ixu.row(j) = cxu.row(e) - cxu.row(s);
    ds.Iuhat.row(j) = cuh.row(e) - cuh.row(s);
  }
  if (!ds.delta_xhat.allFinite() || !ds.Ixx.allFinite() || !ds.Ixu.allFinite() ||
      !ds.Iuhat.allFinite())
    throw std::runtime_error("build_feedback_dataset: non-finite dataset entries");
  return ds;
}

namespace detail {
inline bool numerical_rank_at_least(const Matrix& M, int required) {
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return required <= 0;
  const double thresh = sv(0) * static_cast<double>(std::max(M.rows(), M.cols())) * 1e-12;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++rank;
  return rank >= required;
}
}  // namespace detail

/// Rank condition on [Ixx | Ixu | Iuhat]: numerical rank n(n+1)/2 + mn + m(m+1)/2.
inline bool check_rank_feedback(const FeedbackDataset& ds) {
  Matrix stacked(ds.rows(), ds.Ixx.cols() + ds.Ixu.cols() + ds.Iuhat.cols());
  stacked << ds.Ixx, ds.Ixu, ds.Iuhat;
  return detail::numerical_rank_at_least(stacked, ds.required_rank());
}

/// Policy Kronecker matrix with columns kappa_ij = rho_i^T (x) rho_j^T for
/// i <= j (rho_i = i-th row of K), column order (1,1),(1,2),...,(1,m),(2,2),...,(m,m).
/// Pairing: Ixx * kron_policy_matrix(K) * svec(V) = E int x^T K^T V K x dtau.
inline Matrix kron_policy_matrix(const Matrix& K) {
  const Eigen::Index m = K.rows(), n = K.cols();
  Matrix out(n * n, m * (m + 1) / 2);
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i; j < m; ++j) {
      const Matrix kij = kron(K.row(i).transpose(), K.row(j).transpose());
      out.col(c++) = Eigen::Map<const Vector>(kij.data(), n * n);
    }
  return out;
}

/// Model-free feedback iteration: recursively solves in the least-squares
/// sense (orthogonal factorization)
///   Psi_{k-1} [Pbar_k; col(Ktilde_k); Lambdabar_k] = Xi_{k-1},
///   Psi_{k-1} = [delta_xhat, -2 Ixu - 2 Ixx (I (x) K^T), -Iuhat + Ixx Kron(K)],
///   Xi_{k-1}  = -Ixx col(Q + K^T R K),
/// then K_k = (R + Lambda_k)^{-1} Ktilde_k, until ||K_k - K_{k-1}||_F <= xi.
/// K0 must be the stabilizer used during data collection. Never touches the
/// model matrices.
inline std::pair<FeedbackSolution, IterationTrace> irl_feedback_iterate(
    const FeedbackDataset& ds, const Matrix& K0, const CostSpec& cost,
    double xi = 1e-4, int max_iter = 50) {
  if (K0.rows() != ds.m || K0.cols() != ds.n)
    throw std::invalid_argument("irl_feedback_iterate: K0 has wrong dimensions");
  if (!check_rank_feedback(ds))
    throw std::runtime_error("irl_feedback_iterate: dataset fails the rank condition");
  const Eigen::Index n = ds.n, m = ds.m;
  const Matrix In = Matrix::Identity(n, n);
  const Eigen::Index qx = n * (n + 1) / 2, qu = m * (m + 1) / 2;

  IterationTrace trace;
  Matrix K = K0;
  FeedbackSolution sol;
  for (int k = 1; k <= max_iter; ++k) {
    const Matrix Qk = symmetrize(cost.Q + K.transpose() * cost.R * K);
    Matrix Psi(ds.rows(), qx + n * m + qu);
    Psi << ds.delta_xhat,
           -2.0 * ds.Ixu - 2.0 * ds.Ixx * kron(In, K.transpose()),
           -ds.Iuhat + ds.Ixx * kron_policy_matrix(K);
    const Vector Xi = -ds.Ixx * vec(Qk);

    Eigen::ColPivHouseholderQR<Matrix> qr(Psi);
    qr.setThreshold(1e-10);
    if (qr.rank() < Psi.cols())
      throw IterationFailure(
          "irl_feedback_iterate: rank condition violated at iteration " + std::to_string(k),
          trace);
    const Vector theta = qr.solve(Xi);

    const Matrix P = smat(theta.head(qx), n);
    const Matrix Ktilde = unvec(theta.segment(qx, n * m), m, n);
    Matrix Lambda = smat(theta.tail(qu), m);
    {
      // guard against stochastic error: clip eigenvalues below -1e-10 to 0
      Eigen::SelfAdjointEigenSolver<Matrix> es(Lambda);
      Vector lam = es.eigenvalues();
      for (Eigen::Index i = 0; i < lam.size(); ++i)
        if (lam(i) < -kPsdTol) lam(i) = 0.0;
      Lambda = symmetrize(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
    }
    Eigen::LDLT<Matrix> RL((cost.R + Lambda).eval());
    if (RL.info() != Eigen::Success || RL.vectorD().cwiseAbs().minCoeff() < 1e-14)
      throw IterationFailure("irl_feedback_iterate: R + Lambda is singular", trace);
    const Matrix Knew = RL.solve(Ktilde);

    const double dK = (Knew - K).norm();
    const double ls_residual = (Psi * theta - Xi).norm() / std::max(1.0, Xi.norm());
    sol = {P, Knew, Lambda, Ktilde};
    trace.records.push_back({k, P, Knew, dK, ls_residual});
    K = Knew;
    if (dK <= xi) {
      trace.converged = true;
      return {sol, trace};
    }
  }
  throw IterationFailure("irl_feedback_iterate: no convergence within " +
                         std::to_string(max_iter) + " iterations", trace);
}

}  // namespace mfsoc
