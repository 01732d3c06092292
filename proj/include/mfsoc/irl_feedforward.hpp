#pragma once

#include "mfsoc/irl_feedback.hpp"

#include <optional>

namespace mfsoc {

/// Data matrices for the feedforward iteration, built from the ensemble-mean
/// trajectory of the same collection run as FeedbackDataset (one data
/// collection phase serves both iterations and the identification stage):
///   delta_xbarhat: xbarhat(t_j+T) - xbarhat(t_j)  (l x n(n+1)/2)
///   Ixbarxbar:     int xbar (x) xbar dtau         (l x n^2)
///   Ixbarubar:     int xbar (x) ubar dtau         (l x n m)
struct FeedforwardDataset {
  Matrix delta_xbarhat;
  Matrix Ixbarxbar;
  Matrix Ixbarubar;
  SamplingPlan plan;
  Eigen::Index n = 0;
  Eigen::Index m = 0;

  Eigen::Index rows() const { return delta_xbarhat.rows(); }
  int required_rank() const { return static_cast<int>(n * (n + 1) / 2 + m * n); }
};

/// Deterministic quantities given the mean path: no inner expectation.
inline FeedforwardDataset build_feedforward_dataset(const Ensemble& ens,
                                                    const SamplingPlan& plan) {
  if (ens.paths.empty())
    throw std::invalid_argument("build_feedforward_dataset: empty ensemble");
  const Eigen::Index n = ens.mean_state.cols();
  const Eigen::Index m = ens.mean_input.cols();
  const Eigen::Index G = ens.mean_state.rows();
  detail::check_windows_fit(plan, G);

  const Eigen::Index qx = n * (n + 1) / 2;
  Matrix xbarhat(G, qx);
  Matrix xbxb(G, n * n);
  Matrix xbub(G, n * m);
  for (Eigen::Index g = 0; g < G; ++g) {
    const Vector xb = ens.mean_state.row(g).transpose();
    const Vector ub = ens.mean_input.row(g).transpose();
    xbarhat.row(g) = quad_features(xb).transpose();
    xbxb.row(g) = vec(xb * xb.transpose()).transpose();
    xbub.row(g) = vec((xb * ub.transpose()).transpose()).transpose();
  }
  const Matrix cxbxb = detail::cumulative_trapezoid(xbxb, plan.dt);
  const Matrix cxbub = detail::cumulative_trapezoid(xbub, plan.dt);

  FeedforwardDataset ds;
  ds.plan = plan; ds.n = n; ds.m = m;
  ds.delta_xbarhat.resize(plan.l, qx);
  ds.Ixbarxbar.resize(plan.l, n * n);
  ds.Ixbarubar.resize(plan.l, n * m);
  const int steps = plan.window_steps();
  for (int j = 0; j < plan.l; ++j) {
    const int s = plan.window_start_index(j);
    const int e = s + steps;
    ds.delta_xbarhat.row(j) = xbarhat.row(e) - xbarhat.row(s);
    ds.Ixbarxbar.row(j) = cxbxb.row(e) - cxbxb.row(s);
    ds.Ixbarubar.row(j) = cxbub.row(e) - cxbub.row(s);
  }
  if (!ds.delta_xbarhat.allFinite() || !ds.Ixbarxbar.allFinite() || !ds.Ixbarubar.allFinite())
    throw std::runtime_error("build_feedforward_dataset: non-finite dataset entries");
  return ds;
}

/// Rank condition on [Ixbarxbar | Ixbarubar]: numerical rank n(n+1)/2 + mn.
inline bool check_rank_feedforward(const FeedforwardDataset& ds) {
  Matrix stacked(ds.rows(), ds.Ixbarxbar.cols() + ds.Ixbarubar.cols());
  stacked << ds.Ixbarxbar, ds.Ixbarubar;
  return detail::numerical_rank_at_least(stacked, ds.required_rank());
}

/// Model-free feedforward iteration from Ks^0 = 0: recursively solves in the
/// least-squares sense
///   Phi_{k-1} [Sbar_k; col(Ks_k)] = Theta_{k-1},
///   Phi_{k-1}   = [delta_xbarhat,
///                  -2 Ixbarubar (I (x) Upsilon) - 2 Ixbarxbar (I (x) (Upsilon (Ks+K))^T)],
///   Theta_{k-1} = -Ixbarxbar col(-Q_Gamma + Ks^T Upsilon Ks),
/// until ||Ks_k - Ks_{k-1}||_F <= xi. Upsilon_hat is the learned R + Lambda_hat;
/// the model matrices never enter. Pi = P_hat + S is attached when P_hat is given.
inline std::pair<FeedforwardSolution, IterationTrace> irl_feedforward_iterate(
    const FeedforwardDataset& ds, const Matrix& Khat, const Matrix& Upsilon_hat,
    const Matrix& QGamma, double xi = 1e-4, int max_iter = 50,
    const std::optional<Matrix>& Phat = std::nullopt) {
  const Eigen::Index n = ds.n, m = ds.m;
  if (Khat.rows() != m || Khat.cols() != n)
    throw std::invalid_argument("irl_feedforward_iterate: Khat has wrong dimensions");
  if (Upsilon_hat.rows() != m || Upsilon_hat.cols() != m)
    throw std::invalid_argument("irl_feedforward_iterate: Upsilon_hat has wrong dimensions");
  if (!is_pd(Upsilon_hat))
    throw std::runtime_error("irl_feedforward_iterate: Upsilon_hat must be positive definite");
  if (!check_rank_feedforward(ds))
    throw std::runtime_error("irl_feedforward_iterate: dataset fails the rank condition");

  const Matrix In = Matrix::Identity(n, n);
  const Eigen::Index qx = n * (n + 1) / 2;
  IterationTrace trace;
  Matrix Ks = Matrix::Zero(m, n);
  FeedforwardSolution sol;
  for (int k = 1; k <= max_iter; ++k) {
    const Matrix QGk = symmetrize(-QGamma + Ks.transpose() * Upsilon_hat * Ks);
    Matrix Phi(ds.rows(), qx + n * m);
    Phi << ds.delta_xbarhat,
           -2.0 * ds.Ixbarubar * kron(In, Upsilon_hat) -
               2.0 * ds.Ixbarxbar * kron(In, (Upsilon_hat * (Ks + Khat)).transpose());
    const Vector Theta = -ds.Ixbarxbar * vec(QGk);

    Eigen::ColPivHouseholderQR<Matrix> qr(Phi);
    qr.setThreshold(1e-10);
    if (qr.rank() < Phi.cols())
      throw IterationFailure(
          "irl_feedforward_iterate: rank condition violated at iteration " + std::to_string(k),
          trace);
    const Vector theta = qr.solve(Theta);

    const Matrix S = smat(theta.head(qx), n);
    const Matrix Ksnew = unvec(theta.tail(n * m), m, n);
    const double dK = (Ksnew - Ks).norm();
    const double ls_residual = (Phi * theta - Theta).norm() / std::max(1.0, Theta.norm());
    sol.S = S;
    sol.Ks = Ksnew;
    sol.Pi = Phat.has_value() ? Matrix(*Phat + S) : Matrix();
    trace.records.push_back({k, S, Ksnew, dK, ls_residual});
    Ks = Ksnew;
    if (dK <= xi) {
      trace.converged = true;
      return {sol, trace};
    }
  }
  throw IterationFailure("irl_feedforward_iterate: no convergence within " +
                         std::to_string(max_iter) + " iterations", trace);
}

}  // namespace mfsoc
