#pragma once

#include "mfsoc/irl_feedforward.hpp"

#include <cstdio>

namespace mfsoc {

/// Deterministic mean-field trajectory xbar(t) on a uniform grid.
struct MeanFieldPath {
  enum class Method { monte_carlo, identified };
  Vector times;
  Matrix xbar;  // grid_size x n
  Vector xbar0;
  Method method = Method::identified;
};

struct IdentifiedModel {
  Matrix Ahat;
  Matrix Bhat;
  Vector residuals;  // per-row least-squares residual norms of the A solve
};

/// Supremum over the grid of the componentwise distance between two paths.
inline double sup_distance(const MeanFieldPath& a, const MeanFieldPath& b) {
  if (a.xbar.rows() != b.xbar.rows() || a.xbar.cols() != b.xbar.cols())
    throw std::invalid_argument("sup_distance: incompatible paths");
  return (a.xbar - b.xbar).cwiseAbs().maxCoeff();
}

/// Monte Carlo mean-field approximation: averages Ns sample paths of one
/// agent driven by the pure feedback policy u = -(Khat + Kshat) x with
/// x(0) = xbar0. Deterministic per seed; accumulation is in path order.
inline MeanFieldPath mf_monte_carlo(const SystemDynamics& dyn, const Matrix& Khat,
                                    const Matrix& Kshat, const Vector& xbar0, int Ns,
                                    const SamplingPlan& plan, std::uint64_t seed) {
  if (Ns < 1) throw std::invalid_argument("mf_monte_carlo: Ns must be >= 1");
  const Matrix Kcl = Khat + Kshat;
  if (!is_ms_stabilizer(Kcl, dyn))
    // not fatal: high-variance or slowly diverging averages are still reported
    std::fputs("mf_monte_carlo: warning: Khat + Kshat is not a mean-square stabilizer\n",
               stderr);
  Policy policy{Kcl, nullptr, nullptr};
  const int G = plan.grid_size();
  MeanFieldPath path;
  path.times = Vector::LinSpaced(G, 0.0, (G - 1) * plan.dt);
  path.xbar = Matrix::Zero(G, dyn.n);
  path.xbar0 = xbar0;
  path.method = MeanFieldPath::Method::monte_carlo;
  for (int i = 0; i < Ns; ++i) {
    const Trajectory traj =
        simulate_path(dyn, policy, xbar0, plan, mix_seed(seed, static_cast<std::uint64_t>(i)), i);
    path.xbar += traj.states;
  }
  path.xbar /= static_cast<double>(Ns);
  path.xbar.row(0) = xbar0.transpose();  // exact by construction; re-pin against roundoff
  return path;
}

/// B = (Upsilon Ks S^{-1})^T, from Ks = Upsilon^{-1} B^T S. Requires S
/// invertible; otherwise the identification route is unavailable and the
/// Monte Carlo route must be used.
inline Matrix identify_B(const Matrix& S, const Matrix& Ks, const Matrix& Upsilon) {
  Eigen::JacobiSVD<Matrix> svd(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 0.0 || sv(0) / sv(sv.size() - 1) > 1e10)
    throw std::runtime_error(
        "identify_B: S is near-singular; identification route unavailable, use the "
        "Monte Carlo route");
  return (Upsilon * Ks * svd.solve(Matrix::Identity(S.rows(), S.cols()))).transpose();
}

/// Row-wise least squares for A from the feedforward dataset:
///   Z_j [A]_j^T = H_j,  Z_j = 2 Ixbarxbar (e_j^T (x) I),
///   H_j = delta_xbarhat Ebar_j - 2 Ixbarubar col(Bhat^T E_j).
inline IdentifiedModel identify_A(const FeedforwardDataset& ds, const Matrix& Bhat) {
  const Eigen::Index n = ds.n, m = ds.m;
  if (Bhat.rows() != n || Bhat.cols() != m)
    throw std::invalid_argument("identify_A: Bhat has wrong dimensions");
  IdentifiedModel model;
  model.Bhat = Bhat;
  model.Ahat.resize(n, n);
  model.residuals.resize(n);
  const Matrix In = Matrix::Identity(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Matrix ejT = Matrix::Zero(n, 1);
    ejT(j, 0) = 1.0;
    Matrix Ej = Matrix::Zero(n, n);
    Ej(j, j) = 1.0;
    const Matrix Zj = 2.0 * ds.Ixbarxbar * kron(ejT, In);
    const Vector Hj = ds.delta_xbarhat * svec(Ej) - 2.0 * ds.Ixbarubar * vec(Bhat.transpose() * Ej);
    Eigen::ColPivHouseholderQR<Matrix> qr(Zj);
    qr.setThreshold(1e-10);
    if (qr.rank() < n)
      throw std::runtime_error("identify_A: rank condition failed for row " +
                               std::to_string(j + 1));
    const Vector aj = qr.solve(Hj);
    model.Ahat.row(j) = aj.transpose();
    model.residuals(j) = (Zj * aj - Hj).norm();
  }
  return model;
}

/// xbar(t) = exp((Ahat - Bhat Khat - Bhat Kshat) t) xbar0, evaluated on a
/// uniform grid by one matrix exponential per step (exact semigroup stepping).
inline MeanFieldPath mf_from_identified(const IdentifiedModel& model, const Matrix& Khat,
                                        const Matrix& Kshat, const Vector& xbar0,
                                        const Vector& grid) {
  if (grid.size() < 1) throw std::invalid_argument("mf_from_identified: empty grid");
  const Matrix Acl = model.Ahat - model.Bhat * Khat - model.Bhat * Kshat;
  MeanFieldPath path;
  path.times = grid;
  path.xbar.resize(grid.size(), Acl.rows());
  path.xbar0 = xbar0;
  path.method = MeanFieldPath::Method::identified;
  const double dt = grid.size() > 1 ? grid(1) - grid(0) : 0.0;
  const Matrix E = matrix_exponential(Acl * dt);
  Vector x = xbar0;
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    path.xbar.row(g) = x.transpose();
    x = E * x;
  }
  return path;
}

}  // namespace mfsoc
