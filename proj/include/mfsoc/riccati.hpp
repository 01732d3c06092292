#pragma once

#include "mfsoc/model.hpp"

#include <string>
#include <vector>

namespace mfsoc {

/// Feedback layer of the decentralized policy: value matrix P, gain K,
/// Lambda = D^T P D and Ktilde = (R + Lambda) K.
struct FeedbackSolution {
  Matrix P;
  Matrix K;
  Matrix Lambda;
  Matrix Ktilde;

  Matrix upsilon(const CostSpec& cost) const { return symmetrize(cost.R + Lambda); }
};

/// Feedforward layer: S = Pi - P, gain Ks = Upsilon^{-1} B^T S, Pi = P + S.
struct FeedforwardSolution {
  Matrix S;
  Matrix Ks;
  Matrix Pi;
};

struct IterationRecord {
  int k = 0;
  Matrix value;       // P_k (feedback) or S_k (feedforward)
  Matrix gain;        // K_k or Ks_k
  double gain_delta = 0.0;  // ||K_k - K_{k-1}||_F
  double residual = 0.0;    // spectral norm of the ARE residual at this iterate
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  bool converged = false;
  int iterations() const { return static_cast<int>(records.size()); }
};

/// Solves Acl^T X + X Acl + Ccl^T X Ccl + W = 0 for symmetric X by dense
/// vectorization: (I (x) Acl^T + Acl^T (x) I + Ccl^T (x) Ccl^T) vec(X) = -vec(W).
/// O(n^6); fine at learning scale (n small).
inline Matrix solve_generalized_lyapunov(const Matrix& Acl, const Matrix& Ccl,
                                         const Matrix& W) {
  const Eigen::Index n = Acl.rows();
  if (Acl.cols() != n || Ccl.rows() != n || Ccl.cols() != n || W.rows() != n || W.cols() != n)
    throw std::invalid_argument("solve_generalized_lyapunov: dimension mismatch");
  const Matrix I = Matrix::Identity(n, n);
  const Matrix L = kron(I, Acl.transpose()) + kron(Acl.transpose(), I) +
                   kron(Ccl.transpose(), Ccl.transpose());
  Eigen::FullPivLU<Matrix> lu(L);
  if (lu.rcond() < 1e-12)
    throw std::runtime_error("solve_generalized_lyapunov: non-stabilizing closed loop "
                             "(operator condition number > 1e12)");
  const Vector x = lu.solve(-vec(W));
  return symmetrize(unvec(x, n, n));
}

/// True iff all eigenvalues of M have real part < -1e-10.
inline bool is_hurwitz(const Matrix& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("is_hurwitz: not square");
  return spectral_abscissa(M) < -kHurwitzTol;
}

/// Residual of the stochastic ARE at P:
///   A^T P + P A + C^T P C - (B^T P + D^T P C)^T Upsilon^{-1} (B^T P + D^T P C) + Q.
inline Matrix sare_residual(const Matrix& P, const SystemDynamics& dyn,
                            const CostSpec& cost) {
  const Matrix Ups = upsilon(P, dyn, cost);
  Eigen::LDLT<Matrix> ldlt(Ups);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().cwiseAbs().minCoeff() < 1e-14)
    throw std::runtime_error("sare_residual: Upsilon is singular");
  const Matrix G = dyn.B.transpose() * P + dyn.D.transpose() * P * dyn.C;
  return symmetrize(dyn.A.transpose() * P + P * dyn.A + dyn.C.transpose() * P * dyn.C -
                    G.transpose() * ldlt.solve(G) + cost.Q);
}

/// Residual of the indefinite ARE for S = Pi - P:
///   (A-BK)^T S + S (A-BK) - S B Upsilon^{-1} B^T S - Q_Gamma.
inline Matrix indefinite_are_residual(const Matrix& S, const FeedbackSolution& fb,
                                      const SystemDynamics& dyn, const CostSpec& cost) {
  const Matrix Acl = dyn.A - dyn.B * fb.K;
  const Matrix Ups = fb.upsilon(cost);
  const Matrix QG = gamma_weight(cost).QGamma;
  const Matrix BtS = dyn.B.transpose() * S;
  return symmetrize(Acl.transpose() * S + S * Acl -
                    BtS.transpose() * Ups.ldlt().solve(BtS) - QG);
}

/// Model-based policy iteration for (P, K): from a mean-square stabilizer K0,
/// solve A_{k-1}^T P_k + P_k A_{k-1} + C_{k-1}^T P_k C_{k-1} + Q_{k-1} = 0 and
/// update K_k = (R + D^T P_k D)^{-1} (B^T P_k + D^T P_k C) until
/// ||K_k - K_{k-1}||_F <= xi. The trace exhibits P_k >= P_{k+1} >= P.
inline std::pair<FeedbackSolution, IterationTrace> pi_feedback(
    const SystemDynamics& dyn, const CostSpec& cost, const Matrix& K0,
    double xi = 1e-4, int max_iter = 50) {
  if (!is_ms_stabilizer(K0, dyn))
    throw std::runtime_error("pi_feedback: K0 is not a mean-square stabilizer");
  IterationTrace trace;
  Matrix K = K0;
  FeedbackSolution sol;
  for (int k = 1; k <= max_iter; ++k) {
    const Matrix Acl = dyn.A - dyn.B * K;
    const Matrix Ccl = dyn.C - dyn.D * K;
    const Matrix Qk = symmetrize(cost.Q + K.transpose() * cost.R * K);
    const Matrix P = solve_generalized_lyapunov(Acl, Ccl, Qk);
    const Matrix Lambda = symmetrize(dyn.D.transpose() * P * dyn.D);
    const Matrix Ktilde = dyn.B.transpose() * P + dyn.D.transpose() * P * dyn.C;
    const Matrix Knew = (cost.R + Lambda).ldlt().solve(Ktilde);
    const double dK = (Knew - K).norm();
    sol = {P, Knew, Lambda, Ktilde};
    trace.records.push_back({k, P, Knew, dK, spectral_norm(sare_residual(P, dyn, cost))});
    K = Knew;
    if (dK <= xi && trace.records.back().residual <= 1e-8) {
      trace.converged = true;
      return {sol, trace};
    }
  }
  throw std::runtime_error("pi_feedback: no convergence within " +
                           std::to_string(max_iter) + " iterations");
}

/// Model-based policy iteration for (S, Ks) from Ks^0 = 0:
///   Atilde_{k-1}^T S_k + S_k Atilde_{k-1} + QGamma_{k-1} = 0,
///   Ks_k = Upsilon^{-1} B^T S_k,
/// with Atilde_k = A - B(K + Ks_k) and QGamma_k = -Q_Gamma + Ks_k^T Upsilon Ks_k.
/// Every Atilde_k must stay Hurwitz; the trace exhibits S <= S_{k+1} <= S_k.
inline std::pair<FeedforwardSolution, IterationTrace> pi_feedforward(
    const SystemDynamics& dyn, const CostSpec& cost, const FeedbackSolution& fb,
    double xi = 1e-4, int max_iter = 50) {
  if (!is_hurwitz(dyn.A - dyn.B * fb.K))
    throw std::runtime_error("pi_feedforward: A - B K is not Hurwitz");
  const Matrix QG = gamma_weight(cost).QGamma;
  const Matrix Ups = fb.upsilon(cost);
  const Matrix Zero = Matrix::Zero(dyn.n, dyn.n);
  IterationTrace trace;
  Matrix Ks = Matrix::Zero(dyn.m, dyn.n);
  FeedforwardSolution sol;
  for (int k = 1; k <= max_iter; ++k) {
    const Matrix Atilde = dyn.A - dyn.B * (fb.K + Ks);
    if (!is_hurwitz(Atilde))
      throw std::runtime_error("pi_feedforward: closed loop lost the Hurwitz property "
                               "at iteration " + std::to_string(k));
    const Matrix QGk = symmetrize(-QG + Ks.transpose() * Ups * Ks);
    const Matrix S = solve_generalized_lyapunov(Atilde, Zero, QGk);
    const Matrix Ksnew = Ups.ldlt().solve(dyn.B.transpose() * S);
    const double dK = (Ksnew - Ks).norm();
    sol = {S, Ksnew, fb.P + S};
    trace.records.push_back(
        {k, S, Ksnew, dK, spectral_norm(indefinite_are_residual(S, fb, dyn, cost))});
    Ks = Ksnew;
    if (dK <= xi && trace.records.back().residual <= 1e-8) {
      trace.converged = true;
      return {sol, trace};
    }
  }
  throw std::runtime_error("pi_feedforward: no convergence within " +
                           std::to_string(max_iter) + " iterations");
}

/// Heuristic spectral sweep for exact observability of [A, C; Qroot]: computes
/// the eigenpairs of X -> X A^T + A X + C X C^T and reports false iff some
/// symmetrized unit-norm eigenvector matrix X satisfies ||Qroot X|| <= 1e-8.
/// A finite sweep of a criterion over all complex lambda; conservative.
inline bool exact_observability_diagnostic(const SystemDynamics& dyn, const Matrix& Qroot) {
  const Eigen::Index n = dyn.n;
  if (Qroot.cols() != n) throw std::invalid_argument("exact_observability_diagnostic: bad Qroot");
  const Matrix I = Matrix::Identity(n, n);
  const Matrix L = kron(dyn.A, I) + kron(I, dyn.A) + kron(dyn.C, dyn.C);
  Eigen::EigenSolver<Matrix> es(L, /*computeEigenvectors=*/true);
  for (Eigen::Index j = 0; j < L.rows(); ++j) {
    Eigen::MatrixXcd X = Eigen::Map<const Eigen::MatrixXcd>(
        es.eigenvectors().col(j).data(), n, n);
    Eigen::MatrixXcd Xs = 0.5 * (X + X.transpose());
    const double norm = Xs.norm();
    if (norm < 1e-12) continue;  // antisymmetric eigenvector: irrelevant to the test
    Xs /= norm;
    if ((Qroot * Xs).norm() <= 1e-8) return false;
  }
  return true;
}

}  // namespace mfsoc
