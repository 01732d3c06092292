#pragma once

#include "mfsoc/linalg.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mfsoc {

/// Agent dynamics dx = (A x + B u) dt + (C x + D u) dw with a single scalar
/// Brownian channel. The learners never see these matrices; only the
/// simulator and the model-based oracle do.
struct SystemDynamics {
  Matrix A;  // n x n drift
  Matrix B;  // n x m input gain
  Matrix C;  // n x n state diffusion
  Matrix D;  // n x m input diffusion
  Eigen::Index n = 0;
  Eigen::Index m = 0;

  SystemDynamics() = default;
  SystemDynamics(Matrix A_, Matrix B_, Matrix C_, Matrix D_)
      : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), D(std::move(D_)) {
    n = A.rows();
    m = B.cols();
    if (n < 1 || m < 1) throw std::invalid_argument("SystemDynamics: need n >= 1 and m >= 1");
    if (A.cols() != n || B.rows() != n || C.rows() != n || C.cols() != n ||
        D.rows() != n || D.cols() != m)
      throw std::invalid_argument("SystemDynamics: inconsistent matrix dimensions");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite())
      throw std::invalid_argument("SystemDynamics: non-finite entries");
  }
};

/// Cost weights of the social cost integrand  ||x - Gamma x_(N)||_Q^2 + ||u||_R^2.
struct CostSpec {
  Matrix Q;      // n x n, symmetric PSD
  Matrix R;      // m x m, symmetric PD
  Matrix Gamma;  // n x n mean-field coupling

  CostSpec() = default;
  CostSpec(Matrix Q_, Matrix R_, Matrix Gamma_)
      : Q(std::move(Q_)), R(std::move(R_)), Gamma(std::move(Gamma_)) {
    if (Q.rows() != Q.cols() || R.rows() != R.cols() || Gamma.rows() != Gamma.cols() ||
        Gamma.rows() != Q.rows())
      throw std::invalid_argument("CostSpec: inconsistent matrix dimensions");
    if (!Q.allFinite() || !R.allFinite() || !Gamma.allFinite())
      throw std::invalid_argument("CostSpec: non-finite entries");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9 ||
        (R - R.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw std::invalid_argument("CostSpec: Q and R must be symmetric");
    Q = symmetrize(Q);
    R = symmetrize(R);
  }
};

struct DerivedWeights {
  Matrix QGamma;  // Gamma^T Q + Q Gamma - Gamma^T Q Gamma, symmetrized
};

struct ValidationReport {
  bool q_psd = false;
  bool r_pd = false;
  std::optional<bool> ms_stabilizer_ok;
  std::vector<std::string> notes;

  bool all_ok() const {
    return q_psd && r_pd && (!ms_stabilizer_ok.has_value() || *ms_stabilizer_ok);
  }
};

inline DerivedWeights gamma_weight(const CostSpec& cost) {
  const Matrix& Q = cost.Q;
  const Matrix& G = cost.Gamma;
  return {symmetrize(G.transpose() * Q + Q * G - G.transpose() * Q * G)};
}

/// Upsilon = R + D^T P D; positive definite whenever P is PSD.
inline Matrix upsilon(const Matrix& P, const SystemDynamics& dyn, const CostSpec& cost) {
  if (P.rows() != dyn.n || P.cols() != dyn.n)
    throw std::invalid_argument("upsilon: P has wrong dimensions");
  return symmetrize(cost.R + dyn.D.transpose() * P * dyn.D);
}

/// True iff the closed-loop second-moment operator
///   X -> (A-BK) X + X (A-BK)^T + (C-DK) X (C-DK)^T
/// has spectral abscissa < 0 on its n^2 x n^2 vectorized form, i.e. K is a
/// mean-square stabilizer of [A,B;C,D].
inline bool is_ms_stabilizer(const Matrix& K, const SystemDynamics& dyn) {
  if (K.rows() != dyn.m || K.cols() != dyn.n)
    throw std::invalid_argument("is_ms_stabilizer: K has wrong dimensions");
  const Matrix Acl = dyn.A - dyn.B * K;
  const Matrix Ccl = dyn.C - dyn.D * K;
  const Matrix I = Matrix::Identity(dyn.n, dyn.n);
  const Matrix L = kron(I, Acl) + kron(Acl, I) + kron(Ccl, Ccl);
  return spectral_abscissa(L) < 0.0;
}

/// Checks the standing assumptions Q >= 0 and R > 0, plus (optionally) that a
/// candidate K0 mean-square stabilizes [A,B;C,D]. Exact-observability is not
/// hard-validated here; see exact_observability_diagnostic.
inline ValidationReport validate(const SystemDynamics& dyn, const CostSpec& cost,
                                 const std::optional<Matrix>& k0 = std::nullopt) {
  if (cost.Q.rows() != dyn.n || cost.R.rows() != dyn.m)
    throw std::invalid_argument("validate: cost dimensions do not match dynamics");
  ValidationReport rep;
  rep.q_psd = is_psd(cost.Q);
  rep.r_pd = is_pd(cost.R);
  if (!rep.q_psd) rep.notes.push_back("Q has an eigenvalue below -1e-10");
  if (!rep.r_pd) rep.notes.push_back("R is not positive definite");
  if (k0.has_value()) {
    if (k0->rows() != dyn.m || k0->cols() != dyn.n)
      throw std::invalid_argument("validate: K0 has wrong dimensions");
    rep.ms_stabilizer_ok = is_ms_stabilizer(*k0, dyn);
    if (!*rep.ms_stabilizer_ok)
      rep.notes.push_back("K0 is not a mean-square stabilizer of [A,B;C,D]");
  }
  return rep;
}

}  // namespace mfsoc
