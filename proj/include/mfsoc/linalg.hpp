#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <stdexcept>

namespace mfsoc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kPsdTol = 1e-10;      // eigenvalue tolerance for PSD/PD tests
inline constexpr double kHurwitzTol = 1e-10;  // spectral-abscissa margin

/// (M + M^T)/2 — used on every computed symmetric matrix to suppress
/// floating-point asymmetry.
inline Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

/// Column-stacking vectorization col(M).
inline Vector vec(const Matrix& M) {
  return Eigen::Map<const Vector>(M.data(), M.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw std::invalid_argument("unvec: size mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Half-vectorization with doubled off-diagonals, row-major upper triangle:
/// [p11, 2p12, ..., 2p1n, p22, 2p23, ..., pnn].
inline Vector svec(const Matrix& P) {
  const Eigen::Index n = P.rows();
  if (P.cols() != n) throw std::invalid_argument("svec: matrix not square");
  Vector out(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      out(k++) = (i == j) ? P(i, j) : P(i, j) + P(j, i);  // = 2 p_ij for symmetric P
  return out;
}

/// Inverse of svec.
inline Matrix smat(const Vector& v, Eigen::Index n) {
  if (v.size() != n * (n + 1) / 2) throw std::invalid_argument("smat: size mismatch");
  Matrix P(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      if (i == j) {
        P(i, j) = v(k);
      } else {
        P(i, j) = 0.5 * v(k);
        P(j, i) = 0.5 * v(k);
      }
      ++k;
    }
  return P;
}

/// Quadratic monomials [x1^2, x1 x2, ..., x1 xn, x2^2, ..., xn^2], ordered to
/// pair with svec: quad_features(x) . svec(P) == x^T P x.
inline Vector quad_features(const Vector& x) {
  const Eigen::Index n = x.size();
  Vector out(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) out(k++) = x(i) * x(j);
  return out;
}

inline Matrix kron(const Matrix& A, const Matrix& B) {
  return Eigen::kroneckerProduct(A, B).eval();
}

/// Minimum eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Spectral norm (largest singular value); for symmetric input this is the
/// largest |eigenvalue|.
inline double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

inline bool is_psd(const Matrix& M, double tol = kPsdTol) {
  return min_eigenvalue(M) >= -tol;
}

inline bool is_pd(const Matrix& M, double tol = kPsdTol) {
  return min_eigenvalue(M) > tol;
}

/// max Re(lambda) over the eigenvalues of a (general) square matrix.
inline double spectral_abscissa(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

/// Symmetric PSD square root.
inline Matrix psd_sqrt(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M));
  Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

/// Matrix exponential (Pade scaling-and-squaring via Eigen).
inline Matrix matrix_exponential(const Matrix& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("matrix_exponential: not square");
  return M.exp();
}

}  // namespace mfsoc
