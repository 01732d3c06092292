#pragma once

#include "mfsoc/model.hpp"

#include <random>

namespace testsupport {

// Hand-rolled generators for property-style tests; seeded for reproducibility.
class MatrixGen {
 public:
  explicit MatrixGen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }

  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(eng_);
  }

  mfsoc::Matrix matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    mfsoc::Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = uniform(-scale, scale);
    return M;
  }

  mfsoc::Vector vector(Eigen::Index size, double scale = 1.0) {
    mfsoc::Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = uniform(-scale, scale);
    return v;
  }

  mfsoc::Matrix symmetric(Eigen::Index n, double scale = 1.0) {
    return mfsoc::symmetrize(matrix(n, n, scale));
  }

  mfsoc::Matrix psd(Eigen::Index n, double scale = 1.0) {
    const mfsoc::Matrix M = matrix(n, n, scale);
    return mfsoc::Matrix(M * M.transpose());
  }

  mfsoc::Matrix pd(Eigen::Index n, double scale = 1.0, double ridge = 0.1) {
    return mfsoc::Matrix(psd(n, scale) + ridge * mfsoc::Matrix::Identity(n, n));
  }

  // A drawn Hurwitz-by-construction with mild multiplicative noise, so K = 0
  // already mean-square stabilizes and every instance is usable as-is.
  mfsoc::SystemDynamics stabilizable_dynamics(Eigen::Index n, Eigen::Index m,
                                              double noise_scale = 0.2) {
    mfsoc::Matrix A = matrix(n, n, 1.0);
    A -= (mfsoc::spectral_abscissa(A) + uniform(0.3, 1.0)) * mfsoc::Matrix::Identity(n, n);
    const mfsoc::Matrix B = matrix(n, m, 1.0);
    const mfsoc::Matrix C = matrix(n, n, noise_scale);
    const mfsoc::Matrix D = matrix(n, m, noise_scale);
    mfsoc::SystemDynamics dyn(A, B, C, D);
    if (!mfsoc::is_ms_stabilizer(mfsoc::Matrix::Zero(m, n), dyn))
      return stabilizable_dynamics(n, m, 0.5 * noise_scale);
    return dyn;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace testsupport
