#include "mfsoc/linalg.hpp"

#include "support/test_rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace mfsoc;

TEST_CASE("svec on 2x2 doubles the off-diagonal") {
  Matrix P(2, 2);
  P << 1, 2, 2, 3;
  const Vector v = svec(P);
  REQUIRE(v.size() == 3);
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 4.0);
  CHECK(v(2) == 3.0);

  const Vector vi = svec(Matrix::Identity(2, 2));
  CHECK(vi(0) == 1.0);
  CHECK(vi(1) == 0.0);
  CHECK(vi(2) == 1.0);
}

TEST_CASE("svec/smat round trip is the identity") {
  testsupport::MatrixGen gen(101);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index n = gen.uniform_int(1, 5);
    const Matrix P = gen.symmetric(n, 3.0);
    CHECK((smat(svec(P), n) - P).cwiseAbs().maxCoeff() == 0.0);
    Vector v = gen.vector(n * (n + 1) / 2, 2.0);
    CHECK((svec(smat(v, n)) - v).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("quadratic features pair with svec: xhat . Pbar == x^T P x") {
  CHECK(quad_features(Vector::Zero(3)).isZero());
  Vector x(2);
  x << 1, 1;
  CHECK((quad_features(x) - Vector::Ones(3)).cwiseAbs().maxCoeff() == 0.0);
  x << 2, 3;
  Vector expect(3);
  expect << 4, 6, 9;
  CHECK((quad_features(x) - expect).cwiseAbs().maxCoeff() == 0.0);

  testsupport::MatrixGen gen(102);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index n = gen.uniform_int(1, 4);
    const Matrix P = gen.symmetric(n, 2.0);
    const Vector xr = gen.vector(n, 3.0);
    const double lhs = quad_features(xr).dot(svec(P));
    const double rhs = xr.dot(P * xr);
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("vec/unvec use column-major stacking") {
  Matrix M(2, 3);
  M << 1, 2, 3, 4, 5, 6;
  const Vector v = vec(M);
  CHECK(v(0) == 1.0);
  CHECK(v(1) == 4.0);
  CHECK(v(2) == 2.0);
  CHECK((unvec(v, 2, 3) - M).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix exponential basics") {
  CHECK((matrix_exponential(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3))
            .cwiseAbs().maxCoeff() < 1e-15);

  Matrix Dg = Matrix::Zero(2, 2);
  Dg(0, 0) = -1.3;
  Dg(1, 1) = 0.4;
  const Matrix E = matrix_exponential(Dg);
  CHECK(std::abs(E(0, 0) - std::exp(-1.3)) < 1e-14);
  CHECK(std::abs(E(1, 1) - std::exp(0.4)) < 1e-14);
  CHECK(std::abs(E(0, 1)) < 1e-15);
}

TEST_CASE("matrix exponential matches a truncated series oracle") {
  testsupport::MatrixGen gen(103);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix M = gen.matrix(3, 3, 2.0);
    if (spectral_norm(M) > 5.0) M *= 5.0 / spectral_norm(M);
    Matrix series = Matrix::Identity(3, 3);
    Matrix term = Matrix::Identity(3, 3);
    for (int k = 1; k <= 60; ++k) {
      term = (term * M / static_cast<double>(k)).eval();
      series += term;
    }
    CHECK((matrix_exponential(M) - series).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("matrix exponential semigroup property") {
  testsupport::MatrixGen gen(104);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix M = gen.matrix(3, 3, 1.0);
    M -= (spectral_abscissa(M) + 0.5) * Matrix::Identity(3, 3);  // stable
    const double s = gen.uniform(0.0, 2.0), t = gen.uniform(0.0, 2.0);
    const Matrix lhs = matrix_exponential(M * (s + t));
    const Matrix rhs = matrix_exponential(M * s) * matrix_exponential(M * t);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("psd helpers") {
  Matrix M(2, 2);
  M << 2, 0, 0, -1;
  CHECK_FALSE(is_psd(M));
  CHECK(is_psd(Matrix::Zero(2, 2)));
  CHECK(is_pd(Matrix::Identity(2, 2)));
  CHECK_FALSE(is_pd(Matrix::Zero(2, 2)));
  CHECK(min_eigenvalue(M) == Catch::Approx(-1.0));
  CHECK(spectral_norm(M) == Catch::Approx(2.0));
}
