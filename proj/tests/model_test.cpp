#include "mfsoc/model.hpp"

#include "support/paper_example.hpp"
#include "support/test_rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace mfsoc;

TEST_CASE("gamma_weight closed forms") {
  testsupport::MatrixGen gen(201);
  const Matrix Q = gen.psd(3, 1.5);

  SECTION("Gamma = 0 kills every term") {
    CostSpec cost(Q, gen.pd(2), Matrix::Zero(3, 3));
    CHECK(gamma_weight(cost).QGamma.isZero(0.0));
  }
  SECTION("Gamma = I leaves Q") {
    CostSpec cost(Q, gen.pd(2), Matrix::Identity(3, 3));
    CHECK((gamma_weight(cost).QGamma - Q).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("paper weights: Q = diag(3,2), Gamma = 0.9I gives 0.99 Q") {
    const CostSpec cost = testsupport::paper_cost();
    const Matrix QG = gamma_weight(cost).QGamma;
    CHECK(QG(0, 0) == Catch::Approx(2.97).margin(1e-14));
    CHECK(QG(1, 1) == Catch::Approx(1.98).margin(1e-14));
    CHECK(std::abs(QG(0, 1)) < 1e-15);
  }
}

TEST_CASE("gamma_weight output is exactly symmetric and reproducible") {
  testsupport::MatrixGen gen(202);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = gen.uniform_int(1, 4);
    CostSpec cost(gen.psd(n), gen.pd(1), gen.matrix(n, n, 2.0));
    const Matrix QG = gamma_weight(cost).QGamma;
    CHECK((QG - QG.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Matrix again = gamma_weight(cost).QGamma;
    CHECK((QG - again).cwiseAbs().maxCoeff() == 0.0);  // bit-for-bit
  }
}

TEST_CASE("upsilon") {
  const SystemDynamics dyn = testsupport::paper_dynamics();
  const CostSpec cost = testsupport::paper_cost();

  SECTION("D = 0 or P = 0 gives R") {
    SystemDynamics nod(dyn.A, dyn.B, dyn.C, Matrix::Zero(2, 1));
    CHECK((upsilon(Matrix::Identity(2, 2), nod, cost) - cost.R).cwiseAbs().maxCoeff() == 0.0);
    CHECK((upsilon(Matrix::Zero(2, 2), dyn, cost) - cost.R).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("min eigenvalue of Upsilon dominates min eigenvalue of R for P >= 0") {
    testsupport::MatrixGen gen(203);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix P = gen.psd(2, 3.0);
      CHECK(min_eigenvalue(upsilon(P, dyn, cost)) >= min_eigenvalue(cost.R) - 1e-12);
    }
  }
}

TEST_CASE("validate reports the standing assumptions") {
  const SystemDynamics dyn = testsupport::paper_dynamics();
  const CostSpec cost = testsupport::paper_cost();

  SECTION("paper model with K0 = [6,-3] passes everything") {
    Matrix K0(1, 2);
    K0 << 6.0, -3.0;
    const ValidationReport rep = validate(dyn, cost, K0);
    CHECK(rep.q_psd);
    CHECK(rep.r_pd);
    REQUIRE(rep.ms_stabilizer_ok.has_value());
    CHECK(*rep.ms_stabilizer_ok);
    CHECK(rep.all_ok());
  }
  SECTION("R = 0 fails the positive-definiteness check") {
    const CostSpec bad(cost.Q, Matrix::Zero(1, 1), cost.Gamma);
    CHECK_FALSE(validate(dyn, bad).r_pd);
  }
  SECTION("indefinite Q is reported") {
    Matrix Q(2, 2);
    Q << 1, 0, 0, -1;
    const CostSpec bad(Q, cost.R, cost.Gamma);
    CHECK_FALSE(validate(dyn, bad).q_psd);
  }
  SECTION("dimension mismatch is a hard error") {
    const CostSpec small(Matrix::Identity(3, 3), Matrix::Identity(1, 1), Matrix::Zero(3, 3));
    CHECK_THROWS_AS(validate(dyn, small), std::invalid_argument);
  }
}

TEST_CASE("type constructors reject malformed inputs") {
  CHECK_THROWS_AS(SystemDynamics(Matrix::Zero(2, 2), Matrix::Zero(3, 1), Matrix::Zero(2, 2),
                                 Matrix::Zero(2, 1)),
                  std::invalid_argument);
  Matrix nan22 = Matrix::Constant(2, 2, std::nan(""));
  CHECK_THROWS_AS(SystemDynamics(nan22, Matrix::Zero(2, 1), Matrix::Zero(2, 2),
                                 Matrix::Zero(2, 1)),
                  std::invalid_argument);
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_THROWS_AS(CostSpec(asym, Matrix::Identity(1, 1), Matrix::Zero(2, 2)),
                  std::invalid_argument);
}
