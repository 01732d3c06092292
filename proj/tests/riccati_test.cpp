#include "mfsoc/riccati.hpp"

#include "support/paper_example.hpp"
#include "support/test_rng.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace mfsoc;

namespace {

// Independent brute-force solve of the vectorized generalized Lyapunov system,
// assembled entry by entry without the kron helper.
Matrix kronecker_bruteforce_solve(const Matrix& Acl, const Matrix& Ccl, const Matrix& W) {
  const Eigen::Index n = Acl.rows();
  Matrix L = Matrix::Zero(n * n, n * n);
  // row (i + j*n) is the equation for entry (i,j) of Acl'X + X Acl + Ccl'X Ccl
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q) {
          double coef = 0.0;
          if (q == j) coef += Acl(p, i);                 // (Acl' X)_{ij} depends on X_{pj}
          if (p == i) coef += Acl(q, j);                 // (X Acl)_{ij} depends on X_{iq}
          coef += Ccl(p, i) * Ccl(q, j);                 // (Ccl' X Ccl)_{ij}
          L(i + j * n, p + q * n) += coef;
        }
  const Vector x = L.fullPivLu().solve(-vec(W));
  return unvec(x, n, n);
}

}  // namespace

TEST_CASE("generalized Lyapunov closed forms") {
  SECTION("Acl = -I, Ccl = 0, W = I gives X = I/2") {
    const Matrix X = solve_generalized_lyapunov(-Matrix::Identity(2, 2), Matrix::Zero(2, 2),
                                                Matrix::Identity(2, 2));
    CHECK((X - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("scalar -2x + x + 1 = 0 gives x = 1") {
    Matrix a(1, 1), c(1, 1), w(1, 1);
    a << -1.0;
    c << 1.0;
    w << 1.0;
    CHECK(solve_generalized_lyapunov(a, c, w)(0, 0) == Catch::Approx(1.0).margin(1e-14));
  }
}

TEST_CASE("generalized Lyapunov matches the Kronecker brute-force oracle") {
  testsupport::MatrixGen gen(301);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index n = gen.uniform_int(2, 4);
    Matrix Acl = gen.matrix(n, n, 1.0);
    Acl -= (spectral_abscissa(Acl) + 0.6) * Matrix::Identity(n, n);
    const Matrix Ccl = gen.matrix(n, n, 0.2);
    const Matrix W = gen.symmetric(n, 1.0);
    const Matrix X = solve_generalized_lyapunov(Acl, Ccl, W);
    const Matrix Xb = kronecker_bruteforce_solve(Acl, Ccl, W);
    CHECK((X - Xb).cwiseAbs().maxCoeff() < 1e-10);
    // and the residual really vanishes
    const Matrix res = Acl.transpose() * X + X * Acl + Ccl.transpose() * X * Ccl + W;
    CHECK(res.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("generalized Lyapunov with Ccl = 0 agrees with a dense standard solve") {
  testsupport::MatrixGen gen(302);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = gen.uniform_int(2, 4);
    Matrix Acl = gen.matrix(n, n, 1.0);
    Acl -= (spectral_abscissa(Acl) + 0.7) * Matrix::Identity(n, n);
    const Matrix W = gen.symmetric(n, 1.0);
    const Matrix X = solve_generalized_lyapunov(Acl, Matrix::Zero(n, n), W);
    const Matrix Xb = kronecker_bruteforce_solve(Acl, Matrix::Zero(n, n), W);
    CHECK((X - Xb).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("singular Lyapunov operator is rejected") {
  // Acl = 0, Ccl = 0: operator identically zero
  CHECK_THROWS_WITH(solve_generalized_lyapunov(Matrix::Zero(2, 2), Matrix::Zero(2, 2),
                                               Matrix::Identity(2, 2)),
                    Catch::Matchers::ContainsSubstring("non-stabilizing"));
}

TEST_CASE("mean-square stabilizer test") {
  SECTION("A = -I with no noise is stable under K = 0") {
    SystemDynamics dyn(-Matrix::Identity(2, 2), Matrix::Zero(2, 1), Matrix::Zero(2, 2),
                       Matrix::Zero(2, 1));
    CHECK(is_ms_stabilizer(Matrix::Zero(1, 2), dyn));
  }
  SECTION("A = +I is not") {
    SystemDynamics dyn(Matrix::Identity(2, 2), Matrix::Zero(2, 1), Matrix::Zero(2, 2),
                       Matrix::Zero(2, 1));
    CHECK_FALSE(is_ms_stabilizer(Matrix::Zero(1, 2), dyn));
  }
  SECTION("the example's K0 = [6,-3] stabilizes") {
    CHECK(is_ms_stabilizer(testsupport::paper_K0(), testsupport::paper_dynamics()));
  }
}

TEST_CASE("Hurwitz test") {
  CHECK(is_hurwitz(-Matrix::Identity(3, 3)));
  CHECK_FALSE(is_hurwitz(Matrix::Zero(2, 2)));
  Matrix cl(2, 2);
  cl << -1.2995, 1.5971, -0.8975, 0.5044;  // the example's identified closed loop
  CHECK(is_hurwitz(cl));
}

TEST_CASE("feedback policy iteration on the example model") {
  const auto dyn = testsupport::paper_dynamics();
  const auto cost = testsupport::paper_cost();
  auto [fb, trace] = pi_feedback(dyn, cost, testsupport::paper_K0(), 1e-10, 50);

  CHECK((fb.P - testsupport::P_frozen()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((fb.K - testsupport::K_frozen()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(fb.Lambda(0, 0) - testsupport::lambda_frozen()) < 1e-8);
  CHECK(spectral_norm(sare_residual(fb.P, dyn, cost)) <= 1e-8);
  CHECK(fb.P.isApprox(fb.P.transpose()));
  CHECK(is_pd(fb.P));
  // published estimate sits within 2.7% of the exact solution
  const double rel = spectral_norm(fb.P - testsupport::P_published()) /
                     spectral_norm(testsupport::P_published());
  CHECK(rel < 0.027);
  // K = (R+Lambda)^{-1} Ktilde holds
  CHECK(((cost.R + fb.Lambda) * fb.K - fb.Ktilde).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("scalar feedback iteration recovers the closed-form ARE root") {
  // A = -1, B = 1, C = D = 0, Q = R = 1: P solves -2P - P^2 + 1 = 0, P = sqrt(2)-1
  SystemDynamics dyn((Matrix(1, 1) << -1.0).finished(), (Matrix(1, 1) << 1.0).finished(),
                     Matrix::Zero(1, 1), Matrix::Zero(1, 1));
  CostSpec cost(Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Zero(1, 1));
  auto [fb, trace] = pi_feedback(dyn, cost, Matrix::Zero(1, 1), 1e-12, 50);
  CHECK(fb.P(0, 0) == Catch::Approx(std::sqrt(2.0) - 1.0).margin(1e-12));
  CHECK(fb.K(0, 0) == Catch::Approx(std::sqrt(2.0) - 1.0).margin(1e-12));
}

TEST_CASE("non-stabilizing K0 is rejected before iterating") {
  const auto dyn = testsupport::paper_dynamics();
  const auto cost = testsupport::paper_cost();
  Matrix K0(1, 2);
  K0 << -50.0, 0.0;
  CHECK_THROWS_WITH(pi_feedback(dyn, cost, K0),
                    Catch::Matchers::ContainsSubstring("not a mean-square stabilizer"));
}

TEST_CASE("sare_residual closed forms") {
  const auto dyn = testsupport::paper_dynamics();
  const auto cost = testsupport::paper_cost();
  SECTION("P = 0 gives Q") {
    CHECK((sare_residual(Matrix::Zero(2, 2), dyn, cost) - cost.Q).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("published estimate carries the published residual norm") {
    const double r = spectral_norm(sare_residual(testsupport::P_published(), dyn, cost));
    CHECK(std::abs(r - testsupport::sare_residual_published()) <
          0.1 * testsupport::sare_residual_published());
    // and the published gain consistency error
    const Matrix Ups = upsilon(testsupport::P_published(), dyn, cost);
    const Matrix KofP = Ups.ldlt().solve(dyn.B.transpose() * testsupport::P_published() +
                                         dyn.D.transpose() * testsupport::P_published() * dyn.C);
    CHECK(spectral_norm(testsupport::K_published() - KofP) ==
          Catch::Approx(testsupport::gain_consistency_published()).margin(5e-4));
  }
}

TEST_CASE("feedforward policy iteration on the example model") {
  const auto dyn = testsupport::paper_dynamics();
  const auto cost = testsupport::paper_cost();
  auto [fb, fb_trace] = pi_feedback(dyn, cost, testsupport::paper_K0(), 1e-10, 50);
  auto [ff, ff_trace] = pi_feedforward(dyn, cost, fb, 1e-10, 50);

  CHECK((ff.S - testsupport::S_frozen()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((ff.Ks - testsupport::Ks_frozen()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((ff.Pi - (fb.P + ff.S)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(spectral_norm(indefinite_are_residual(ff.S, fb, dyn, cost)) <= 1e-8);
}

TEST_CASE("feedforward solution conditioned on the published learned feedback stage "
          "reproduces the published true-value column") {
  const auto dyn = testsupport::paper_dynamics();
  const auto cost = testsupport::paper_cost();
  FeedbackSolution fb;
  fb.P = testsupport::P_published();
  fb.K = testsupport::K_published();
  fb.Lambda = (Matrix(1, 1) << testsupport::lambda_published()).finished();
  fb.Ktilde = (cost.R + fb.Lambda) * fb.K;
  auto [ff, trace] = pi_feedforward(dyn, cost, fb, 1e-10, 50);
  CHECK((ff.S - testsupport::S_published_true()).cwiseAbs().maxCoeff() < 5e-4);
  CHECK((ff.Ks - testsupport::Ks_published_true()).cwiseAbs().maxCoeff() < 5e-4);
}

TEST_CASE("Gamma = 0 gives a zero feedforward solution") {
  const auto dyn = testsupport::paper_dynamics();
  const auto base = testsupport::paper_cost();
  CostSpec cost(base.Q, base.R, Matrix::Zero(2, 2));
  auto [fb, fb_trace] = pi_feedback(dyn, cost, testsupport::paper_K0());
  auto [ff, ff_trace] = pi_feedforward(dyn, cost, fb);
  CHECK(ff.S.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ff.Ks.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scalar Gamma = 2 also zeroes Q_Gamma and hence S") {
  // Q_Gamma = 2*1*2 - 4 = 0
  SystemDynamics dyn((Matrix(1, 1) << -1.0).finished(), (Matrix(1, 1) << 1.0).finished(),
                     Matrix::Zero(1, 1), Matrix::Zero(1, 1));
  CostSpec cost(Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                (Matrix(1, 1) << 2.0).finished());
  CHECK(gamma_weight(cost).QGamma.cwiseAbs().maxCoeff() < 1e-15);
  auto [fb, fb_trace] = pi_feedback(dyn, cost, Matrix::Zero(1, 1));
  auto [ff, ff_trace] = pi_feedforward(dyn, cost, fb);
  CHECK(ff.S.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(ff.Ks.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("indefinite ARE residual agrees with direct evaluation at S = I") {
  const auto dyn = testsupport::paper_dynamics();
  const auto cost = testsupport::paper_cost();
  auto [fb, trace] = pi_feedback(dyn, cost, testsupport::paper_K0(), 1e-10, 50);
  const Matrix S = Matrix::Identity(2, 2);
  const Matrix Acl = dyn.A - dyn.B * fb.K;
  const Matrix Ups = cost.R + fb.Lambda;
  const Matrix direct = Acl.transpose() * S + S * Acl -
                        S * dyn.B * Ups.inverse() * dyn.B.transpose() * S -
                        gamma_weight(cost).QGamma;
  CHECK((indefinite_are_residual(S, fb, dyn, cost) - symmetrize(direct)).cwiseAbs().maxCoeff()
        < 1e-12);
  // S = 0 with Q_Gamma = 0 has zero residual
  CostSpec nog(cost.Q, cost.R, Matrix::Zero(2, 2));
  CHECK(indefinite_are_residual(Matrix::Zero(2, 2), fb, dyn, nog).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("monotonicity and stabilizer invariants along both iterations") {
  testsupport::MatrixGen gen(303);
  int done = 0;
  while (done < 20) {
    const Eigen::Index n = gen.uniform_int(2, 4);
    const Eigen::Index m = gen.uniform_int(1, 2);
    const SystemDynamics dyn = gen.stabilizable_dynamics(n, m);
    const CostSpec cost(gen.psd(n, 1.0), gen.pd(m, 0.6), gen.matrix(n, n, 0.8));
    const Matrix K0 = Matrix::Zero(m, n);

    auto [fb, fb_trace] = pi_feedback(dyn, cost, K0, 1e-9, 100);
    for (size_t k = 0; k + 1 < fb_trace.records.size(); ++k) {
      const Matrix& Pk = fb_trace.records[k].value;
      const Matrix& Pk1 = fb_trace.records[k + 1].value;
      CHECK(min_eigenvalue(Pk - Pk1) >= -1e-9);
      CHECK(min_eigenvalue(Pk - fb.P) >= -1e-9);
      CHECK(is_ms_stabilizer(fb_trace.records[k].gain, dyn));
    }
    // fixed point: one more Lyapunov solve at the converged gain reproduces P
    {
      const Matrix Acl = dyn.A - dyn.B * fb.K;
      const Matrix Ccl = dyn.C - dyn.D * fb.K;
      const Matrix Qk = symmetrize(cost.Q + fb.K.transpose() * cost.R * fb.K);
      const Matrix Pfix = solve_generalized_lyapunov(Acl, Ccl, Qk);
      CHECK((Pfix - fb.P).cwiseAbs().maxCoeff() < 1e-9);
    }

    auto [ff, ff_trace] = pi_feedforward(dyn, cost, fb, 1e-9, 100);
    for (size_t k = 0; k + 1 < ff_trace.records.size(); ++k) {
      const Matrix& Sk = ff_trace.records[k].value;
      const Matrix& Sk1 = ff_trace.records[k + 1].value;
      CHECK(min_eigenvalue(Sk - Sk1) >= -1e-9);
      CHECK(min_eigenvalue(Sk - ff.S) >= -1e-9);
      CHECK(is_hurwitz(dyn.A - dyn.B * (fb.K + ff_trace.records[k].gain)));
    }
    {
      const Matrix Atilde = dyn.A - dyn.B * (fb.K + ff.Ks);
      const Matrix Ups = fb.upsilon(cost);
      const Matrix QGk = symmetrize(-gamma_weight(cost).QGamma +
                                    ff.Ks.transpose() * Ups * ff.Ks);
      const Matrix Sfix = solve_generalized_lyapunov(Atilde, Matrix::Zero(n, n), QGk);
      CHECK((Sfix - ff.S).cwiseAbs().maxCoeff() < 1e-9);
    }
    ++done;
  }
}

TEST_CASE("exact observability diagnostic") {
  const auto dyn = testsupport::paper_dynamics();
  SECTION("the example model with Qroot = sqrt(Q) is observable") {
    CHECK(exact_observability_diagnostic(dyn, psd_sqrt(testsupport::paper_cost().Q)));
  }
  SECTION("Qroot = 0 annihilates every mode") {
    CHECK_FALSE(exact_observability_diagnostic(dyn, Matrix::Zero(2, 2)));
  }
  SECTION("C = 0 reduces to the classical PBH test") {
    testsupport::MatrixGen gen(304);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index n = gen.uniform_int(2, 3);
      const Matrix A = gen.matrix(n, n, 1.0);
      const Matrix Qroot = gen.pd(n, 1.0);  // full rank => observable pair
      SystemDynamics d(A, Matrix::Ones(n, 1), Matrix::Zero(n, n), Matrix::Zero(n, 1));
      // classical PBH oracle: rank [lambda I - A; Qroot] = n for all eigenvalues
      bool pbh = true;
      Eigen::EigenSolver<Matrix> es(A);
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::MatrixXcd Mb(2 * n, n);
        Mb.topRows(n) = es.eigenvalues()(i) * Eigen::MatrixXcd::Identity(n, n) -
                        A.cast<std::complex<double>>();
        Mb.bottomRows(n) = Qroot.cast<std::complex<double>>();
        if (Mb.colPivHouseholderQr().rank() < n) pbh = false;
      }
      CHECK(exact_observability_diagnostic(d, Qroot) == pbh);
    }
  }
}
