#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace sasrc;

namespace {

NominalSelection scalar_nominal(double a1, double b1, double a2, double b2, SwitchedAffineSystem& holder) {
  holder = oracle::exact_system({Matrix::Constant(1, 1, a1), Matrix::Constant(1, 1, a2)},
                                {Vector::Constant(1, b1), Vector::Constant(1, b2)});
  return NominalSelection::midpoint(holder);
}

SwitchedAffineSystem dummy() { return oracle::scalar_toy(); }

}  // namespace

TEST(Monodromy, HalfIdentity) {
  const Matrix h = 0.5 * Matrix::Identity(3, 3);
  const auto sys = oracle::exact_system({h, h}, {Vector::Zero(3), Vector::Zero(3)});
  const auto nom = NominalSelection::midpoint(sys);
  const auto r = monodromy(nom, Cycle({0, 1}));
  EXPECT_LE((r.phi - 0.25 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(r.schur_stable);
}

TEST(Monodromy, ScalarProduct) {
  SwitchedAffineSystem sys = dummy();
  const auto nom = scalar_nominal(2.0, 0, 0.4, 0, sys);
  const auto r = monodromy(nom, Cycle({0, 1}));
  EXPECT_NEAR(r.phi(0, 0), 0.8, 1e-15);
  EXPECT_TRUE(r.schur_stable);
}

TEST(Monodromy, OrderedProduct) {
  oracle::Gen g(21);
  const Matrix a1 = g.mat(3, 3), a2 = g.mat(3, 3), a3 = g.mat(3, 3);
  const auto sys = oracle::exact_system({a1, a2, a3}, {g.vec(3), g.vec(3), g.vec(3)});
  const auto nom = NominalSelection::midpoint(sys);
  const auto r = monodromy(nom, Cycle({0, 2, 1}));
  EXPECT_LE((r.phi - a2 * a3 * a1).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LimitCycle, ScalarToy) {
  const auto sys = oracle::scalar_toy();
  const auto nom = NominalSelection::midpoint(sys);
  const auto lc = compute_limit_cycle(nom, Cycle({0, 1}));
  EXPECT_NEAR(lc.rho[0](0), -2.0 / 3.0, 1e-12);
  EXPECT_NEAR(lc.rho[1](0), 2.0 / 3.0, 1e-12);
}

TEST(LimitCycle, LinearCaseIsZero) {
  oracle::Gen g(22);
  const auto sys = oracle::exact_system({g.contraction(3, 0.8), g.contraction(3, 0.8)}, {Vector::Zero(3), Vector::Zero(3)});
  const auto lc = compute_limit_cycle(NominalSelection::midpoint(sys), Cycle({0, 1}));
  for (const auto& r : lc.rho) EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LimitCycle, SingularRejected) {
  // Phi = 1: no unique fixed point
  SwitchedAffineSystem sys = dummy();
  const auto nom = scalar_nominal(2.0, 1, 0.5, 1, sys);
  try {
    compute_limit_cycle(nom, Cycle({0, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoUniqueLimitCycle);
  }
}

TEST(LimitCycle, RandomInstancesResidual) {
  oracle::Gen g(23);
  for (int t = 0; t < 100; ++t) {
    const auto n = g.integer(1, 5);
    const int period = g.integer(1, 6);
    auto inst = oracle::random_stable_instance(g, n, period, std::max(2, period));
    const auto lc = compute_limit_cycle(inst.nominal, inst.cycle);
    for (int i = 0; i < inst.cycle.period(); ++i) {
      const auto j = static_cast<std::size_t>(inst.cycle.mode(i));
      const Vector r = lc.rho[static_cast<std::size_t>(inst.cycle.next(i))] -
                       (inst.nominal.A(j) * lc.rho[static_cast<std::size_t>(i)] + inst.nominal.B(j));
      EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(LimitCycle, RotationGivesSameSet) {
  oracle::Gen g(24);
  for (int t = 0; t < 30; ++t) {
    const auto n = g.integer(1, 5);
    const int period = g.integer(2, 6);
    auto inst = oracle::random_stable_instance(g, n, period, period);
    const auto lc = compute_limit_cycle(inst.nominal, inst.cycle);
    const int shift = g.integer(1, period - 1);
    std::vector<int> rotated;
    for (int i = 0; i < period; ++i) rotated.push_back(inst.cycle.mode(i + shift));
    const auto lr = compute_limit_cycle(inst.nominal, Cycle(rotated));
    for (int i = 0; i < period; ++i)
      EXPECT_LE((lr.rho[static_cast<std::size_t>(i)] - lc.rho[static_cast<std::size_t>((i + shift) % period)])
                    .cwiseAbs()
                    .maxCoeff(),
                1e-9);
  }
}

TEST(NominalCertificate, ScalarByHand) {
  const auto sys = oracle::scalar_toy();
  const auto nom = NominalSelection::midpoint(sys);
  const NominalCertificate c{{SymMatrix::identity(1), SymMatrix::identity(1)}, 0.5};
  const auto rep = verify_nominal_certificate(c, nom, Cycle({0, 1}));
  EXPECT_TRUE(rep.valid);
  EXPECT_NEAR(rep.decay_min_eig[0], 0.25, 1e-15);
}

TEST(NominalCertificate, ZeroPInvalid) {
  const auto sys = oracle::scalar_toy();
  const auto nom = NominalSelection::midpoint(sys);
  const NominalCertificate c{{SymMatrix(1), SymMatrix(1)}, 0.5};
  EXPECT_FALSE(verify_nominal_certificate(c, nom, Cycle({0, 1})).valid);
}

TEST(NominalCertificate, SynthesisRoundTripRandom) {
  oracle::Gen g(25);
  for (int t = 0; t < 100; ++t) {
    const auto n = g.integer(1, 5);
    const int period = g.integer(1, 6);
    auto inst = oracle::random_stable_instance(g, n, period, std::max(2, period), g.uni(0.3, 0.98));
    const double mstar = max_mu(inst.nominal, inst.cycle);
    const double mu = g.uni(0.05, 0.95) * mstar;
    const auto cert = synthesize_nominal_certificate(inst.nominal, inst.cycle, mu);
    const auto rep = verify_nominal_certificate(cert, inst.nominal, inst.cycle);
    EXPECT_TRUE(rep.valid) << "trial " << t << " margin " << rep.min_margin;
    // certifying a decay rate also certifies the plain decrease condition
    NominalCertificate plain = cert;
    plain.mu = 1e-12;
    EXPECT_TRUE(verify_nominal_certificate(plain, inst.nominal, inst.cycle).valid);
  }
}

TEST(NominalCertificate, NormalizationScalesLargestEigenvalue) {
  oracle::Gen g(26);
  auto inst = oracle::random_stable_instance(g, 3, 2, 2);
  const auto cert = synthesize_nominal_certificate(inst.nominal, inst.cycle, 0.1, 7.0);
  double top = 0;
  for (const auto& p : cert.P) top = std::max(top, oracle::min_eig(-p.matrix()) * -1.0);
  EXPECT_NEAR(top, 7.0, 1e-9);
  EXPECT_TRUE(verify_nominal_certificate(cert, inst.nominal, inst.cycle).valid);
}

TEST(NominalCertificate, MuTooLarge) {
  const auto sys = oracle::scalar_toy();
  const auto nom = NominalSelection::midpoint(sys);
  try {
    synthesize_nominal_certificate(nom, Cycle({0, 1}), 0.8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MuTooLarge);
  }
}

TEST(MaxMu, ScalarClosedForm) {
  const auto sys = oracle::scalar_toy();
  EXPECT_NEAR(max_mu(NominalSelection::midpoint(sys), Cycle({0, 1})), 0.75, 1e-9);
}

TEST(MaxMu, NilpotentCapped) {
  Matrix n1 = Matrix::Zero(2, 2);
  n1(0, 1) = 1;
  const auto sys = oracle::exact_system({n1, n1}, {Vector::Ones(2), Vector::Ones(2)});
  const double tol = 1e-10;
  EXPECT_DOUBLE_EQ(max_mu(NominalSelection::midpoint(sys), Cycle({0, 1}), tol), 1.0 - tol);
}

TEST(MaxMu, UnstableRejected) {
  const auto ex = build_example(1.0);
  try {
    max_mu(ex.nominal, Cycle({0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MuInfeasible);
  }
}

TEST(MaxMu, MonotoneBoundary) {
  oracle::Gen g(27);
  for (int t = 0; t < 30; ++t) {
    auto inst = oracle::random_stable_instance(g, g.integer(1, 4), g.integer(1, 4), 4, g.uni(0.3, 0.95));
    const double mstar = max_mu(inst.nominal, inst.cycle);
    const double expected = 1.0 - std::pow(monodromy(inst.nominal, inst.cycle).spectral_radius, 2.0 / inst.cycle.period());
    EXPECT_NEAR(mstar, expected, 1e-8);
    const auto cert = synthesize_nominal_certificate(inst.nominal, inst.cycle, 0.9 * mstar);
    if (mstar + 1e-3 < 1.0) {
      NominalCertificate beyond = cert;
      beyond.mu = mstar + 1e-3;
      EXPECT_FALSE(verify_nominal_certificate(beyond, inst.nominal, inst.cycle).valid);
      EXPECT_THROW(synthesize_nominal_certificate(inst.nominal, inst.cycle, mstar + 1e-3), Error);
    }
  }
}

TEST(Benchmark, NominalAssumptionHolds) {
  const auto ex = build_example(1.00135);
  const Cycle c({0, 1});
  EXPECT_TRUE(monodromy(ex.nominal, c).schur_stable);
  EXPECT_GE(max_mu(ex.nominal, c), 0.25);
  const auto cert = synthesize_nominal_certificate(ex.nominal, c, 0.25);
  EXPECT_TRUE(verify_nominal_certificate(cert, ex.nominal, c).valid);
}
