#include <gtest/gtest.h>

#include "bench_fixture.hpp"
#include "oracles.hpp"

using namespace sasrc;

namespace {

struct Toy {
  SwitchedAffineSystem system = oracle::scalar_toy();
  NominalSelection nominal = NominalSelection::midpoint(system);
  Cycle cycle{{0, 1}};
  LimitCycle lc = compute_limit_cycle(nominal, cycle);
  NominalCertificate ncert{{SymMatrix::identity(1), SymMatrix::identity(1)}, 0.5};
  RobustCertificate rcert = synthesize_robust_certificate({system, nominal, cycle, lc, ncert}, 0.25).cert;
  SimulationSetup setup() const { return {system, nominal, cycle, lc, ncert, rcert}; }
};

ClosedLoopState state(const Vector& x, const Vector& z, int theta, int vartheta) { return {x, z, theta, vartheta}; }

Vector s1(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST(Predict, IdentityNominal) {
  oracle::Gen g(41);
  const Matrix i3 = Matrix::Identity(3, 3);
  const auto sys = oracle::exact_system({i3, i3}, {Vector::Zero(3), Vector::Zero(3)});
  const auto nom = NominalSelection::midpoint(sys);
  const Vector x = g.vec(3), z = g.vec(3);
  const auto p = predict(state(x, z, 0, 1), nom, Cycle({0, 1}));
  EXPECT_EQ(p.chi1, x);
  EXPECT_EQ(p.zfrak1, z);
  EXPECT_EQ(p.chi0, x);
  EXPECT_EQ(p.zfrak0, z);
}

TEST(Predict, ScalarSubstitution) {
  const Toy t;
  const auto p = predict(state(s1(0), s1(0), 0, 0), t.nominal, t.cycle);
  EXPECT_DOUBLE_EQ(p.chi1(0), 1.0);
}

TEST(Control, ExactHit) {
  const Toy t;
  EXPECT_EQ(control(t.lc.rho[1], t.ncert, t.lc), 1);
}

TEST(Control, ScalarCosts) {
  const Toy t;
  const auto c = switching_costs(s1(0.5), t.ncert, t.lc);
  EXPECT_NEAR(c[0], 1.3611, 1e-4);
  EXPECT_NEAR(c[1], 0.0278, 1e-4);
  EXPECT_EQ(control(s1(0.5), t.ncert, t.lc), 1);
}

TEST(Control, TieGoesToSmallestIndex) {
  const Toy t;
  EXPECT_EQ(control(s1(0.0), t.ncert, t.lc), 0);
}

TEST(Step, ScalarOneStep) {
  const Toy t;
  const auto nx = step(state(s1(0), s1(0), 0, 0), t.system, t.nominal.weights(0), t.nominal, t.cycle, t.lc, t.ncert);
  EXPECT_DOUBLE_EQ(nx.x(0), 1.0);
  EXPECT_DOUBLE_EQ(nx.z(0), 0.0);
  EXPECT_EQ(nx.vartheta, 0);
  EXPECT_EQ(nx.theta, 1);  // chi1 = 1 is closer to rho_2
}

TEST(Lyapunov, ZeroOnLimitCycle) {
  const Toy t;
  // chi0 = rho_theta and zfrak1 = rho_theta: z = rho_{theta-1}, vartheta = theta - 1
  const auto s = state(t.lc.rho[1], t.lc.rho[0], 1, 0);
  EXPECT_NEAR(lyapunov(s, t.nominal, t.cycle, t.lc, t.ncert, t.rcert), 0.0, 1e-15);
}

TEST(Lyapunov, ScalarArithmetic) {
  const auto sys = oracle::exact_system({Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.5)},
                                        {Vector::Zero(1), Vector::Zero(1)});
  const auto nom = NominalSelection::midpoint(sys);
  const Cycle c({0, 1});
  const auto lc = compute_limit_cycle(nom, c);
  const NominalCertificate nc{{SymMatrix::identity(1), SymMatrix::identity(1)}, 0.5};
  const RobustCertificate rc{SymMatrix(1), SymMatrix::identity(1), 0.25, 0};
  // zfrak1 = 0.5 * z = 1, chi0 = 2, rho = 0
  EXPECT_DOUBLE_EQ(lyapunov(state(s1(2), s1(2), 0, 0), nom, c, lc, nc, rc), 2.0);
}

TEST(Lyapunov, EqualsCouplingQuadraticForm) {
  const auto& b = bench::fixture();
  oracle::Gen g(42);
  for (int k = 0; k < 200; ++k) {
    const auto s = state(g.vec(3) * 5, g.vec(3) * 5, g.integer(0, 1), g.integer(0, 1));
    const auto p = predict(s, b.ex.nominal, b.cycle);
    const auto th = static_cast<std::size_t>(s.theta);
    Vector ab(6);
    ab << p.chi0 - b.lc.rho[th], p.zfrak1 - b.lc.rho[th];
    const Matrix c = coupling_block(b.published_r.R.matrix(), b.published_r.Q.matrix(), b.published_p.P[th].matrix()).matrix();
    const double v = lyapunov(s, b.ex.nominal, b.cycle, b.lc, b.published_p, b.published_r);
    EXPECT_NEAR(v, ab.dot(c * ab), 1e-9 * std::max(1.0, v));
  }
}

namespace {

/// Runs `steps` closed-loop steps on the benchmark from random states and
/// calls `check(state, detail, next)` on each.
template <class F>
void benchmark_steps(Strategy strategy, int steps, std::uint64_t seed, F check) {
  const auto& b = bench::fixture();
  const auto su = b.setup_published();
  Vector x0(3);
  x0 << -1, 1, -1;
  int done = 0;
  for (std::uint64_t run = 0; done < steps; ++run) {
    const Trace tr = simulate(su, x0 * (1.0 + static_cast<double>(run % 5)), std::nullopt, 1000, seed + run, strategy);
    for (std::size_t k = 0; k + 1 < tr.records.size() && done < steps; ++k, ++done) {
      const auto d = step_detail(tr.records[k].state, b.ex.system, tr.records[k].weights, b.ex.nominal, b.cycle, b.lc,
                                 b.published_p);
      check(tr.records[k], d, tr.records[k + 1]);
    }
  }
}

}  // namespace

TEST(PredictionLink, PredictionLinkIsExact) {
  benchmark_steps(Strategy::VertexRandom, 10000, 100, [](const TraceRecord& r, const StepDetail&, const TraceRecord& n) {
    ASSERT_EQ(n.prediction.zfrak0, r.prediction.chi0);
    ASSERT_EQ(n.prediction.zfrak1, r.prediction.chi1);
  });
}

TEST(PredictionError, PredictionErrorIdentity) {
  const auto& b = bench::fixture();
  for (Strategy s : {Strategy::VertexRandom, Strategy::DirichletUniform})
    benchmark_steps(s, 10000, 200, [&](const TraceRecord& r, const StepDetail& d, const TraceRecord& n) {
      const auto th = static_cast<std::size_t>(r.state.theta);
      const auto j = static_cast<std::size_t>(b.cycle.mode(r.state.theta));
      const Matrix da = d.realized.A - b.ex.nominal.A(j);
      const Vector delta = d.realized.A * b.lc.rho[th] + d.realized.B - b.lc.rho[static_cast<std::size_t>(b.cycle.next(r.state.theta))];
      const Vector lhs = n.prediction.chi0 - r.prediction.chi1;
      const Vector rhs = da * (r.prediction.chi0 - b.lc.rho[th]) + delta;
      ASSERT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, r.state.x.cwiseAbs().maxCoeff()));
    });
}

TEST(PredictorContraction, PredictorContracts) {
  const auto& b = bench::fixture();
  benchmark_steps(Strategy::VertexRandom, 10000, 300, [&](const TraceRecord& r, const StepDetail&, const TraceRecord&) {
    const int th = r.state.theta;
    const auto nx = static_cast<std::size_t>(b.cycle.next(th));
    const Vector e1 = r.prediction.chi1 - b.lc.rho[nx];
    const Vector e0 = r.prediction.chi0 - b.lc.rho[static_cast<std::size_t>(th)];
    const double lhs = e1.dot(b.published_p.P[nx].matrix() * e1);
    const double rhs = (1 - b.published_p.mu) * e0.dot(b.published_p.P[static_cast<std::size_t>(th)].matrix() * e0);
    ASSERT_LE(lhs, rhs + 1e-12 * std::max(1.0, rhs));
  });
}

TEST(Decrement, LevelSetContraction) {
  const auto& b = bench::fixture();
  const double g = b.published_r.gamma;
  int checked = 0;
  benchmark_steps(Strategy::VertexRandom, 10000, 400, [&](const TraceRecord& r, const StepDetail&, const TraceRecord& n) {
    if (!r.argmin_ok) return;
    ++checked;
    ASSERT_LE(n.V, (1 - g) * r.V + g + 1e-9 * std::max(1.0, r.V)) << "k=" << r.k;
  });
  EXPECT_GT(checked, 9000);
}

TEST(Control, OptimalAgainstAllPositions) {
  const auto& b = bench::fixture();
  benchmark_steps(Strategy::DirichletUniform, 5000, 500, [&](const TraceRecord& r, const StepDetail& d, const TraceRecord&) {
    const auto costs = switching_costs(r.prediction.chi1, b.published_p, b.lc);
    for (double c : costs) ASSERT_LE(costs[static_cast<std::size_t>(d.u)], c);
  });
}

TEST(Simulate, StableLinearConvergesToZero) {
  oracle::Gen g(43);
  const Matrix a = g.contraction(2, 0.6);
  const auto sys = oracle::exact_system({a, a}, {Vector::Zero(2), Vector::Zero(2)});
  const auto nom = NominalSelection::midpoint(sys);
  const Cycle c({0, 1});
  const auto lc = compute_limit_cycle(nom, c);
  const auto nc = synthesize_nominal_certificate(nom, c, 0.5 * max_mu(nom, c));
  const auto rc = zero_uncertainty_certificate(nc, 0.5 * nc.mu);
  const SimulationSetup su{sys, nom, c, lc, nc, rc};
  const Trace tr = simulate(su, Vector::Constant(2, 3.0), 0, 200, 1, Strategy::VertexRandom);
  EXPECT_LE(tr.records.back().state.x.norm(), 1e-10);
  EXPECT_LE(tr.records.back().V, 1e-10);
  ASSERT_TRUE(tr.entry_step().has_value());
  for (std::size_t k = static_cast<std::size_t>(*tr.entry_step()) + 1; k < tr.records.size(); ++k)
    EXPECT_LE(tr.records[k].V, tr.records[k - 1].V * (1 + 1e-12) + 1e-300);
}

TEST(Simulate, ScalarToyConvergesToCycle) {
  const Toy t;
  const Trace tr = simulate(t.setup(), s1(0), 0, 50, 0, Strategy::Nominal);
  const auto& last = tr.records.back();
  EXPECT_NEAR(last.state.x(0), t.lc.rho[static_cast<std::size_t>(last.state.theta)](0), 1e-6);
  EXPECT_NEAR(std::abs(last.state.x(0)), 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(tr.records[49].state.x(0), -last.state.x(0), 1e-6);
}

TEST(Simulate, HorizonOne) {
  const Toy t;
  const Trace tr = simulate(t.setup(), s1(0), std::nullopt, 1, 3, Strategy::VertexRandom);
  ASSERT_EQ(tr.records.size(), 2u);
  EXPECT_EQ(tr.records[1].weights.size(), 0);
  EXPECT_THROW(simulate(t.setup(), s1(0), std::nullopt, 0, 3, Strategy::VertexRandom), Error);
}

TEST(Simulate, DeterministicAndSigmaLogged) {
  const Toy t;
  const Trace a = simulate(t.setup(), s1(5), std::nullopt, 100, 9, Strategy::DirichletUniform);
  const Trace b = simulate(t.setup(), s1(5), std::nullopt, 100, 9, Strategy::DirichletUniform);
  ASSERT_EQ(a.sigma0, b.sigma0);
  for (std::size_t k = 0; k < a.records.size(); ++k) EXPECT_EQ(a.records[k].state.x, b.records[k].state.x);
}

TEST(Simulate, DivergenceReportsStep) {
  const Matrix big = Matrix::Constant(1, 1, 1e200);
  const auto sys = oracle::exact_system({big, big}, {s1(1), s1(-1)});
  const auto nom = NominalSelection::midpoint(sys);
  const Cycle c({0, 1});
  const LimitCycle lc{{s1(0), s1(0)}, 0};
  const NominalCertificate nc{{SymMatrix::identity(1), SymMatrix::identity(1)}, 0.5};
  const RobustCertificate rc{SymMatrix(1), SymMatrix::identity(1), 0.25, 0};
  try {
    simulate({sys, nom, c, lc, nc, rc}, s1(1), 0, 10, 0, Strategy::Nominal);
    FAIL();
  } catch (const DivergedError& e) {
    EXPECT_EQ(e.code(), Errc::Diverged);
    EXPECT_GE(e.step(), 1);
    EXPECT_LE(e.step(), 3);
  }
}

TEST(Simulate, BenchmarkDirichletInvariant) {
  const auto& b = bench::fixture();
  Vector x0(3);
  x0 << -1, 1, -1;
  const Trace tr = simulate(b.setup_published(), x0, std::nullopt, 10000, 77, Strategy::DirichletUniform);
  ASSERT_TRUE(tr.entry_step().has_value());
  EXPECT_TRUE(tr.invariant_after_entry());
  for (std::size_t k = static_cast<std::size_t>(*tr.entry_step()); k < tr.records.size(); ++k)
    EXPECT_LE(tr.records[k].V, 1.0);
}

TEST(Projection, ZeroRGivesNominalShapes) {
  const auto& b = bench::fixture();
  RobustCertificate r0 = b.published_r;
  r0.R = SymMatrix(3);
  const auto proj = attractor_projection(b.lc, b.published_p, r0);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(proj.ellipsoids[i].shape.matrix(), b.published_p.P[i].matrix());
    EXPECT_EQ(proj.ellipsoids[i].center, b.lc.rho[i]);
  }
}

TEST(Projection, BenchmarkDisjoint) {
  const auto& b = bench::fixture();
  const auto proj = attractor_projection(b.lc, b.published_p, b.published_r);
  EXPECT_TRUE(proj.pairwise_disjoint);
  EXPECT_TRUE(proj.overlapping.empty());
  for (const auto& e : proj.ellipsoids) {
    const auto pts = ellipsoid_boundary(e);
    EXPECT_EQ(pts.size(), 512u);
    for (const auto& p : pts) {
      const Vector d = p - e.center;
      EXPECT_NEAR(d.dot(e.shape.matrix() * d), 1.0, 1e-9);
    }
  }
}

TEST(Projection, ScalarIntervalsOverlap) {
  const Toy t;
  const RobustCertificate r0{SymMatrix(1), SymMatrix::identity(1), 0.25, 0};
  const auto proj = attractor_projection(t.lc, t.ncert, r0);
  EXPECT_FALSE(proj.pairwise_disjoint);
  ASSERT_EQ(proj.overlapping.size(), 1u);
  const auto pts = ellipsoid_boundary(proj.ellipsoids[0]);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_NEAR(std::max(pts[0](0), pts[1](0)), -2.0 / 3.0 + 1.0, 1e-15);

  // moving the centres more than 2 apart separates unit intervals
  LimitCycle far = t.lc;
  far.rho[1](0) = far.rho[0](0) + 2.01;
  EXPECT_TRUE(attractor_projection(far, t.ncert, r0).pairwise_disjoint);
}

TEST(Projection, SeparationAgreesWithSampling) {
  oracle::Gen g(44);
  for (int t = 0; t < 40; ++t) {
    const AttractorEllipsoid e1{g.vec(2) * 2, SymMatrix::symmetrize(g.spd(2, 0.5))};
    const AttractorEllipsoid e2{g.vec(2) * 2, SymMatrix::symmetrize(g.spd(2, 0.5))};
    bool hit = false;
    for (const auto& p : ellipsoid_boundary(e1)) {
      for (double s = 0; s <= 1.0 && !hit; s += 0.05) hit = ellipsoid_contains(e2, e1.center + s * (p - e1.center));
    }
    for (const auto& p : ellipsoid_boundary(e2)) {
      for (double s = 0; s <= 1.0 && !hit; s += 0.05) hit = ellipsoid_contains(e1, e2.center + s * (p - e2.center));
    }
    if (hit) EXPECT_FALSE(ellipsoids_disjoint(e1, e2)) << t;
  }
}

TEST(Projection, InvalidPair) {
  const auto& b = bench::fixture();
  RobustCertificate bad = b.published_r;
  bad.R = SymMatrix::symmetrize(b.published_p.P[0].matrix() + Matrix::Identity(3, 3));
  try {
    attractor_projection(b.lc, b.published_p, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidCertificatePair);
  }
}

TEST(InvarianceMc, ExactSystemPasses) {
  oracle::Gen g(45);
  auto inst = oracle::random_stable_instance(g, 2, 2, 2, 0.8);
  const auto lc = compute_limit_cycle(inst.nominal, inst.cycle);
  const auto nc = synthesize_nominal_certificate(inst.nominal, inst.cycle, 0.5 * max_mu(inst.nominal, inst.cycle));
  const auto rc = zero_uncertainty_certificate(nc, 0.5 * nc.mu);
  const auto rep = check_robust_invariance_mc({inst.system, inst.nominal, inst.cycle, lc, nc, rc}, 1000, 1);
  EXPECT_EQ(rep.accepted, 1000u);
  EXPECT_TRUE(rep.pass);
}

TEST(InvarianceMc, BenchmarkPasses) {
  const auto& b = bench::fixture();
  const auto rep = check_robust_invariance_mc(b.setup_published(), 2000, 2);
  EXPECT_EQ(rep.accepted, 2000u);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.max_v_next, 1.0);
}

TEST(InvarianceMc, InflatedUncertaintyViolates) {
  const auto& b = bench::fixture();
  const auto inflated = build_example(b.cal.t, 0.07, 0.15);
  const SimulationSetup su{inflated.system, inflated.nominal, b.cycle, b.lc, b.published_p, b.published_r};
  const auto rep = check_robust_invariance_mc(su, 2000, 3);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.max_v_next, 1.0);
}

TEST(InvarianceMc, ZeroSamplesVacuous) {
  const auto& b = bench::fixture();
  const auto rep = check_robust_invariance_mc(b.setup_published(), 0, 0);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(rep.vacuous);
}
