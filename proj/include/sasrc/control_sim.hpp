#pragma once

// Predictor, predictive min-switching law, closed-loop dynamics under sampled
// polytopic uncertainty, the Lyapunov function V and attractor estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sasrc/robust.hpp"

namespace sasrc {

/// xi = (x, z, theta, vartheta); theta and vartheta are 0-based cycle positions.
struct ClosedLoopState {
  Vector x;
  Vector z;
  int theta = 0;
  int vartheta = 0;
};

struct PredictionPair {
  Vector chi0;
  Vector chi1;
  Vector zfrak0;
  Vector zfrak1;
};

/// A_bar_{nu(pos)} v + B_bar_{nu(pos)}. Both predictions go through this one
/// function so the current and the remembered prediction agree bit for bit.
inline Vector nominal_step(const NominalSelection& nominal, const Cycle& cycle, int pos, const Vector& v) {
  const auto j = static_cast<std::size_t>(cycle.mode(pos));
  return nominal.A(j) * v + nominal.B(j);
}

inline PredictionPair predict(const ClosedLoopState& s, const NominalSelection& nominal, const Cycle& cycle) {
  PredictionPair p;
  p.chi0 = s.x;
  p.chi1 = nominal_step(nominal, cycle, s.theta, s.x);
  p.zfrak0 = s.z;
  p.zfrak1 = nominal_step(nominal, cycle, s.vartheta, s.z);
  return p;
}

/// |v - rho_i|^2_{P_i} for every cycle position i.
inline std::vector<double> switching_costs(const Vector& v, const NominalCertificate& cert, const LimitCycle& lc) {
  std::vector<double> c;
  c.reserve(lc.rho.size());
  for (std::size_t i = 0; i < lc.rho.size(); ++i) {
    const Vector d = v - lc.rho[i];
    c.push_back(d.dot(cert.P[i].matrix() * d));
  }
  return c;
}

/// argmin_i |chi1 - rho_i|^2_{P_i}, ties to the smallest index.
inline int control(const Vector& chi1, const NominalCertificate& cert, const LimitCycle& lc) {
  require(cert.P.size() == lc.rho.size() && !lc.rho.empty(), Errc::InvalidInput, "certificate/limit cycle mismatch");
  const auto c = switching_costs(chi1, cert, lc);
  int best = 0;
  for (std::size_t i = 1; i < c.size(); ++i)
    if (c[i] < c[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

/// True iff theta attains the minimum of |zfrak1 - rho_i|^2_{P_i}.
inline bool theta_argmin_ok(const ClosedLoopState& s, const PredictionPair& p, const NominalCertificate& cert,
                            const LimitCycle& lc) {
  const auto c = switching_costs(p.zfrak1, cert, lc);
  const double own = c[static_cast<std::size_t>(s.theta)];
  for (double v : c)
    if (v < own) return false;
  return true;
}

struct StepDetail {
  ClosedLoopState next;
  PredictionPair prediction;
  int u = 0;
  Vertex realized;
};

/// x+ = A x + B with (A, B) realized for mode nu(theta); z+ = x; theta+ = u; vartheta+ = theta.
inline StepDetail step_detail(const ClosedLoopState& s, const SwitchedAffineSystem& system, const Vector& weights,
                              const NominalSelection& nominal, const Cycle& cycle, const LimitCycle& lc,
                              const NominalCertificate& cert) {
  StepDetail d;
  d.prediction = predict(s, nominal, cycle);
  d.u = control(d.prediction.chi1, cert, lc);
  d.realized = realize(system.mode(static_cast<std::size_t>(cycle.mode(s.theta))), weights);
  d.next.x = d.realized.A * s.x + d.realized.B;
  d.next.z = s.x;
  d.next.theta = d.u;
  d.next.vartheta = s.theta;
  return d;
}

inline ClosedLoopState step(const ClosedLoopState& s, const SwitchedAffineSystem& system, const Vector& weights,
                            const NominalSelection& nominal, const Cycle& cycle, const LimitCycle& lc,
                            const NominalCertificate& cert) {
  return step_detail(s, system, weights, nominal, cycle, lc, cert).next;
}

/// V = |zfrak1 - rho_theta|^2_{P_theta - 2R} + |chi0 - zfrak1|^2_Q + |chi0 - rho_theta|^2_R
inline double lyapunov(const ClosedLoopState& s, const NominalSelection& nominal, const Cycle& cycle,
                       const LimitCycle& lc, const NominalCertificate& ncert, const RobustCertificate& rcert) {
  const PredictionPair p = predict(s, nominal, cycle);
  const auto th = static_cast<std::size_t>(s.theta);
  const Vector a = p.chi0 - lc.rho[th];
  const Vector b = p.zfrak1 - lc.rho[th];
  const Vector e = p.chi0 - p.zfrak1;
  const Matrix& r = rcert.R.matrix();
  return b.dot((ncert.P[th].matrix() - 2.0 * r) * b) + e.dot(rcert.Q.matrix() * e) + a.dot(r * a);
}

struct TraceRecord {
  long k = 0;
  ClosedLoopState state;
  PredictionPair prediction;
  int u = 0;
  Vector weights;  // realized vertex weights of the active mode; empty on the final record
  double V = 0.0;
  bool argmin_ok = false;
  bool in_attractor = false;
};

struct Trace {
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Nominal;
  int sigma0 = 0;  // 0-based mode
  std::vector<TraceRecord> records;

  /// First step at which (V <= 1 and theta-argmin) holds, if any.
  std::optional<long> entry_step() const {
    for (const auto& r : records)
      if (r.in_attractor) return r.k;
    return std::nullopt;
  }
  /// Once inside the attractor, never outside again.
  bool invariant_after_entry() const {
    bool inside = false;
    for (const auto& r : records) {
      if (inside && !r.in_attractor) return false;
      inside = inside || r.in_attractor;
    }
    return true;
  }
};

struct SimulationSetup {
  const SwitchedAffineSystem& system;
  const NominalSelection& nominal;
  const Cycle& cycle;
  const LimitCycle& limit_cycle;
  const NominalCertificate& nominal_cert;
  const RobustCertificate& robust_cert;
};

/// Smallest cycle position whose mode is sigma.
inline int position_of_mode(const Cycle& cycle, int sigma) {
  for (int i = 0; i < cycle.period(); ++i)
    if (cycle.mode(i) == sigma) return i;
  fail(Errc::InvalidInput, "initial mode " + std::to_string(sigma + 1) + " does not occur in the cycle");
}

/// Closed loop from x0 with z0 = x0 and vartheta0 = theta0. Without sigma0,
/// the initial mode is drawn from the seeded generator among the cycle's modes.
inline Trace simulate(const SimulationSetup& su, const Vector& x0, std::optional<int> sigma0, std::size_t horizon,
                      std::uint64_t seed, Strategy strategy) {
  require(horizon >= 1, Errc::InvalidInput, "horizon must be >= 1");
  require(x0.size() == su.system.dim() && x0.allFinite(), Errc::InvalidInput, "x0 dimension mismatch");
  su.cycle.check_against(su.system);

  Trace tr;
  tr.seed = seed;
  tr.strategy = strategy;
  if (sigma0) {
    tr.sigma0 = *sigma0;
  } else {
    std::vector<int> modes;
    for (int m : su.cycle.modes())
      if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
    std::sort(modes.begin(), modes.end());
    Rng rng(seed, 2);
    tr.sigma0 = modes[rng.index(modes.size())];
  }
  const UncertaintyRealization unc = sample_uncertainty(su.system, su.nominal, horizon, seed, strategy);

  ClosedLoopState s;
  s.x = x0;
  s.z = x0;
  s.theta = position_of_mode(su.cycle, tr.sigma0);
  s.vartheta = s.theta;

  tr.records.reserve(horizon + 1);
  for (std::size_t k = 0; k <= horizon; ++k) {
    TraceRecord rec;
    rec.k = static_cast<long>(k);
    rec.state = s;
    rec.prediction = predict(s, su.nominal, su.cycle);
    rec.u = control(rec.prediction.chi1, su.nominal_cert, su.limit_cycle);
    rec.V = lyapunov(s, su.nominal, su.cycle, su.limit_cycle, su.nominal_cert, su.robust_cert);
    rec.argmin_ok = theta_argmin_ok(s, rec.prediction, su.nominal_cert, su.limit_cycle);
    rec.in_attractor = rec.argmin_ok && rec.V <= 1.0;
    if (k < horizon) {
      const auto active = static_cast<std::size_t>(su.cycle.mode(s.theta));
      rec.weights = unc.weights[k][active];
      s = step(s, su.system, rec.weights, su.nominal, su.cycle, su.limit_cycle, su.nominal_cert);
      if (!s.x.allFinite()) throw DivergedError("non-finite state", static_cast<long>(k + 1));
    }
    tr.records.push_back(std::move(rec));
  }
  return tr;
}

/// Ellipsoid {x : (x - center)' shape (x - center) <= 1}.
struct AttractorEllipsoid {
  Vector center;
  SymMatrix shape;
};

/// max over lambda in [0,1] of min_x lambda q1(x) + (1-lambda) q2(x); the two
/// ellipsoids are disjoint iff this exceeds 1. The inner minimum is concave in
/// lambda, so golden-section search finds the maximum.
inline double ellipsoid_separation(const AttractorEllipsoid& e1, const AttractorEllipsoid& e2) {
  const Vector d = e1.center - e2.center;
  const Matrix& m1 = e1.shape.matrix();
  const Matrix& m2 = e2.shape.matrix();
  auto h = [&](double lam) {
    if (lam <= 0.0 || lam >= 1.0) return 0.0;
    const Matrix m = lam * m1 + (1.0 - lam) * m2;
    const Vector b = lam * (m1 * d);
    return lam * d.dot(m1 * d) - b.dot(m.ldlt().solve(b));
  };
  constexpr double golden = 0.6180339887498949;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - golden * (hi - lo), x2 = lo + golden * (hi - lo);
  double f1 = h(x1), f2 = h(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = h(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = h(x1);
    }
  }
  return std::max(f1, f2);
}

inline bool ellipsoids_disjoint(const AttractorEllipsoid& e1, const AttractorEllipsoid& e2) {
  return ellipsoid_separation(e1, e2) > 1.0;
}

inline bool ellipsoid_contains(const AttractorEllipsoid& e, const Vector& x) {
  const Vector d = x - e.center;
  return d.dot(e.shape.matrix() * d) <= 1.0;
}

/// Boundary points for plotting: 2 points (n = 1), 64 (n = 2) or a 16 x 32
/// latitude/longitude grid (n = 3). Empty for n > 3.
inline std::vector<Vector> ellipsoid_boundary(const AttractorEllipsoid& e) {
  const auto n = e.center.size();
  std::vector<Vector> pts;
  if (n > 3) return pts;
  const Eigen::LLT<Matrix> llt(e.shape.matrix());
  auto map = [&](const Vector& u) -> Vector {
    return e.center + llt.matrixU().solve(u);  // L^{-T} u, so (x-c)' M (x-c) = |u|^2
  };
  constexpr double pi = 3.141592653589793;
  if (n == 1) {
    pts.push_back(map(Vector::Constant(1, 1.0)));
    pts.push_back(map(Vector::Constant(1, -1.0)));
  } else if (n == 2) {
    for (int k = 0; k < 64; ++k) {
      const double a = 2.0 * pi * k / 64.0;
      pts.push_back(map((Vector(2) << std::cos(a), std::sin(a)).finished()));
    }
  } else {
    for (int i = 0; i < 16; ++i) {
      const double th = pi * (i + 0.5) / 16.0;
      for (int j = 0; j < 32; ++j) {
        const double ph = 2.0 * pi * j / 32.0;
        pts.push_back(
            map((Vector(3) << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)).finished()));
      }
    }
  }
  return pts;
}

struct AttractorProjection {
  std::vector<AttractorEllipsoid> ellipsoids;
  std::vector<std::pair<int, int>> overlapping;  // 0-based index pairs
  bool pairwise_disjoint = true;
};

/// One ellipsoid E(P_i - R, rho_i) per cycle position, with pairwise disjointness.
inline AttractorProjection attractor_projection(const LimitCycle& lc, const NominalCertificate& ncert,
                                                const RobustCertificate& rcert) {
  require(lc.rho.size() == ncert.P.size(), Errc::InvalidInput, "limit cycle/certificate length mismatch");
  AttractorProjection out;
  for (std::size_t i = 0; i < lc.rho.size(); ++i) {
    SymMatrix shape = SymMatrix::symmetrize(ncert.P[i].matrix() - rcert.R.matrix());
    require(is_positive_definite(shape), Errc::InvalidCertificatePair,
            "P_" + std::to_string(i + 1) + " - R is not positive definite");
    out.ellipsoids.push_back({lc.rho[i], std::move(shape)});
  }
  for (std::size_t i = 0; i < out.ellipsoids.size(); ++i)
    for (std::size_t j = i + 1; j < out.ellipsoids.size(); ++j)
      if (!ellipsoids_disjoint(out.ellipsoids[i], out.ellipsoids[j])) {
        out.overlapping.emplace_back(static_cast<int>(i), static_cast<int>(j));
        out.pairwise_disjoint = false;
      }
  return out;
}

struct InvarianceReport {
  std::size_t requested = 0;
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  double max_v_next = 0.0;
  bool pass = true;
  bool vacuous = false;
};

/// Samples xi with V(xi) <= 1 and the theta-argmin condition, applies one
/// closed-loop step per vertex of the active mode, and records max V(xi+).
inline InvarianceReport check_robust_invariance_mc(const SimulationSetup& su, std::size_t samples, std::uint64_t seed) {
  InvarianceReport rep;
  rep.requested = samples;
  if (samples == 0) {
    rep.vacuous = true;
    return rep;
  }
  const auto n = su.system.dim();
  const int period = su.cycle.period();
  Rng rng(seed, 3);
  const std::size_t max_attempts = 1000 * samples;
  while (rep.accepted < samples && rep.attempts < max_attempts) {
    ++rep.attempts;
    ClosedLoopState s;
    s.theta = static_cast<int>(rng.index(static_cast<std::size_t>(period)));
    s.vartheta = static_cast<int>(rng.index(static_cast<std::size_t>(period)));
    const auto th = static_cast<std::size_t>(s.theta);

    // uniform point of the unit ball in R^{2n}, mapped into {V <= 1}
    Vector w(2 * n);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
    w *= std::pow(rng.uniform(), 1.0 / static_cast<double>(2 * n)) / w.norm();
    const SymMatrix c = coupling_block(su.robust_cert.R, su.robust_cert.Q, su.nominal_cert.P[th]);
    const Eigen::LLT<Matrix> llt(c.matrix());
    if (llt.info() != Eigen::Success) continue;
    const Vector ab = llt.matrixU().solve(w);

    s.x = su.limit_cycle.rho[th] + ab.head(n);
    const Vector zfrak1 = su.limit_cycle.rho[th] + ab.tail(n);
    const auto jv = static_cast<std::size_t>(su.cycle.mode(s.vartheta));
    const Eigen::FullPivLU<Matrix> lu(su.nominal.A(jv));
    if (!lu.isInvertible()) continue;
    s.z = lu.solve(zfrak1 - su.nominal.B(jv));

    const PredictionPair p = predict(s, su.nominal, su.cycle);
    if (!theta_argmin_ok(s, p, su.nominal_cert, su.limit_cycle)) continue;
    if (lyapunov(s, su.nominal, su.cycle, su.limit_cycle, su.nominal_cert, su.robust_cert) > 1.0) continue;
    ++rep.accepted;

    const auto& mode = su.system.mode(static_cast<std::size_t>(su.cycle.mode(s.theta)));
    for (std::size_t l = 0; l < mode.size(); ++l) {
      Vector wts = Vector::Zero(static_cast<Eigen::Index>(mode.size()));
      wts(static_cast<Eigen::Index>(l)) = 1.0;
      const ClosedLoopState nx =
          step(s, su.system, wts, su.nominal, su.cycle, su.limit_cycle, su.nominal_cert);
      rep.max_v_next = std::max(
          rep.max_v_next, lyapunov(nx, su.nominal, su.cycle, su.limit_cycle, su.nominal_cert, su.robust_cert));
    }
  }
  rep.pass = rep.max_v_next <= 1.0 + 1e-9;
  return rep;
}

}  // namespace sasrc
