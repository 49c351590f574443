#pragma once

// Benchmark data shared by the unit tests and the acceptance binary: the
// published limit-cycle points and certificates, and the sampling period
// recovered by fitting the limit cycle to those points.

#include <cmath>

#include "sasrc/sasrc.hpp"

namespace bench {

using namespace sasrc;

inline std::vector<Vector> published_rho() {
  Vector r1(3), r2(3);
  r1 << 3.84, -0.65, 0.36;
  r2 << 1.12, 0.014, 1.1042;
  return {r1, r2};
}

inline NominalCertificate published_nominal() {
  Matrix p1(3, 3), p2(3, 3);
  p1 << 0.73, 3.77, -3.38, 3.778, 25.7, -19.8, -3.38, -19.8, 28.49;
  p2 << 4.51, 4.89, -2.9, 4.89, 6.31, -3.58, -2.9, -3.58, 4.02;
  return {{SymMatrix::symmetrize(p1), SymMatrix::symmetrize(p2)}, 0.25};
}

inline RobustCertificate published_robust() {
  Matrix r(3, 3), q(3, 3);
  r << 0.003, 0.003, -0.0051, 0.003, 0.0053, -0.0013, -0.0051, -0.0013, 0.0781;
  q << 65.8, 7.56, -1.33, 7.56, 158.7, -122.6, -1.33, -122.6, 553.01;
  return {SymMatrix::symmetrize(r), SymMatrix::symmetrize(q), 0.125, 0.0};
}

/// Euclidean distance between the stacked limit cycle at T and the published points.
inline double rho_residual(double t) {
  const auto ex = build_example(t);
  try {
    const auto lc = compute_limit_cycle(ex.nominal, Cycle({0, 1}));
    const auto ref = published_rho();
    double s = 0.0;
    for (std::size_t i = 0; i < 2; ++i) s += (lc.rho[i] - ref[i]).squaredNorm();
    return std::sqrt(s);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

struct Calibration {
  double t = 0.0;
  double residual = 0.0;
};

/// Grid over (0, 2] followed by golden-section refinement around the best point.
inline Calibration calibrate(int grid = 2000) {
  Calibration best{0.0, std::numeric_limits<double>::infinity()};
  const double h = 2.0 / grid;
  for (int k = 1; k <= grid; ++k) {
    const double t = k * h;
    const double r = rho_residual(t);
    if (r < best.residual) best = {t, r};
  }
  double lo = std::max(1e-6, best.t - h), hi = std::min(2.0, best.t + h);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = rho_residual(x1), f2 = rho_residual(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      hi = x2, x2 = x1, f2 = f1;
      x1 = hi - phi * (hi - lo), f1 = rho_residual(x1);
    } else {
      lo = x1, x1 = x2, f1 = f2;
      x2 = lo + phi * (hi - lo), f2 = rho_residual(x2);
    }
  }
  const double t = 0.5 * (lo + hi);
  const double r = rho_residual(t);
  if (r < best.residual) best = {t, r};
  return best;
}

struct Fixture {
  Calibration cal = calibrate();
  DiscretizedSystem ex = build_example(cal.t);
  Cycle cycle{{0, 1}};
  LimitCycle lc = compute_limit_cycle(ex.nominal, cycle);
  NominalCertificate published_p = published_nominal();
  RobustCertificate published_r = published_robust();

  RobustContext ctx_published() const { return {ex.system, ex.nominal, cycle, lc, published_p}; }
  SimulationSetup setup_published() const { return {ex.system, ex.nominal, cycle, lc, published_p, published_r}; }
};

inline const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace bench
