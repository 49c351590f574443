#pragma once

// Nominal limit cycle, monodromy matrix and nominal Lyapunov certificates
// {P_i} with decay rate mu.

#include <cmath>
#include <vector>

#include "sasrc/model.hpp"

namespace sasrc {

struct LimitCycle {
  std::vector<Vector> rho;  // rho[i] for cycle position i (0-based)
  double residual = 0.0;    // max_i |rho[i+1] - (A rho[i] + B)|_inf
};

struct NominalCertificate {
  std::vector<SymMatrix> P;
  double mu = 0.0;
};

struct MonodromyReport {
  Matrix phi;
  double spectral_radius = 0.0;
  bool schur_stable = false;
};

struct NominalMarginReport {
  std::vector<double> p_min_eig;      // lambda_min(P_i)
  std::vector<double> decay_min_eig;  // lambda_min((1-mu) P_i - A' P_{i+1} A)
  double min_margin = 0.0;
  bool valid = false;
};

namespace detail {

inline void check_nominal_cycle(const NominalSelection& nominal, const Cycle& cycle) {
  for (int m : cycle.modes())
    require(m >= 0 && static_cast<std::size_t>(m) < nominal.num_modes(), Errc::InvalidInput,
            "cycle refers to an unknown mode");
  const auto n = nominal.A(0).rows();
  for (std::size_t j = 0; j < nominal.num_modes(); ++j)
    require(nominal.A(j).rows() == n && nominal.A(j).cols() == n && nominal.B(j).size() == n, Errc::InvalidInput,
            "nominal matrices disagree on dimension");
}

}  // namespace detail

/// Phi = A_{nu(N)} ... A_{nu(2)} A_{nu(1)}, the one-period state transition
/// starting from cycle position 1.
inline MonodromyReport monodromy(const NominalSelection& nominal, const Cycle& cycle) {
  detail::check_nominal_cycle(nominal, cycle);
  const auto n = nominal.A(0).rows();
  MonodromyReport r;
  r.phi = Matrix::Identity(n, n);
  for (int i = 0; i < cycle.period(); ++i) r.phi = nominal.A(static_cast<std::size_t>(cycle.mode(i))) * r.phi;
  r.spectral_radius = spectral_radius(r.phi);
  r.schur_stable = r.spectral_radius < 1.0;
  return r;
}

/// Unique periodic solution of rho_{i+1} = A_{nu(i)} rho_i + B_{nu(i)}.
inline LimitCycle compute_limit_cycle(const NominalSelection& nominal, const Cycle& cycle) {
  detail::check_nominal_cycle(nominal, cycle);
  const auto n = nominal.A(0).rows();
  const int period = cycle.period();

  Matrix phi = Matrix::Identity(n, n);
  Vector offset = Vector::Zero(n);
  for (int i = 0; i < period; ++i) {
    const auto j = static_cast<std::size_t>(cycle.mode(i));
    phi = nominal.A(j) * phi;
    offset = nominal.A(j) * offset + nominal.B(j);
  }

  const Matrix lhs = Matrix::Identity(n, n) - phi;
  Eigen::FullPivLU<Matrix> lu(lhs);
  lu.setThreshold(1e-13);
  require(lu.isInvertible(), Errc::NoUniqueLimitCycle, "I - Phi is singular");

  Vector rho1 = lu.solve(offset);
  rho1 += lu.solve(offset - lhs * rho1);

  LimitCycle lc;
  lc.rho.reserve(static_cast<std::size_t>(period));
  lc.rho.push_back(rho1);
  for (int i = 0; i + 1 < period; ++i) {
    const auto j = static_cast<std::size_t>(cycle.mode(i));
    lc.rho.push_back(nominal.A(j) * lc.rho.back() + nominal.B(j));
  }
  for (int i = 0; i < period; ++i) {
    const auto j = static_cast<std::size_t>(cycle.mode(i));
    const Vector r = lc.rho[static_cast<std::size_t>(cycle.next(i))] - (nominal.A(j) * lc.rho[static_cast<std::size_t>(i)] + nominal.B(j));
    lc.residual = std::max(lc.residual, r.cwiseAbs().maxCoeff());
  }
  return lc;
}

/// Margins of P_i > 0 and A' P_{i+1} A < (1 - mu) P_i at every cycle position.
inline NominalMarginReport verify_nominal_certificate(const NominalCertificate& cert, const NominalSelection& nominal,
                                                      const Cycle& cycle) {
  NominalMarginReport rep;
  const int period = cycle.period();
  if (cert.P.size() != static_cast<std::size_t>(period)) return rep;
  detail::check_nominal_cycle(nominal, cycle);
  const auto n = nominal.A(0).rows();
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < period; ++i) {
    const auto& p = cert.P[static_cast<std::size_t>(i)];
    const auto& pn = cert.P[static_cast<std::size_t>(cycle.next(i))];
    require(p.dim() == n, Errc::InvalidInput, "certificate dimension mismatch");
    const Matrix& a = nominal.A(static_cast<std::size_t>(cycle.mode(i)));
    const double pe = min_eig(p);
    const double de = min_eig(SymMatrix::symmetrize((1.0 - cert.mu) * p.matrix() - a.transpose() * pn.matrix() * a));
    rep.p_min_eig.push_back(pe);
    rep.decay_min_eig.push_back(de);
    rep.min_margin = std::min({rep.min_margin, pe, de});
  }
  rep.valid = cert.mu > 0.0 && cert.mu < 1.0 && rep.min_margin > 0.0;
  return rep;
}

/// Constructive certificate: P_1 from a discrete Lyapunov equation of the
/// mu-scaled monodromy, the rest by back-propagation
///   P_i = A_{nu(i)}' P_{i+1} A_{nu(i)} / (1 - mu) + eps I,
/// which closes around the cycle exactly. The construction is homogeneous in
/// eps, so eps = 1; `normalize_to > 0` rescales so max_i lambda_max(P_i) equals it.
inline NominalCertificate synthesize_nominal_certificate(const NominalSelection& nominal, const Cycle& cycle, double mu,
                                                         double normalize_to = 0.0) {
  require(mu > 0.0 && mu < 1.0, Errc::InvalidInput, "mu must lie in (0, 1)");
  detail::check_nominal_cycle(nominal, cycle);
  const auto n = nominal.A(0).rows();
  const int period = cycle.period();
  const double decay = 1.0 - mu;
  const double eps = 1.0;

  const MonodromyReport mono = monodromy(nominal, cycle);
  const Matrix scaled = mono.phi * std::pow(decay, -0.5 * period);
  const double rs = spectral_radius(scaled);
  require(rs < 1.0, Errc::MuTooLarge,
          "scaled monodromy spectral radius " + std::to_string(rs) + " >= 1 for mu = " + std::to_string(mu));

  // W = eps * sum_i (1-mu)^{-(i-1)} M_i' M_i, with M_i the transition from position 1 to i.
  Matrix w = Matrix::Zero(n, n);
  Matrix m = Matrix::Identity(n, n);
  for (int i = 0; i < period; ++i) {
    w += eps * std::pow(decay, -i) * (m.transpose() * m);
    m = nominal.A(static_cast<std::size_t>(cycle.mode(i))) * m;
  }
  const SymMatrix p1 = solve_discrete_lyapunov(scaled, SymMatrix::symmetrize(w));

  std::vector<SymMatrix> p(static_cast<std::size_t>(period));
  p[0] = p1;
  Matrix next = p1.matrix();
  for (int i = period - 1; i >= 1; --i) {
    const Matrix& a = nominal.A(static_cast<std::size_t>(cycle.mode(i)));
    next = a.transpose() * next * a / decay + eps * Matrix::Identity(n, n);
    p[static_cast<std::size_t>(i)] = SymMatrix::symmetrize(next);
    next = p[static_cast<std::size_t>(i)].matrix();
  }

  if (normalize_to > 0.0) {
    double top = 0.0;
    for (const auto& pi : p) top = std::max(top, sym_eigs(pi).eigenvalues.maxCoeff());
    for (auto& pi : p) pi = SymMatrix::symmetrize(pi.matrix() * (normalize_to / top));
  }
  return {std::move(p), mu};
}

/// Largest mu in (0, 1) for which the mu-scaled monodromy stays Schur stable,
/// by bisection. Analytically 1 - rho(Phi)^{2/N}.
inline double max_mu(const NominalSelection& nominal, const Cycle& cycle, double tol = 1e-10) {
  require(tol > 0.0 && tol < 0.5, Errc::InvalidInput, "tolerance must lie in (0, 0.5)");
  const MonodromyReport mono = monodromy(nominal, cycle);
  require(mono.schur_stable, Errc::MuInfeasible, "monodromy is not Schur stable");
  const int period = cycle.period();
  auto feasible = [&](double mu) {
    return mono.spectral_radius * std::pow(1.0 - mu, -0.5 * period) < 1.0;
  };
  if (feasible(1.0 - tol)) return 1.0 - tol;
  double lo = 0.0, hi = 1.0 - tol;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace sasrc
