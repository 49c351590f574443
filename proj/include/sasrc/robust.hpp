#pragma once

// Robust certification: assembles the coupling and Psi blocks for a fixed
// gamma as an LMI in (R, Q), solves it, and re-verifies certificates by
// direct eigenvalue checks.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sasrc/lmi.hpp"
#include "sasrc/nominal.hpp"

namespace sasrc {

struct RobustCertificate {
  SymMatrix R;
  SymMatrix Q;
  double gamma = 0.0;
  double margin = 0.0;  // min eigenvalue over the coupling and Psi blocks
};

struct BlockMargin {
  std::string name;
  double min_eig = 0.0;
};

struct RobustMarginReport {
  std::vector<BlockMargin> blocks;  // coupling blocks, then Psi blocks
  double r_min_eig = 0.0;
  double q_min_eig = 0.0;
  double min_margin = 0.0;
  bool valid = false;
};

/// Everything the robust conditions are evaluated against.
struct RobustContext {
  const SwitchedAffineSystem& system;
  const NominalSelection& nominal;
  const Cycle& cycle;
  const LimitCycle& limit_cycle;
  const NominalCertificate& nominal_cert;
};

namespace detail {

inline void check_context(const RobustContext& ctx) {
  ctx.cycle.check_against(ctx.system);
  const auto period = static_cast<std::size_t>(ctx.cycle.period());
  require(ctx.limit_cycle.rho.size() == period, Errc::InvalidInput, "limit cycle length differs from cycle period");
  require(ctx.nominal_cert.P.size() == period, Errc::InvalidInput, "certificate length differs from cycle period");
  require(ctx.nominal.num_modes() == ctx.system.num_modes(), Errc::InvalidInput, "nominal selection mode count");
  const auto n = ctx.system.dim();
  for (std::size_t i = 0; i < period; ++i) {
    require(ctx.limit_cycle.rho[i].size() == n, Errc::InvalidInput, "rho dimension mismatch");
    require(ctx.nominal_cert.P[i].dim() == n, Errc::InvalidInput, "P dimension mismatch");
  }
}

inline std::string label(const char* kind, int i, int l = -1) {
  std::string s = std::string(kind) + "[" + std::to_string(i + 1);
  if (l >= 0) s += "," + std::to_string(l + 1);
  return s + "]";
}

}  // namespace detail

/// delta_i^l = A^l rho_i + B^l - rho_{i+1} for cycle position i and vertex l (0-based).
inline Vector delta_vector(const SwitchedAffineSystem& system, const Cycle& cycle, const LimitCycle& lc, int i, int l) {
  require(i >= 0 && i < cycle.period(), Errc::InvalidInput, "cycle position out of range");
  require(lc.rho.size() == static_cast<std::size_t>(cycle.period()), Errc::InvalidInput, "limit cycle length");
  const auto& mode = system.mode(static_cast<std::size_t>(cycle.mode(i)));
  require(l >= 0 && static_cast<std::size_t>(l) < mode.size(), Errc::InvalidInput, "vertex index out of range");
  const auto& v = mode.vertices()[static_cast<std::size_t>(l)];
  return v.A * lc.rho[static_cast<std::size_t>(i)] + v.B - lc.rho[static_cast<std::size_t>(cycle.next(i))];
}

/// [[R + Q, -Q], [*, P + Q - 2R]]
inline SymMatrix coupling_block(const Matrix& r, const Matrix& q, const Matrix& p) {
  const auto n = r.rows();
  Matrix m(2 * n, 2 * n);
  m << r + q, -q, -q.transpose(), p + q - 2.0 * r;
  return SymMatrix::symmetrize(m);
}

/// The (3n+1)-square block Psi_i for one vertex (A^l, delta^l):
///   [(1-g)(R+Q) - (1-mu)P   -(1-g)Q            0        dA'(Q+2R)   ]
///   [*                      (1-g)(P+Q-2R)      0        0           ]
///   [*                      *                  g        delta'(Q+2R)]
///   [*                      *                  *        Q+2R        ]
inline SymMatrix psi_block(const Matrix& r, const Matrix& q, const Matrix& p, double gamma, double mu,
                           const Matrix& delta_a, const Vector& delta) {
  const auto n = r.rows();
  const Matrix s = q + 2.0 * r;
  Matrix m = Matrix::Zero(3 * n + 1, 3 * n + 1);
  m.block(0, 0, n, n) = (1.0 - gamma) * (r + q) - (1.0 - mu) * p;
  m.block(0, n, n, n) = -(1.0 - gamma) * q;
  m.block(0, 2 * n + 1, n, n) = delta_a.transpose() * s;
  m.block(n, n, n, n) = (1.0 - gamma) * (p + q - 2.0 * r);
  m(2 * n, 2 * n) = gamma;
  m.block(2 * n, 2 * n + 1, 1, n) = delta.transpose() * s;
  m.block(2 * n + 1, 2 * n + 1, n, n) = s;
  // mirror the upper triangle
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) m(j, i) = m(i, j);
  return SymMatrix::symmetrize(m);
}

/// All robust LMI blocks at (R, Q, gamma), in canonical order: coupling
/// block per cycle position, Psi block per (position, vertex), then R.
inline std::vector<SymMatrix> evaluate_robust_blocks(const RobustContext& ctx, double gamma, const Matrix& r,
                                                     const Matrix& q, std::vector<std::string>* names = nullptr) {
  detail::check_context(ctx);
  const int period = ctx.cycle.period();
  const double mu = ctx.nominal_cert.mu;
  std::vector<SymMatrix> out;
  if (names) names->clear();
  for (int i = 0; i < period; ++i) {
    out.push_back(coupling_block(r, q, ctx.nominal_cert.P[static_cast<std::size_t>(i)]));
    if (names) names->push_back(detail::label("coupling", i));
  }
  for (int i = 0; i < period; ++i) {
    const auto j = static_cast<std::size_t>(ctx.cycle.mode(i));
    const auto& mode = ctx.system.mode(j);
    for (std::size_t l = 0; l < mode.size(); ++l) {
      const Matrix da = mode.vertices()[l].A - ctx.nominal.A(j);
      const Vector d = delta_vector(ctx.system, ctx.cycle, ctx.limit_cycle, i, static_cast<int>(l));
      out.push_back(psi_block(r, q, ctx.nominal_cert.P[static_cast<std::size_t>(i)], gamma, mu, da, d));
      if (names) names->push_back(detail::label("psi", i, static_cast<int>(l)));
    }
  }
  out.push_back(SymMatrix::symmetrize(r));
  if (names) names->push_back("R");
  return out;
}

/// Basis of the symmetric n x n matrices: index k walks the upper triangle row by row.
inline Matrix sym_basis(Eigen::Index n, Eigen::Index k) {
  Matrix e = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      if (k-- == 0) {
        e(i, j) = 1.0;
        e(j, i) = 1.0;
        return e;
      }
    }
  fail(Errc::InvalidInput, "sym_basis index out of range");
}

inline Eigen::Index sym_count(Eigen::Index n) { return n * (n + 1) / 2; }

inline Matrix unpack_sym(const Vector& y, Eigen::Index offset, Eigen::Index n) {
  Matrix m = Matrix::Zero(n, n);
  Eigen::Index k = offset;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      m(i, j) = y(k);
      m(j, i) = y(k);
      ++k;
    }
  return m;
}

inline Vector pack_sym(const Matrix& r, const Matrix& q) {
  const auto n = r.rows();
  Vector y(2 * sym_count(n));
  Eigen::Index k = 0;
  for (const Matrix* m : {&r, &q})
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) y(k++) = (*m)(i, j);
  return y;
}

/// The robust conditions as an LMI in y = (svec R, svec Q). Coefficients are
/// obtained by evaluating the block formulas at basis points, then affinity is
/// probed at a pseudo-random point.
inline LmiProblem assemble_robust_lmi(const RobustContext& ctx, double gamma) {
  require(gamma > 0.0 && gamma < 1.0, Errc::InvalidInput, "gamma must lie in (0, 1)");
  const auto n = ctx.system.dim();
  const Eigen::Index half = sym_count(n);
  const Matrix zero = Matrix::Zero(n, n);

  LmiProblem prob;
  std::vector<SymMatrix> base = evaluate_robust_blocks(ctx, gamma, zero, zero, &prob.block_names);
  for (const auto& b : base) {
    prob.block_dims.push_back(b.dim());
    prob.constant.push_back(b.matrix());
  }
  for (Eigen::Index p = 0; p < 2 * half; ++p) {
    const Matrix e = sym_basis(n, p % half);
    const auto blocks = p < half ? evaluate_robust_blocks(ctx, gamma, e, zero) : evaluate_robust_blocks(ctx, gamma, zero, e);
    std::vector<Matrix> coeff;
    for (std::size_t b = 0; b < blocks.size(); ++b) coeff.push_back(blocks[b].matrix() - base[b].matrix());
    prob.coefficient.push_back(std::move(coeff));
  }

  Rng rng(0x5eed, 7);
  Vector probe(2 * half);
  for (Eigen::Index p = 0; p < probe.size(); ++p) probe(p) = rng.normal();
  const auto direct = evaluate_robust_blocks(ctx, gamma, unpack_sym(probe, 0, n), unpack_sym(probe, half, n));
  for (std::size_t b = 0; b < direct.size(); ++b) {
    const Matrix diff = prob.evaluate_block(b, probe) - direct[b].matrix();
    const double scale = std::max(1.0, direct[b].matrix().cwiseAbs().maxCoeff());
    require(diff.cwiseAbs().maxCoeff() <= 1e-9 * scale, Errc::InvalidInput,
            "robust block assembly failed the affinity probe at " + prob.block_names[b]);
  }
  return prob;
}

/// Direct re-verification: eigenvalues of every block at the given (R, Q, gamma).
inline RobustMarginReport verify_robust_certificate(const RobustContext& ctx, const RobustCertificate& cert) {
  RobustMarginReport rep;
  std::vector<std::string> names;
  const auto blocks = evaluate_robust_blocks(ctx, cert.gamma, cert.R.matrix(), cert.Q.matrix(), &names);
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b + 1 < blocks.size(); ++b) {
    const double e = min_eig(blocks[b]);
    rep.blocks.push_back({names[b], e});
    rep.min_margin = std::min(rep.min_margin, e);
  }
  rep.r_min_eig = min_eig(cert.R);
  rep.q_min_eig = min_eig(cert.Q);
  rep.valid = cert.gamma > 0.0 && cert.gamma < 1.0 && ctx.nominal_cert.mu > 0.0 && ctx.nominal_cert.mu < 1.0 &&
              rep.min_margin > 0.0 && rep.r_min_eig >= 0.0 && rep.q_min_eig > 0.0;
  return rep;
}

/// Checks only the coupling blocks, which need neither the system nor rho.
inline RobustMarginReport verify_coupling_blocks(const NominalCertificate& nominal_cert, const RobustCertificate& cert) {
  RobustMarginReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nominal_cert.P.size(); ++i) {
    const double e = min_eig(coupling_block(cert.R, cert.Q, nominal_cert.P[i]));
    rep.blocks.push_back({detail::label("coupling", static_cast<int>(i)), e});
    rep.min_margin = std::min(rep.min_margin, e);
  }
  rep.r_min_eig = min_eig(cert.R);
  rep.q_min_eig = min_eig(cert.Q);
  rep.valid = !nominal_cert.P.empty() && rep.min_margin > 0.0 && rep.r_min_eig >= 0.0 && rep.q_min_eig > 0.0;
  return rep;
}

struct RobustSolveResult {
  RobustCertificate cert;
  RobustMarginReport report;
  LmiSolution lmi;
};

/// Solves for (R, Q) at fixed gamma; throws InfeasibleError when the solver
/// margin or the independent re-verification fails.
inline RobustSolveResult synthesize_robust_certificate(const RobustContext& ctx, double gamma,
                                                       const LmiOptions& options = {}) {
  const LmiProblem prob = assemble_robust_lmi(ctx, gamma);
  const LmiSolution sol = solve_feasibility(prob, options);
  const auto n = ctx.system.dim();
  RobustSolveResult out;
  out.lmi = sol;
  out.cert.R = SymMatrix::symmetrize(unpack_sym(sol.y, 0, n));
  out.cert.Q = SymMatrix::symmetrize(unpack_sym(sol.y, sym_count(n), n));
  out.cert.gamma = gamma;
  out.report = verify_robust_certificate(ctx, out.cert);
  out.cert.margin = out.report.min_margin;
  if (!out.report.valid || out.report.min_margin < 0.5 * options.feas_tol)
    throw InfeasibleError("solver assignment failed independent re-verification", out.report.min_margin);
  return out;
}

/// R = 0 and Q = c I with c >= 2 (1-mu)/(mu-gamma) max_i lambda_max(P_i);
/// valid whenever the vertices coincide with the nominal matrices and gamma < mu.
inline RobustCertificate zero_uncertainty_certificate(const NominalCertificate& nominal_cert, double gamma) {
  const double mu = nominal_cert.mu;
  require(gamma > 0.0 && gamma < mu, Errc::InvalidInput, "closed form needs 0 < gamma < mu");
  require(!nominal_cert.P.empty(), Errc::InvalidInput, "empty nominal certificate");
  double top = 0.0;
  for (const auto& p : nominal_cert.P) top = std::max(top, sym_eigs(p).eigenvalues.maxCoeff());
  const auto n = nominal_cert.P.front().dim();
  RobustCertificate c;
  c.R = SymMatrix(n);
  c.Q = SymMatrix::symmetrize(Matrix::Identity(n, n) * (2.0 * (1.0 - mu) / (mu - gamma) * top));
  c.gamma = gamma;
  return c;
}

struct ScaledRobustResult {
  NominalCertificate nominal_cert;
  RobustSolveResult robust;
  double scale = 0.0;  // max_i lambda_max(P_i) of the chosen nominal certificate
  std::vector<std::pair<double, double>> tried;  // (scale, solver margin)
};

/// Nominal certificates are only defined up to a positive factor, while the
/// robust conditions are not homogeneous in that factor. This synthesizes
/// {P_i} at `mu`, tries each normalization in `scales` (largest eigenvalue
/// over all P_i), and keeps the one with the largest robust margin.
inline ScaledRobustResult synthesize_scaled_certificates(const SwitchedAffineSystem& system,
                                                         const NominalSelection& nominal, const Cycle& cycle,
                                                         const LimitCycle& lc, double mu, double gamma,
                                                         const LmiOptions& options = {},
                                                         std::vector<double> scales = {}) {
  if (scales.empty())
    for (int k = 6; k >= -4; --k) scales.push_back(std::pow(10.0, 0.5 * k));
  ScaledRobustResult best;
  double best_margin = -std::numeric_limits<double>::infinity();
  std::optional<NominalCertificate> best_cert;
  for (double s : scales) {
    NominalCertificate nc = synthesize_nominal_certificate(nominal, cycle, mu, s);
    const RobustContext ctx{system, nominal, cycle, lc, nc};
    const LmiSolution sol = maximize_margin(assemble_robust_lmi(ctx, gamma), options);
    best.tried.emplace_back(s, sol.margin);
    if (sol.margin > best_margin) {
      best_margin = sol.margin;
      best.scale = s;
      best_cert = std::move(nc);
    }
  }
  if (!best_cert || !(best_margin > options.feas_tol))
    throw InfeasibleError("no normalization of the nominal certificate admits a robust certificate", best_margin);
  best.nominal_cert = *best_cert;
  const RobustContext ctx{system, nominal, cycle, lc, best.nominal_cert};
  best.robust = synthesize_robust_certificate(ctx, gamma, options);
  return best;
}

struct GammaSweepRow {
  double gamma = 0.0;
  bool feasible = false;
  double margin = 0.0;
  std::optional<RobustCertificate> cert;
};

struct GammaSweep {
  std::vector<GammaSweepRow> rows;
  bool contiguous = true;  // feasible gammas form one run in grid order
  std::optional<double> best_gamma;
};

inline GammaSweep gamma_sweep(const RobustContext& ctx, const std::vector<double>& grid, const LmiOptions& options = {}) {
  GammaSweep sweep;
  double best_margin = -std::numeric_limits<double>::infinity();
  for (double g : grid) {
    require(g > 0.0 && g < 1.0, Errc::InvalidInput, "gamma grid must lie in (0, 1)");
    GammaSweepRow row;
    row.gamma = g;
    try {
      auto res = synthesize_robust_certificate(ctx, g, options);
      row.feasible = true;
      row.margin = res.cert.margin;
      row.cert = res.cert;
    } catch (const InfeasibleError& e) {
      row.margin = e.best_margin();
    }
    if (row.feasible && row.margin > best_margin) {
      best_margin = row.margin;
      sweep.best_gamma = g;
    }
    sweep.rows.push_back(std::move(row));
  }
  int runs = 0;
  for (std::size_t k = 0; k < sweep.rows.size(); ++k)
    if (sweep.rows[k].feasible && (k == 0 || !sweep.rows[k - 1].feasible)) ++runs;
  sweep.contiguous = runs <= 1;
  return sweep;
}

}  // namespace sasrc
