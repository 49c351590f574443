#pragma once

// Small dense LMI engine. A problem is a list of symmetric blocks
//   F_b(y) = F0_b + sum_p y_p F_{p,b},
// and the solver maximizes the common margin t with F_b(y) >= t I for all b.
//
// Stage 1 is a subgradient ascent on y -> min_b lambda_min(F_b(y)) using
// eigenvector outer products. Stage 2 is a path-following barrier method on
// (y, t): Newton steps on -tau t - sum_b log det(F_b(y) - t I) with tau
// increased geometrically. Any y is strictly feasible for t < min eig, so no
// phase-one problem is needed. The reported margin is recomputed with the
// Jacobi eigensolver, independent of the Cholesky factors used inside.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sasrc/numerics.hpp"

namespace sasrc {

struct LmiProblem {
  std::vector<Eigen::Index> block_dims;
  std::vector<std::string> block_names;          // optional labels, one per block
  std::vector<Matrix> constant;                  // F0_b
  std::vector<std::vector<Matrix>> coefficient;  // [p][b] -> F_{p,b}

  std::size_t num_blocks() const { return block_dims.size(); }
  std::size_t num_vars() const { return coefficient.size(); }

  void validate() const {
    require(constant.size() == block_dims.size(), Errc::InvalidInput, "LMI: constant block count mismatch");
    require(block_names.empty() || block_names.size() == block_dims.size(), Errc::InvalidInput,
            "LMI: block name count mismatch");
    auto check_block = [](const Matrix& m, Eigen::Index d) {
      require(m.rows() == d && m.cols() == d, Errc::InvalidInput, "LMI: block dimension mismatch");
      require(all_finite(m), Errc::InvalidInput, "LMI: non-finite entries");
      require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()),
              Errc::InvalidInput, "LMI: block is not symmetric");
    };
    for (std::size_t b = 0; b < block_dims.size(); ++b) check_block(constant[b], block_dims[b]);
    for (const auto& coeffs : coefficient) {
      require(coeffs.size() == block_dims.size(), Errc::InvalidInput, "LMI: coefficient block count mismatch");
      for (std::size_t b = 0; b < block_dims.size(); ++b) check_block(coeffs[b], block_dims[b]);
    }
  }

  Matrix evaluate_block(std::size_t b, const Vector& y) const {
    Matrix m = constant[b];
    for (std::size_t p = 0; p < coefficient.size(); ++p) {
      const double yp = y(static_cast<Eigen::Index>(p));
      if (yp != 0.0) m += yp * coefficient[p][b];
    }
    return m;
  }

  std::vector<SymMatrix> evaluate(const Vector& y) const {
    require(y.size() == static_cast<Eigen::Index>(num_vars()), Errc::InvalidInput, "LMI: assignment size mismatch");
    std::vector<SymMatrix> out;
    out.reserve(num_blocks());
    for (std::size_t b = 0; b < num_blocks(); ++b) out.push_back(SymMatrix::symmetrize(evaluate_block(b, y)));
    return out;
  }

  /// min_b lambda_min(F_b(y)) together with the per-block values.
  double margin(const Vector& y, std::vector<double>* per_block = nullptr) const {
    double m = std::numeric_limits<double>::infinity();
    if (per_block) per_block->clear();
    for (const auto& blk : evaluate(y)) {
      const double e = min_eig(blk);
      if (per_block) per_block->push_back(e);
      m = std::min(m, e);
    }
    return m;
  }
};

struct LmiOptions {
  double feas_tol = 1e-7;
  int subgradient_iters = 200;
  int max_outer = 80;
  int max_newton = 100;       // per outer iteration
  double tau_growth = 8.0;
  double gap_tol = 1e-12;     // stop once (barrier dimension) / tau falls below this
  double var_bound = 1e4;     // box |y_p| <= var_bound; bounds the margin and directions the blocks leave free
  std::optional<Vector> initial;
};

struct LmiSolution {
  Vector y;
  double margin = -std::numeric_limits<double>::infinity();
  std::vector<double> block_min_eig;
  bool feasible = false;
  int newton_steps = 0;
  int outer_iterations = 0;
};

/// One solve per instance; the iteration state is private.
class LmiSolver {
 public:
  LmiSolver(const LmiProblem& problem, LmiOptions options) : prob_(problem), opt_(std::move(options)) {
    prob_.validate();
    m_ = static_cast<Eigen::Index>(prob_.num_vars());
  }

  LmiSolution run() {
    require(!used_, Errc::InvalidInput, "LmiSolver instances are single-use");
    used_ = true;
    Vector y = opt_.initial ? *opt_.initial : Vector::Zero(m_);
    require(y.size() == m_, Errc::InvalidInput, "LMI: initial point size mismatch");
    y = y.cwiseMax(-0.5 * opt_.var_bound).cwiseMin(0.5 * opt_.var_bound);

    y = subgradient_stage(y);
    y = barrier_stage(y);

    LmiSolution sol;
    sol.y = y;
    sol.margin = prob_.margin(y, &sol.block_min_eig);
    sol.feasible = sol.margin > opt_.feas_tol;
    sol.newton_steps = newton_steps_;
    sol.outer_iterations = outer_;
    return sol;
  }

 private:
  Vector subgradient_stage(Vector y) {
    Vector best = y;
    double best_val = prob_.margin(y);
    const double step0 = std::max(1.0, y.norm());
    for (int k = 0; k < opt_.subgradient_iters; ++k) {
      double val = std::numeric_limits<double>::infinity();
      Vector g = Vector::Zero(m_);
      for (std::size_t b = 0; b < prob_.num_blocks(); ++b) {
        const auto rep = sym_eigs(SymMatrix::symmetrize(prob_.evaluate_block(b, y)));
        if (rep.min_eig < val) {
          val = rep.min_eig;
          const Vector v = rep.eigenvectors.col(0);
          for (Eigen::Index p = 0; p < m_; ++p) g(p) = v.dot(prob_.coefficient[static_cast<std::size_t>(p)][b] * v);
        }
      }
      if (val > best_val) {
        best_val = val;
        best = y;
      }
      const double gn = g.norm();
      if (gn == 0.0) break;
      y += (step0 / std::sqrt(1.0 + k)) * g / gn;
      y = y.cwiseMax(-0.5 * opt_.var_bound).cwiseMin(0.5 * opt_.var_bound);
    }
    return best;
  }

  struct Eval {
    bool interior = false;
    double value = 0.0;
    Vector grad;
    Matrix hess;
  };

  Eval evaluate(const Vector& w, double tau, bool derivatives) const {
    Eval e;
    const Vector y = w.head(m_);
    const double t = w(m_);
    const double bound = opt_.var_bound;
    if (((bound - y.array().abs()) <= 0.0).any()) return e;

    const Eigen::Index nv = m_ + 1;
    double val = -tau * t;
    if (derivatives) {
      e.grad = Vector::Zero(nv);
      e.grad(m_) = -tau;
      e.hess = Matrix::Zero(nv, nv);
    }
    for (std::size_t b = 0; b < prob_.num_blocks(); ++b) {
      const Eigen::Index d = prob_.block_dims[b];
      Matrix s = prob_.evaluate_block(b, y);
      s.diagonal().array() -= t;
      Eigen::LLT<Matrix> llt(s);
      if (llt.info() != Eigen::Success) return e;
      const auto diag = llt.matrixLLT().diagonal();
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        if (!(diag(i) > 0.0)) return e;
        logdet += 2.0 * std::log(diag(i));
      }
      val -= logdet;
      if (!derivatives) continue;

      // G_p = L^{-1} F_p L^{-T}; the t-direction has F = -I.
      std::vector<Matrix> g(static_cast<std::size_t>(nv));
      for (Eigen::Index p = 0; p < nv; ++p) {
        Matrix f = p < m_ ? prob_.coefficient[static_cast<std::size_t>(p)][b] : Matrix(-Matrix::Identity(d, d));
        Matrix tmp = llt.matrixL().solve(f);
        g[static_cast<std::size_t>(p)] = llt.matrixL().solve(tmp.transpose());
      }
      for (Eigen::Index p = 0; p < nv; ++p) {
        const Matrix& gp = g[static_cast<std::size_t>(p)];
        e.grad(p) -= gp.trace();
        for (Eigen::Index q = 0; q <= p; ++q) {
          const double h = gp.cwiseProduct(g[static_cast<std::size_t>(q)]).sum();
          e.hess(p, q) += h;
          if (q != p) e.hess(q, p) += h;
        }
      }
    }
    for (Eigen::Index p = 0; p < m_; ++p) {
      const double up = bound - y(p), lo = bound + y(p);
      val -= std::log(up) + std::log(lo);
      if (derivatives) {
        e.grad(p) += 1.0 / up - 1.0 / lo;
        e.hess(p, p) += 1.0 / (up * up) + 1.0 / (lo * lo);
      }
    }
    e.value = val;
    e.interior = std::isfinite(val);
    return e;
  }

  Vector barrier_stage(const Vector& y0) {
    const double start_margin = prob_.margin(y0);
    const double dim_total = [&] {
      double s = 2.0 * static_cast<double>(m_);
      for (auto d : prob_.block_dims) s += static_cast<double>(d);
      return s;
    }();
    Vector w(m_ + 1);
    w.head(m_) = y0;
    w(m_) = start_margin - std::max(1.0, std::abs(start_margin));

    double tau = 1.0 / std::max(1.0, std::abs(start_margin));
    for (outer_ = 0; outer_ < opt_.max_outer; ++outer_) {
      for (int it = 0; it < opt_.max_newton; ++it) {
        const Eval e = evaluate(w, tau, true);
        if (!e.interior) break;
        const Eigen::LDLT<Matrix> ldlt(e.hess);
        Vector dw = ldlt.solve(-e.grad);
        if (!dw.allFinite()) break;
        const double decrement = -e.grad.dot(dw);
        ++newton_steps_;
        if (decrement < 0.0) break;
        if (decrement / 2.0 < 1e-11) break;
        double alpha = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
          const Vector cand = w + alpha * dw;
          const Eval c = evaluate(cand, tau, false);
          if (c.interior && c.value <= e.value - 0.25 * alpha * decrement) {
            w = cand;
            moved = true;
            break;
          }
          alpha *= 0.5;
        }
        if (!moved) break;
      }
      if (dim_total / tau < opt_.gap_tol * std::max(1.0, std::abs(w(m_)))) break;
      tau *= opt_.tau_growth;
    }
    // keep whichever point has the larger true margin
    const Vector y = w.head(m_);
    return prob_.margin(y) >= start_margin ? y : y0;
  }

  const LmiProblem& prob_;
  LmiOptions opt_;
  Eigen::Index m_ = 0;
  bool used_ = false;
  int newton_steps_ = 0;
  int outer_ = 0;
};

/// Maximizes the min-eigenvalue margin without throwing.
inline LmiSolution maximize_margin(const LmiProblem& problem, const LmiOptions& options = {}) {
  return LmiSolver(problem, options).run();
}

/// Feasible iff the achieved margin exceeds options.feas_tol; throws
/// InfeasibleError (with the best margin) otherwise.
inline LmiSolution solve_feasibility(const LmiProblem& problem, const LmiOptions& options = {}) {
  LmiSolution sol = maximize_margin(problem, options);
  if (!sol.feasible)
    throw InfeasibleError("LMI margin " + std::to_string(sol.margin) + " <= feas_tol", sol.margin);
  return sol;
}

}  // namespace sasrc
