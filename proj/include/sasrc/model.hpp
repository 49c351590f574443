#pragma once

// Uncertain switched affine systems in vertex (polytopic) form, the cyclic
// mode sequence, and seeded uncertainty sampling.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sasrc/numerics.hpp"

namespace sasrc {

struct Vertex {
  Matrix A;  // n x n
  Vector B;  // n
};

/// Convex hull of (A, B) vertex pairs for one mode.
class ModePolytope {
 public:
  explicit ModePolytope(std::vector<Vertex> vertices) : vertices_(std::move(vertices)) {
    require(!vertices_.empty(), Errc::InvalidInput, "mode polytope needs at least one vertex");
    const auto n = vertices_.front().A.rows();
    for (const auto& v : vertices_) {
      require(v.A.rows() == n && v.A.cols() == n && v.B.size() == n, Errc::InvalidInput,
              "mode vertices must share dimensions");
      require(all_finite(v.A) && v.B.allFinite(), Errc::InvalidInput, "vertex has non-finite entries");
    }
  }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  Eigen::Index dim() const { return vertices_.front().A.rows(); }

 private:
  std::vector<Vertex> vertices_;
};

class SwitchedAffineSystem {
 public:
  explicit SwitchedAffineSystem(std::vector<ModePolytope> modes) : modes_(std::move(modes)) {
    require(modes_.size() >= 2, Errc::InvalidInput, "a switched system needs K >= 2 modes");
    n_ = modes_.front().dim();
    require(n_ >= 1, Errc::InvalidInput, "state dimension must be >= 1");
    for (const auto& m : modes_) require(m.dim() == n_, Errc::InvalidInput, "modes disagree on state dimension");
  }

  Eigen::Index dim() const { return n_; }
  std::size_t num_modes() const { return modes_.size(); }
  const ModePolytope& mode(std::size_t j) const { return modes_.at(j); }
  const std::vector<ModePolytope>& modes() const { return modes_; }

 private:
  Eigen::Index n_ = 0;
  std::vector<ModePolytope> modes_;
};

namespace detail {

inline void check_weights(const Vector& w, std::size_t count) {
  require(w.size() == static_cast<Eigen::Index>(count), Errc::InvalidInput, "weight count does not match vertex count");
  require(w.allFinite(), Errc::InvalidInput, "weights must be finite");
  require((w.array() >= 0.0).all(), Errc::InvalidInput, "weights must be non-negative");
  require(std::abs(w.sum() - 1.0) <= 1e-12, Errc::InvalidInput, "weights must sum to 1");
}

}  // namespace detail

/// Convex combination of a mode's vertices. An indicator weight returns the
/// vertex unchanged; otherwise the sum is taken relative to vertex 0 so equal
/// vertices reproduce exactly.
inline Vertex realize(const ModePolytope& mode, const Vector& weights) {
  detail::check_weights(weights, mode.size());
  const auto& vs = mode.vertices();
  for (std::size_t l = 0; l < vs.size(); ++l)
    if (weights(static_cast<Eigen::Index>(l)) == 1.0) return vs[l];
  Vertex out = vs.front();
  for (std::size_t l = 1; l < vs.size(); ++l) {
    const double w = weights(static_cast<Eigen::Index>(l));
    if (w == 0.0) continue;
    out.A += w * (vs[l].A - vs.front().A);
    out.B += w * (vs[l].B - vs.front().B);
  }
  return out;
}

/// Nominal matrices (A_bar, B_bar) per mode and the convex weights producing them.
class NominalSelection {
 public:
  /// Nominal matrices computed from the weights.
  NominalSelection(const SwitchedAffineSystem& sys, std::vector<Vector> weights) : weights_(std::move(weights)) {
    require(weights_.size() == sys.num_modes(), Errc::InvalidInput, "one weight vector per mode required");
    for (std::size_t j = 0; j < sys.num_modes(); ++j) {
      const Vertex v = realize(sys.mode(j), weights_[j]);
      a_.push_back(v.A);
      b_.push_back(v.B);
    }
  }

  /// Explicit nominal matrices; checked against the weights within 1e-12.
  NominalSelection(const SwitchedAffineSystem& sys, std::vector<Vector> weights, std::vector<Matrix> a_bar,
                   std::vector<Vector> b_bar)
      : NominalSelection(sys, std::move(weights)) {
    require(a_bar.size() == a_.size() && b_bar.size() == b_.size(), Errc::InvalidInput,
            "one nominal pair per mode required");
    for (std::size_t j = 0; j < a_.size(); ++j) {
      require(a_bar[j].rows() == a_[j].rows() && a_bar[j].cols() == a_[j].cols() && b_bar[j].size() == b_[j].size(),
              Errc::InvalidInput, "nominal matrix dimension mismatch");
      const double scale = std::max(1.0, std::max(a_[j].cwiseAbs().maxCoeff(), b_[j].cwiseAbs().maxCoeff()));
      require((a_bar[j] - a_[j]).cwiseAbs().maxCoeff() <= 1e-12 * scale &&
                  (b_bar[j] - b_[j]).cwiseAbs().maxCoeff() <= 1e-12 * scale,
              Errc::InvalidInput, "nominal matrices are not the stated convex combination");
    }
    a_ = std::move(a_bar);
    b_ = std::move(b_bar);
  }

  /// Uniform weights over each mode's vertices (the interval midpoint for two vertices).
  static NominalSelection midpoint(const SwitchedAffineSystem& sys) {
    std::vector<Vector> w;
    for (const auto& m : sys.modes())
      w.push_back(Vector::Constant(static_cast<Eigen::Index>(m.size()), 1.0 / static_cast<double>(m.size())));
    return NominalSelection(sys, std::move(w));
  }

  std::size_t num_modes() const { return a_.size(); }
  const Matrix& A(std::size_t j) const { return a_.at(j); }
  const Vector& B(std::size_t j) const { return b_.at(j); }
  const Vector& weights(std::size_t j) const { return weights_.at(j); }

 private:
  std::vector<Vector> weights_;
  std::vector<Matrix> a_;
  std::vector<Vector> b_;
};

/// Periodic mode sequence stored over one minimal period. Positions and modes
/// are 0-based in code; files and reports use 1-based values.
class Cycle {
 public:
  explicit Cycle(std::vector<int> modes) {
    require(!modes.empty(), Errc::InvalidInput, "cycle must be non-empty");
    for (int m : modes) require(m >= 0, Errc::InvalidInput, "cycle mode index out of range");
    const std::size_t len = modes.size();
    std::size_t period = len;
    for (std::size_t p = 1; p < len; ++p) {
      if (len % p != 0) continue;
      bool ok = true;
      for (std::size_t i = p; i < len && ok; ++i) ok = modes[i] == modes[i - p];
      if (ok) {
        period = p;
        break;
      }
    }
    modes.resize(period);
    modes_ = std::move(modes);
  }

  static Cycle from_one_based(const std::vector<int>& modes) {
    std::vector<int> z;
    for (int m : modes) {
      require(m >= 1, Errc::InvalidInput, "cycle entries are 1-based");
      z.push_back(m - 1);
    }
    return Cycle(std::move(z));
  }

  int period() const { return static_cast<int>(modes_.size()); }
  /// Mode applied at cycle position `pos` (0-based, wraps).
  int mode(int pos) const { return modes_[static_cast<std::size_t>(((pos % period()) + period()) % period())]; }
  int next(int pos) const { return (pos + 1) % period(); }
  const std::vector<int>& modes() const { return modes_; }
  std::vector<int> one_based() const {
    std::vector<int> out;
    for (int m : modes_) out.push_back(m + 1);
    return out;
  }

  void check_against(const SwitchedAffineSystem& sys) const {
    for (int m : modes_)
      require(static_cast<std::size_t>(m) < sys.num_modes(), Errc::InvalidInput, "cycle refers to an unknown mode");
  }

 private:
  std::vector<int> modes_;
};

/// ((i - 1) mod N) + 1 for 1-based positions i >= 1.
inline int mod_index(long i, const Cycle& cycle) {
  require(i >= 1, Errc::InvalidInput, "mod_index requires i >= 1");
  return static_cast<int>((i - 1) % cycle.period()) + 1;
}

enum class Strategy { VertexRandom, DirichletUniform, Nominal };

inline Strategy parse_strategy(std::string_view s) {
  if (s == "vertex-random") return Strategy::VertexRandom;
  if (s == "dirichlet-uniform") return Strategy::DirichletUniform;
  if (s == "nominal") return Strategy::Nominal;
  fail(Errc::InvalidInput, "unknown uncertainty strategy '" + std::string(s) + "'");
}

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::VertexRandom: return "vertex-random";
    case Strategy::DirichletUniform: return "dirichlet-uniform";
    case Strategy::Nominal: return "nominal";
  }
  return "unknown";
}

/// Small deterministic generator (splitmix64). Streams are derived by seeding
/// with mix(seed, stream id), so results do not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : state_(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1))) {
    next();
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform in (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }
  std::size_t index(std::size_t count) { return static_cast<std::size_t>(next() % count); }
  double normal() {
    // Box-Muller
    const double u1 = uniform_open0();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

/// Per-step convex weights for every mode; the simulator reads the entry of
/// whichever mode is active.
struct UncertaintyRealization {
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Nominal;
  std::vector<std::vector<Vector>> weights;  // [step][mode]

  std::size_t horizon() const { return weights.size(); }
};

inline Vector sample_step_weights(Rng& rng, std::size_t vertex_count, Strategy strategy, const Vector& nominal) {
  const auto n = static_cast<Eigen::Index>(vertex_count);
  switch (strategy) {
    case Strategy::VertexRandom: {
      Vector w = Vector::Zero(n);
      w(static_cast<Eigen::Index>(rng.index(vertex_count))) = 1.0;
      return w;
    }
    case Strategy::DirichletUniform: {
      Vector w(n);
      for (Eigen::Index l = 0; l < n; ++l) w(l) = -std::log(rng.uniform_open0());
      const double s = w.sum();
      if (s > 0.0) return w / s;
      return Vector::Constant(n, 1.0 / static_cast<double>(n));
    }
    case Strategy::Nominal: return nominal;
  }
  return nominal;
}

inline UncertaintyRealization sample_uncertainty(const SwitchedAffineSystem& sys, const NominalSelection& nominal,
                                                 std::size_t horizon, std::uint64_t seed, Strategy strategy) {
  require(horizon >= 1, Errc::InvalidInput, "horizon must be >= 1");
  UncertaintyRealization r;
  r.seed = seed;
  r.strategy = strategy;
  r.weights.reserve(horizon);
  Rng rng(seed, 1);
  for (std::size_t k = 0; k < horizon; ++k) {
    std::vector<Vector> step;
    step.reserve(sys.num_modes());
    for (std::size_t j = 0; j < sys.num_modes(); ++j)
      step.push_back(sample_step_weights(rng, sys.mode(j).size(), strategy, nominal.weights(j)));
    r.weights.push_back(std::move(step));
  }
  return r;
}

inline UncertaintyRealization sample_uncertainty(const SwitchedAffineSystem& sys, const NominalSelection& nominal,
                                                 std::size_t horizon, std::uint64_t seed, std::string_view strategy) {
  return sample_uncertainty(sys, nominal, horizon, seed, parse_strategy(strategy));
}

/// Continuous-time mode x' = F x + g with a scalar interval uncertainty
/// delta in [-bound, bound] entering as delta * (dA, dB) after discretization.
struct ContinuousMode {
  Matrix F;
  Vector g;
  Matrix dA;
  Vector dB;
  double bound = 0.0;
};

struct DiscretizedSystem {
  SwitchedAffineSystem system;
  NominalSelection nominal;
};

/// Builds the vertex form: vertex 0 at delta = +bound, vertex 1 at -bound,
/// nominal at delta = 0 (midpoint weights).
inline DiscretizedSystem discretize(const std::vector<ContinuousMode>& modes, double t) {
  require(t > 0.0 && std::isfinite(t), Errc::InvalidInput, "sampling period T must be positive");
  std::vector<ModePolytope> polys;
  std::vector<Matrix> a_bar;
  std::vector<Vector> b_bar;
  std::vector<Vector> weights;
  for (const auto& m : modes) {
    require(m.bound >= 0.0 && std::isfinite(m.bound), Errc::InvalidInput, "uncertainty bound must be >= 0");
    const auto d = expm_affine(m.F, m.g, t);
    const auto n = d.ad.rows();
    const Matrix da = m.dA.size() == 0 ? Matrix::Zero(n, n) : m.dA;
    const Vector db = m.dB.size() == 0 ? Vector::Zero(n) : m.dB;
    require(da.rows() == n && da.cols() == n && db.size() == n, Errc::InvalidInput,
            "uncertainty direction dimension mismatch");
    polys.emplace_back(std::vector<Vertex>{{d.ad + m.bound * da, d.bd + m.bound * db},
                                           {d.ad - m.bound * da, d.bd - m.bound * db}});
    a_bar.push_back(d.ad);
    b_bar.push_back(d.bd);
    weights.push_back(Vector::Constant(2, 0.5));
  }
  SwitchedAffineSystem sys(std::move(polys));
  NominalSelection nom(sys, std::move(weights), std::move(a_bar), std::move(b_bar));
  return {std::move(sys), std::move(nom)};
}

/// The two-mode, three-state benchmark with uncertain entries A1(1,2),
/// B1(2) = 4 delta1 and A2(2,1), B2(1) = 1.4 delta2.
inline std::vector<ContinuousMode> example_continuous_modes(double delta1_bound, double delta2_bound) {
  ContinuousMode m1;
  m1.F.resize(3, 3);
  m1.F << -3, -6, 3, 2, 2, -3, 1.6, 0, -2;
  m1.g = Vector::Zero(3);
  m1.g(0) = 0.5;
  m1.dA = Matrix::Zero(3, 3);
  m1.dA(0, 1) = 1.0;
  m1.dB = Vector::Zero(3);
  m1.dB(1) = 4.0;
  m1.bound = delta1_bound;

  ContinuousMode m2;
  m2.F.resize(3, 3);
  m2.F << 1, 3, 3, -0.2, -3, -3, 0, 0, -2;
  m2.g = Vector::Zero(3);
  m2.g(2) = 0.5;
  m2.dA = Matrix::Zero(3, 3);
  m2.dA(1, 0) = 1.0;
  m2.dB = Vector::Zero(3);
  m2.dB(0) = 1.4;
  m2.bound = delta2_bound;
  return {m1, m2};
}

inline DiscretizedSystem build_example(double t, double delta1_bound = 0.007, double delta2_bound = 0.015) {
  return discretize(example_continuous_modes(delta1_bound, delta2_bound), t);
}

inline SwitchedAffineSystem build_example_system(double t, double delta1_bound, double delta2_bound) {
  return build_example(t, delta1_bound, delta2_bound).system;
}

}  // namespace sasrc
