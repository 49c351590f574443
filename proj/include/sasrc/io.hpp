#pragma once

// JSON and CSV artifacts: system descriptions, certificates, LMI export,
// traces and ellipsoid plot data.
//
// Numbers are written with the shortest representation that reads back to
// the identical double, so verify-after-write sees the same bits.

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sasrc/control_sim.hpp"

namespace sasrc::io {

using json = nlohmann::json;

[[noreturn]] inline void config_error(const std::string& what) { fail(Errc::ConfigError, what); }

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) config_error(what + ": expected a number");
  return j.get<double>();
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) config_error(what + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) config_error(what + ": rows must be non-empty arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) config_error(what + ": ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = number(row[static_cast<std::size_t>(c)], what);
  }
  if (!m.allFinite()) config_error(what + ": non-finite entries");
  return m;
}

/// Accepts [a, b, c] or a column [[a], [b], [c]].
inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) config_error(what + ": expected a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_array()) {
      if (j[i].size() != 1) config_error(what + ": column vector rows must hold one entry");
      v(static_cast<Eigen::Index>(i)) = number(j[i][0], what);
    } else {
      v(static_cast<Eigen::Index>(i)) = number(j[i], what);
    }
  }
  if (!v.allFinite()) config_error(what + ": non-finite entries");
  return v;
}

inline SymMatrix sym_from_json(const json& j, const std::string& what) {
  const Matrix m = matrix_from_json(j, what);
  if (m.rows() != m.cols()) config_error(what + ": expected a square matrix");
  return SymMatrix::symmetrize(m);
}

/// 64-bit FNV-1a over the compact dump, as 16 hex digits.
inline std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) config_error("'" + path + "' is empty");
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    config_error("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) config_error("cannot write '" + path + "'");
  out << text;
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// System description
//
// {
//   "n": 3,
//   "modes": [{"vertices": [{"A": [[...]], "B": [...]}, ...]}, ...],
//   "nominal_weights": [[0.5, 0.5], ...],                 optional, default uniform
//   "nominal": [{"A": [[...]], "B": [...]}, ...],          optional, checked against the weights
//   "cycle": [1, 2],                                       optional, 1-based modes
//   "continuous": {                                        alternative to "modes"
//     "T": 1.0,
//     "modes": [{"F": [[...]], "g": [...],
//                "uncertainty": {"A": [[...]], "B": [...], "bound": 0.007}}, ...]
//   }
// }
// ---------------------------------------------------------------------------

struct SystemDescription {
  SwitchedAffineSystem system;
  NominalSelection nominal;
  std::optional<Cycle> cycle;
};

inline std::vector<ContinuousMode> continuous_modes_from_json(const json& c) {
  if (!c.contains("modes") || !c["modes"].is_array()) config_error("continuous: 'modes' array required");
  std::vector<ContinuousMode> modes;
  for (std::size_t j = 0; j < c["modes"].size(); ++j) {
    const auto& m = c["modes"][j];
    const std::string tag = "continuous.modes[" + std::to_string(j) + "]";
    ContinuousMode cm;
    if (!m.contains("F") || !m.contains("g")) config_error(tag + ": 'F' and 'g' required");
    cm.F = matrix_from_json(m["F"], tag + ".F");
    cm.g = vector_from_json(m["g"], tag + ".g");
    if (m.contains("uncertainty")) {
      const auto& u = m["uncertainty"];
      if (u.contains("A")) cm.dA = matrix_from_json(u["A"], tag + ".uncertainty.A");
      if (u.contains("B")) cm.dB = vector_from_json(u["B"], tag + ".uncertainty.B");
      cm.bound = u.contains("bound") ? number(u["bound"], tag + ".uncertainty.bound") : 0.0;
    }
    modes.push_back(std::move(cm));
  }
  return modes;
}

inline json continuous_modes_to_json(const std::vector<ContinuousMode>& modes, double t) {
  json c;
  c["T"] = t;
  c["modes"] = json::array();
  for (const auto& m : modes) {
    json jm;
    jm["F"] = to_json(m.F);
    jm["g"] = to_json(m.g);
    jm["uncertainty"] = {{"A", to_json(m.dA)}, {"B", to_json(m.dB)}, {"bound", m.bound}};
    c["modes"].push_back(std::move(jm));
  }
  return c;
}

/// Parses a system description. `t_override` replaces continuous.T when set.
inline SystemDescription system_from_json(const json& j, std::optional<double> t_override = std::nullopt) {
  if (!j.is_object()) config_error("system description must be a JSON object");
  std::optional<Cycle> cycle;
  if (j.contains("cycle")) {
    if (!j["cycle"].is_array()) config_error("'cycle' must be an array of 1-based mode indices");
    std::vector<int> c;
    for (const auto& e : j["cycle"]) {
      if (!e.is_number_integer()) config_error("'cycle' entries must be integers");
      c.push_back(e.get<int>());
    }
    try {
      cycle = Cycle::from_one_based(c);
    } catch (const Error& e) {
      config_error(std::string("cycle: ") + e.what());
    }
  }

  try {
    if (j.contains("continuous") && !j.contains("modes")) {
      const auto& c = j["continuous"];
      std::optional<double> t = t_override;
      if (!t && c.contains("T")) t = number(c["T"], "continuous.T");
      if (!t) config_error("continuous description requires the sampling period T");
      if (!(*t > 0.0)) config_error("sampling period T must be positive");
      auto d = discretize(continuous_modes_from_json(c), *t);
      return {std::move(d.system), std::move(d.nominal), cycle};
    }

    if (!j.contains("modes") || !j["modes"].is_array()) config_error("system: 'modes' array required");
    std::vector<ModePolytope> modes;
    for (std::size_t m = 0; m < j["modes"].size(); ++m) {
      const auto& jm = j["modes"][m];
      const std::string tag = "modes[" + std::to_string(m) + "]";
      if (!jm.contains("vertices") || !jm["vertices"].is_array()) config_error(tag + ": 'vertices' array required");
      std::vector<Vertex> vs;
      for (std::size_t l = 0; l < jm["vertices"].size(); ++l) {
        const auto& jv = jm["vertices"][l];
        const std::string vt = tag + ".vertices[" + std::to_string(l) + "]";
        if (!jv.contains("A") || !jv.contains("B")) config_error(vt + ": 'A' and 'B' required");
        vs.push_back({matrix_from_json(jv["A"], vt + ".A"), vector_from_json(jv["B"], vt + ".B")});
      }
      modes.emplace_back(std::move(vs));
    }
    SwitchedAffineSystem sys(std::move(modes));
    if (j.contains("n") && j["n"].get<long>() != sys.dim()) config_error("'n' disagrees with the matrices");

    std::vector<Vector> weights;
    if (j.contains("nominal_weights")) {
      for (std::size_t m = 0; m < j["nominal_weights"].size(); ++m)
        weights.push_back(vector_from_json(j["nominal_weights"][m], "nominal_weights"));
    } else {
      for (const auto& m : sys.modes())
        weights.push_back(Vector::Constant(static_cast<Eigen::Index>(m.size()), 1.0 / static_cast<double>(m.size())));
    }
    if (j.contains("nominal")) {
      std::vector<Matrix> a;
      std::vector<Vector> b;
      for (const auto& jn : j["nominal"]) {
        a.push_back(matrix_from_json(jn.at("A"), "nominal.A"));
        b.push_back(vector_from_json(jn.at("B"), "nominal.B"));
      }
      NominalSelection nom(sys, std::move(weights), std::move(a), std::move(b));
      return {std::move(sys), std::move(nom), cycle};
    }
    NominalSelection nom(sys, std::move(weights));
    return {std::move(sys), std::move(nom), cycle};
  } catch (const json::exception& e) {
    config_error(std::string("system description: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigError) throw;
    config_error(std::string("system description: ") + e.what());
  }
}

inline json system_to_json(const SwitchedAffineSystem& sys, const NominalSelection& nominal,
                           const std::optional<Cycle>& cycle = std::nullopt) {
  json j;
  j["n"] = sys.dim();
  j["modes"] = json::array();
  for (const auto& m : sys.modes()) {
    json vs = json::array();
    for (const auto& v : m.vertices()) vs.push_back({{"A", to_json(v.A)}, {"B", to_json(v.B)}});
    j["modes"].push_back({{"vertices", std::move(vs)}});
  }
  j["nominal_weights"] = json::array();
  j["nominal"] = json::array();
  for (std::size_t m = 0; m < nominal.num_modes(); ++m) {
    j["nominal_weights"].push_back(to_json(nominal.weights(m)));
    j["nominal"].push_back({{"A", to_json(nominal.A(m))}, {"B", to_json(nominal.B(m))}});
  }
  if (cycle) j["cycle"] = cycle->one_based();
  return j;
}

// ---------------------------------------------------------------------------
// Certificates
//   nominal: {"rho": [[...], ...], "P": [[[...]], ...], "mu": 0.25}
//   robust:  {"R": [[...]], "Q": [[...]], "gamma": 0.125, "margin": ...}
// Asymmetric P, R or Q are symmetrized by averaging on input.
// ---------------------------------------------------------------------------

struct NominalFile {
  std::optional<LimitCycle> limit_cycle;  // absent when the file carries no rho
  NominalCertificate cert;
};

inline json nominal_certificate_to_json(const LimitCycle& lc, const NominalCertificate& cert,
                                        const std::string& hash = {}) {
  json j;
  j["rho"] = json::array();
  for (const auto& r : lc.rho) j["rho"].push_back(to_json(r));
  j["P"] = json::array();
  for (const auto& p : cert.P) j["P"].push_back(to_json(p.matrix()));
  j["mu"] = cert.mu;
  if (!hash.empty()) j["config_hash"] = hash;
  return j;
}

inline NominalFile nominal_certificate_from_json(const json& j) {
  if (!j.is_object() || j.empty()) config_error("nominal certificate: empty or not an object");
  if (!j.contains("P") || !j["P"].is_array() || j["P"].empty()) config_error("nominal certificate: 'P' required");
  if (!j.contains("mu")) config_error("nominal certificate: 'mu' required");
  NominalFile f;
  for (const auto& p : j["P"]) f.cert.P.push_back(sym_from_json(p, "P"));
  f.cert.mu = number(j["mu"], "mu");
  if (j.contains("rho")) {
    LimitCycle lc;
    for (const auto& r : j["rho"]) lc.rho.push_back(vector_from_json(r, "rho"));
    if (lc.rho.size() != f.cert.P.size()) config_error("nominal certificate: rho and P lengths differ");
    f.limit_cycle = std::move(lc);
  }
  return f;
}

inline json robust_certificate_to_json(const RobustCertificate& c, const std::string& hash = {}) {
  json j;
  j["R"] = to_json(c.R.matrix());
  j["Q"] = to_json(c.Q.matrix());
  j["gamma"] = c.gamma;
  j["margin"] = c.margin;
  if (!hash.empty()) j["config_hash"] = hash;
  return j;
}

inline RobustCertificate robust_certificate_from_json(const json& j) {
  if (!j.is_object() || j.empty()) config_error("robust certificate: empty or not an object");
  for (const char* k : {"R", "Q", "gamma"})
    if (!j.contains(k)) config_error(std::string("robust certificate: '") + k + "' required");
  RobustCertificate c;
  c.R = sym_from_json(j["R"], "R");
  c.Q = sym_from_json(j["Q"], "Q");
  if (c.R.dim() != c.Q.dim()) config_error("robust certificate: R and Q dimensions differ");
  c.gamma = number(j["gamma"], "gamma");
  c.margin = j.contains("margin") ? number(j["margin"], "margin") : 0.0;
  return c;
}

// ---------------------------------------------------------------------------
// LMI export
//   {"num_vars": m, "blocks": [{"name": ..., "dim": d, "F0": [[...]], "F": [[[...]], ...]}]}
// Block b is F0 + sum_p y_p F[p]; every block is required positive definite.
// ---------------------------------------------------------------------------

inline json lmi_to_json(const LmiProblem& prob) {
  json j;
  j["num_vars"] = prob.num_vars();
  j["blocks"] = json::array();
  for (std::size_t b = 0; b < prob.num_blocks(); ++b) {
    json jb;
    jb["name"] = prob.block_names.empty() ? "block" + std::to_string(b) : prob.block_names[b];
    jb["dim"] = prob.block_dims[b];
    jb["F0"] = to_json(prob.constant[b]);
    jb["F"] = json::array();
    for (std::size_t p = 0; p < prob.num_vars(); ++p) jb["F"].push_back(to_json(prob.coefficient[p][b]));
    j["blocks"].push_back(std::move(jb));
  }
  return j;
}

inline LmiProblem lmi_from_json(const json& j) {
  LmiProblem prob;
  try {
    const auto m = j.at("num_vars").get<std::size_t>();
    prob.coefficient.resize(m);
    for (const auto& jb : j.at("blocks")) {
      prob.block_names.push_back(jb.value("name", std::string("block")));
      prob.constant.push_back(matrix_from_json(jb.at("F0"), "F0"));
      prob.block_dims.push_back(prob.constant.back().rows());
      if (jb.at("F").size() != m) config_error("LMI block coefficient count differs from num_vars");
      for (std::size_t p = 0; p < m; ++p) prob.coefficient[p].push_back(matrix_from_json(jb.at("F")[p], "F"));
    }
  } catch (const json::exception& e) {
    config_error(std::string("LMI file: ") + e.what());
  }
  prob.validate();
  return prob;
}

// ---------------------------------------------------------------------------
// Trace CSV: k, x1..xn, z1..zn, theta, vartheta, u, V, in_attractor,
// argmin_ok, w1..wL (active-mode vertex weights; blank on the final row).
// theta, vartheta and u are 1-based cycle positions.
// ---------------------------------------------------------------------------

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trace_csv(const Trace& tr) {
  std::ostringstream os;
  if (tr.records.empty()) return {};
  const auto n = tr.records.front().state.x.size();
  Eigen::Index wmax = 0;
  for (const auto& r : tr.records) wmax = std::max(wmax, r.weights.size());
  os << "k";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= n; ++i) os << ",z" << i;
  os << ",theta,vartheta,u,V,in_attractor,argmin_ok";
  for (Eigen::Index l = 1; l <= wmax; ++l) os << ",w" << l;
  os << "\n";
  for (const auto& r : tr.records) {
    os << r.k;
    for (Eigen::Index i = 0; i < n; ++i) os << "," << fmt17(r.state.x(i));
    for (Eigen::Index i = 0; i < n; ++i) os << "," << fmt17(r.state.z(i));
    os << "," << r.state.theta + 1 << "," << r.state.vartheta + 1 << "," << r.u + 1 << "," << fmt17(r.V) << ","
       << (r.in_attractor ? 1 : 0) << "," << (r.argmin_ok ? 1 : 0);
    for (Eigen::Index l = 0; l < wmax; ++l) {
      os << ",";
      if (l < r.weights.size()) os << fmt17(r.weights(l));
    }
    os << "\n";
  }
  return os.str();
}

/// k, V pairs (k starts at 0; plot on a log-scaled time axis with k + 1).
inline std::string v_history_csv(const Trace& tr) {
  std::ostringstream os;
  os << "k,V\n";
  for (const auto& r : tr.records) os << r.k << "," << fmt17(r.V) << "\n";
  return os.str();
}

inline json trace_metadata(const Trace& tr, const std::string& hash) {
  json j;
  j["seed"] = tr.seed;
  j["strategy"] = to_string(tr.strategy);
  j["sigma0"] = tr.sigma0 + 1;
  j["horizon"] = tr.records.empty() ? 0 : tr.records.size() - 1;
  j["config_hash"] = hash;
  const auto entry = tr.entry_step();
  j["entry_step"] = entry ? json(*entry) : json(nullptr);
  j["invariant_after_entry"] = tr.invariant_after_entry();
  return j;
}

inline json ellipsoids_to_json(const AttractorProjection& proj, const std::string& hash = {}) {
  json j;
  j["ellipsoids"] = json::array();
  for (std::size_t i = 0; i < proj.ellipsoids.size(); ++i) {
    const auto& e = proj.ellipsoids[i];
    json je;
    je["index"] = i + 1;
    je["center"] = to_json(e.center);
    je["shape"] = to_json(e.shape.matrix());
    je["boundary"] = json::array();
    for (const auto& p : ellipsoid_boundary(e)) je["boundary"].push_back(to_json(p));
    j["ellipsoids"].push_back(std::move(je));
  }
  j["pairwise_disjoint"] = proj.pairwise_disjoint;
  j["overlapping_pairs"] = json::array();
  for (const auto& [a, b] : proj.overlapping) j["overlapping_pairs"].push_back({a + 1, b + 1});
  if (!hash.empty()) j["config_hash"] = hash;
  return j;
}

}  // namespace sasrc::io
