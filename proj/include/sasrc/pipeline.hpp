#pragma once

// Command drivers behind the sasrc executable. Each command runs an ordered
// list of stages, records status, timing and margins per stage, and stops at
// the first failure.
//
// Run configuration (JSON):
// {
//   "system": {...} | "system_file": "sys.json",   relative paths resolve against the config file
//   "cycle": [1, 2],                               overrides the system's cycle
//   "T": 1.0,                                      overrides continuous.T
//   "mu": 0.25,                                    default 0.5 * max_mu
//   "gamma": 0.125 | "gamma_grid": [...],          default mu / 2
//   "simulation": {"x0": [...], "sigma0": 1, "horizon": 1000, "seed": 0,
//                  "strategy": "vertex-random", "batch": 1},
//   "certificates": {"nominal": "p.json", "robust": "rq.json"},
//   "tolerances": {"feas_tol": 1e-7, "var_bound": 1e4},
//   "invariance_samples": 1000,
//   "out": "out"
// }

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sasrc/io.hpp"

namespace sasrc::pipeline {

namespace fs = std::filesystem;
using io::json;

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::InvalidInput: return 2;
    case Errc::Diverged: return 4;
    default: return 3;
  }
}

/// Command-line values that replace the corresponding config entries.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> gamma;
  std::optional<double> mu;
  std::optional<double> t;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> batch;
  std::optional<std::string> strategy;
  std::optional<std::string> nominal_cert;
  std::optional<std::string> robust_cert;
};

struct RunConfig {
  json effective;  // config after overrides; hashed for provenance
  std::string hash;
  fs::path base_dir;

  json system;  // inline description (a referenced file is loaded into it)
  std::optional<std::vector<int>> cycle;
  std::optional<double> t;
  std::optional<double> mu;
  std::optional<double> gamma;
  std::vector<double> gamma_grid;

  std::optional<Vector> x0;
  std::optional<int> sigma0;  // 1-based mode
  std::size_t horizon = 1000;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::VertexRandom;
  std::size_t batch = 1;

  std::optional<std::string> nominal_cert_path;
  std::optional<std::string> robust_cert_path;
  std::size_t invariance_samples = 1000;
  LmiOptions lmi;
  fs::path out_dir = "out";

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }
};

namespace detail {

inline double unit_interval(const json& j, const char* key) {
  const double v = io::number(j, key);
  if (!(v > 0.0 && v < 1.0)) io::config_error(std::string(key) + " must lie in (0, 1)");
  return v;
}

inline void check_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) io::config_error(what + " '" + p.string() + "' does not exist");
}

}  // namespace detail

/// Applies overrides, validates, and loads any referenced system file.
inline RunConfig make_config(json j, const fs::path& base_dir, const Overrides& ov = {}) {
  if (!j.is_object()) io::config_error("configuration must be a JSON object");
  if (ov.out) j["out"] = *ov.out;
  if (ov.seed) j["simulation"]["seed"] = *ov.seed;
  if (ov.gamma) {
    j["gamma"] = *ov.gamma;
    j.erase("gamma_grid");
  }
  if (ov.mu) j["mu"] = *ov.mu;
  if (ov.t) j["T"] = *ov.t;
  if (ov.horizon) j["simulation"]["horizon"] = *ov.horizon;
  if (ov.batch) j["simulation"]["batch"] = *ov.batch;
  if (ov.strategy) j["simulation"]["strategy"] = *ov.strategy;
  // command-line paths are relative to the working directory, not the config
  if (ov.nominal_cert) j["certificates"]["nominal"] = fs::absolute(*ov.nominal_cert).string();
  if (ov.robust_cert) j["certificates"]["robust"] = fs::absolute(*ov.robust_cert).string();

  RunConfig c;
  c.effective = j;
  c.hash = io::config_hash(j);
  c.base_dir = base_dir;
  try {
    if (j.contains("system")) {
      c.system = j["system"];
    } else if (j.contains("system_file")) {
      const fs::path p = c.resolve(j["system_file"].get<std::string>());
      detail::check_file(p, "system file");
      c.system = io::read_json_file(p.string());
    }
    if (j.contains("cycle")) c.cycle = j["cycle"].get<std::vector<int>>();
    if (j.contains("T")) {
      c.t = io::number(j["T"], "T");
      if (!(*c.t > 0.0)) io::config_error("sampling period T must be positive");
    }
    if (j.contains("mu")) c.mu = detail::unit_interval(j["mu"], "mu");
    if (j.contains("gamma")) c.gamma = detail::unit_interval(j["gamma"], "gamma");
    if (j.contains("gamma_grid"))
      for (const auto& g : j["gamma_grid"]) c.gamma_grid.push_back(detail::unit_interval(g, "gamma_grid"));

    if (j.contains("simulation")) {
      const auto& s = j["simulation"];
      if (s.contains("x0")) c.x0 = io::vector_from_json(s["x0"], "simulation.x0");
      if (s.contains("sigma0")) c.sigma0 = s["sigma0"].get<int>();
      if (s.contains("horizon")) {
        const long h = s["horizon"].get<long>();
        if (h < 1) io::config_error("simulation.horizon must be >= 1");
        c.horizon = static_cast<std::size_t>(h);
      }
      if (s.contains("seed")) c.seed = s["seed"].get<std::uint64_t>();
      if (s.contains("strategy")) {
        try {
          c.strategy = parse_strategy(s["strategy"].get<std::string>());
        } catch (const Error& e) {
          io::config_error(e.what());
        }
      }
      if (s.contains("batch")) {
        const long b = s["batch"].get<long>();
        if (b < 1) io::config_error("simulation.batch must be >= 1");
        c.batch = static_cast<std::size_t>(b);
      }
    }
    if (j.contains("certificates")) {
      const auto& cs = j["certificates"];
      if (cs.contains("nominal")) {
        c.nominal_cert_path = c.resolve(cs["nominal"].get<std::string>()).string();
        detail::check_file(*c.nominal_cert_path, "nominal certificate");
      }
      if (cs.contains("robust")) {
        c.robust_cert_path = c.resolve(cs["robust"].get<std::string>()).string();
        detail::check_file(*c.robust_cert_path, "robust certificate");
      }
    }
    if (j.contains("tolerances")) {
      const auto& t = j["tolerances"];
      if (t.contains("feas_tol")) c.lmi.feas_tol = io::number(t["feas_tol"], "feas_tol");
      if (t.contains("var_bound")) c.lmi.var_bound = io::number(t["var_bound"], "var_bound");
      if (!(c.lmi.feas_tol > 0.0) || !(c.lmi.var_bound > 0.0)) io::config_error("tolerances must be positive");
    }
    if (j.contains("invariance_samples")) c.invariance_samples = j["invariance_samples"].get<std::size_t>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
  } catch (const json::exception& e) {
    io::config_error(std::string("configuration: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path, const Overrides& ov = {}) {
  json j = io::read_json_file(path);
  return make_config(std::move(j), fs::path(path).parent_path(), ov);
}

struct StageReport {
  std::string name;
  std::string status;  // ok | failed
  double seconds = 0.0;
  std::string message;
  json details = json::object();
};

struct PipelineReport {
  std::string command;
  std::string config_hash;
  std::vector<StageReport> stages;
  std::vector<std::string> artifacts;
  std::vector<std::string> warnings;
  int exit_code = 0;
  std::optional<std::string> error_code;

  bool ok() const { return exit_code == 0; }

  const StageReport* stage(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }

  json to_json() const {
    json j;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["exit_code"] = exit_code;
    j["error"] = error_code ? json(*error_code) : json(nullptr);
    j["stages"] = json::array();
    for (const auto& s : stages)
      j["stages"].push_back(
          {{"name", s.name}, {"status", s.status}, {"seconds", s.seconds}, {"message", s.message}, {"details", s.details}});
    j["artifacts"] = artifacts;
    j["warnings"] = warnings;
    return j;
  }
};

/// Shared state of one command invocation.
class Run {
 public:
  Run(const RunConfig& cfg, std::string command) : cfg_(cfg) {
    report_.command = std::move(command);
    report_.config_hash = cfg.hash;
  }

  /// Runs `fn` as a named stage. Returns false (and records the failure)
  /// if it throws; later stages must then be skipped.
  bool stage(const std::string& name, const std::function<void(StageReport&)>& fn) {
    if (!report_.ok()) return false;
    StageReport s;
    s.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(s);
      s.status = "ok";
    } catch (const InfeasibleError& e) {
      s.status = "failed";
      s.message = e.what();
      s.details["best_margin"] = e.best_margin();
      fail_with(e.code());
    } catch (const DivergedError& e) {
      s.status = "failed";
      s.message = e.what();
      s.details["step"] = e.step();
      fail_with(e.code());
    } catch (const Error& e) {
      s.status = "failed";
      s.message = e.what();
      fail_with(e.code());
    } catch (const json::exception& e) {
      s.status = "failed";
      s.message = std::string("ConfigError: ") + e.what();
      fail_with(Errc::ConfigError);
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report_.stages.push_back(std::move(s));
    return report_.ok();
  }

  void fail_with(Errc code) {
    report_.exit_code = exit_code_for(code);
    report_.error_code = to_string(code);
  }

  fs::path artifact_path(const std::string& file) {
    std::error_code ec;
    fs::create_directories(cfg_.out_dir, ec);
    if (ec) io::config_error("cannot create output directory '" + cfg_.out_dir.string() + "'");
    return cfg_.out_dir / file;
  }

  void write_json(const std::string& file, const json& j) {
    const fs::path p = artifact_path(file);
    io::write_json_file(p.string(), j);
    report_.artifacts.push_back(p.string());
  }

  void write_text(const std::string& file, const std::string& text) {
    const fs::path p = artifact_path(file);
    io::write_text_file(p.string(), text);
    report_.artifacts.push_back(p.string());
  }

  /// Writes <command>_report.json when the output directory is usable.
  PipelineReport finish() {
    try {
      const fs::path p = artifact_path(report_.command + "_report.json");
      report_.artifacts.push_back(p.string());
      io::write_json_file(p.string(), report_.to_json());
    } catch (const Error&) {
      report_.warnings.push_back("report could not be written to '" + cfg_.out_dir.string() + "'");
    }
    return report_;
  }

  const RunConfig& cfg_;
  PipelineReport report_;

  std::optional<io::SystemDescription> sys;
  std::optional<Cycle> cycle;
  std::optional<LimitCycle> lc;
  std::optional<NominalCertificate> ncert;
  std::optional<RobustCertificate> rcert;
  bool nominal_synthesized = false;

  // ---- stages shared by several commands ----

  bool load_system() {
    return stage("load_system", [&](StageReport& s) {
      if (cfg_.system.is_null()) io::config_error("no system description ('system' or 'system_file')");
      sys = io::system_from_json(cfg_.system, cfg_.t);
      if (cfg_.cycle) {
        try {
          cycle = Cycle::from_one_based(*cfg_.cycle);
        } catch (const Error& e) {
          io::config_error(std::string("cycle: ") + e.what());
        }
      } else if (sys->cycle) {
        cycle = sys->cycle;
      } else {
        io::config_error("no cycle given");
      }
      try {
        cycle->check_against(sys->system);
      } catch (const Error& e) {
        io::config_error(e.what());
      }
      s.details["n"] = sys->system.dim();
      s.details["modes"] = sys->system.num_modes();
      s.details["cycle"] = cycle->one_based();
    });
  }

  bool limit_cycle_stages() {
    if (!stage("monodromy", [&](StageReport& s) {
          const auto mono = monodromy(sys->nominal, *cycle);
          s.details["spectral_radius"] = mono.spectral_radius;
          s.details["phi"] = io::to_json(mono.phi);
          s.details["max_mu"] = mono.schur_stable ? json(max_mu(sys->nominal, *cycle)) : json(nullptr);
          if (!mono.schur_stable)
            fail(Errc::NotSchurStable, "monodromy spectral radius " + io::fmt17(mono.spectral_radius) + " >= 1");
        }))
      return false;
    return stage("limit_cycle", [&](StageReport& s) {
      lc = compute_limit_cycle(sys->nominal, *cycle);
      s.details["residual"] = lc->residual;
      s.details["rho"] = json::array();
      for (const auto& r : lc->rho) s.details["rho"].push_back(io::to_json(r));
    });
  }

  bool nominal_stage() {
    return stage("nominal_certificate", [&](StageReport& s) {
      if (cfg_.nominal_cert_path) {
        ncert = io::nominal_certificate_from_json(io::read_json_file(*cfg_.nominal_cert_path)).cert;
        s.details["source"] = *cfg_.nominal_cert_path;
      } else {
        const double mu = cfg_.mu ? *cfg_.mu : 0.5 * max_mu(sys->nominal, *cycle);
        ncert = synthesize_nominal_certificate(sys->nominal, *cycle, mu);
        nominal_synthesized = true;
        s.details["source"] = "synthesized";
      }
      const auto rep = verify_nominal_certificate(*ncert, sys->nominal, *cycle);
      s.details["mu"] = ncert->mu;
      s.details["p_min_eig"] = rep.p_min_eig;
      s.details["decay_min_eig"] = rep.decay_min_eig;
      s.details["min_margin"] = rep.min_margin;
      if (!rep.valid) throw InfeasibleError("nominal certificate does not verify", rep.min_margin);
    });
  }

  bool robust_stage() {
    return stage("robust_certificate", [&](StageReport& s) {
      if (nominal_synthesized && !cfg_.robust_cert_path) {
        // Pick the scale of the synthesized {P_i} that suits the robust conditions.
        const double g = cfg_.gamma ? *cfg_.gamma
                         : cfg_.gamma_grid.empty() ? 0.5 * ncert->mu
                                                   : cfg_.gamma_grid[cfg_.gamma_grid.size() / 2];
        auto scaled = synthesize_scaled_certificates(sys->system, sys->nominal, *cycle, *lc, ncert->mu, g, cfg_.lmi);
        ncert = scaled.nominal_cert;
        s.details["nominal_scale"] = scaled.scale;
        json tried = json::array();
        for (const auto& [sc, m] : scaled.tried) tried.push_back({{"scale", sc}, {"margin", m}});
        s.details["scales_tried"] = tried;
        if (cfg_.gamma_grid.empty()) rcert = scaled.robust.cert;
      }
      const RobustContext ctx{sys->system, sys->nominal, *cycle, *lc, *ncert};
      if (rcert) {
        s.details["source"] = "synthesized";
      } else if (cfg_.robust_cert_path) {
        rcert = io::robust_certificate_from_json(io::read_json_file(*cfg_.robust_cert_path));
        s.details["source"] = *cfg_.robust_cert_path;
      } else if (!cfg_.gamma_grid.empty()) {
        const auto sweep = gamma_sweep(ctx, cfg_.gamma_grid, cfg_.lmi);
        s.details["sweep"] = json::array();
        for (const auto& r : sweep.rows)
          s.details["sweep"].push_back({{"gamma", r.gamma}, {"feasible", r.feasible}, {"margin", r.margin}});
        s.details["contiguous"] = sweep.contiguous;
        if (!sweep.best_gamma) {
          double best = -std::numeric_limits<double>::infinity();
          for (const auto& r : sweep.rows) best = std::max(best, r.margin);
          throw InfeasibleError("no feasible gamma on the grid", best);
        }
        for (const auto& r : sweep.rows)
          if (r.gamma == *sweep.best_gamma) rcert = r.cert;
        s.details["source"] = "sweep";
      } else {
        const double gamma = cfg_.gamma ? *cfg_.gamma : 0.5 * ncert->mu;
        const auto res = synthesize_robust_certificate(ctx, gamma, cfg_.lmi);
        rcert = res.cert;
        s.details["source"] = "synthesized";
        s.details["solver_margin"] = res.lmi.margin;
        s.details["newton_steps"] = res.lmi.newton_steps;
      }
      const auto rep = verify_robust_certificate(ctx, *rcert);
      rcert->margin = rep.min_margin;
      s.details["gamma"] = rcert->gamma;
      s.details["min_margin"] = rep.min_margin;
      s.details["r_min_eig"] = rep.r_min_eig;
      s.details["q_min_eig"] = rep.q_min_eig;
      json blocks = json::object();
      for (const auto& b : rep.blocks) blocks[b.name] = b.min_eig;
      s.details["blocks"] = blocks;
      if (!rep.valid) throw InfeasibleError("robust certificate does not verify", rep.min_margin);
    });
  }

  bool certificate_stages() {
    return load_system() && limit_cycle_stages() && nominal_stage() && robust_stage();
  }

  SimulationSetup setup() const { return {sys->system, sys->nominal, *cycle, *lc, *ncert, *rcert}; }
};

// ---------------------------------------------------------------------------

inline PipelineReport cmd_discretize(const RunConfig& cfg) {
  Run run(cfg, "discretize");
  run.stage("discretize", [&](StageReport& s) {
    if (cfg.system.is_null() || !cfg.system.contains("continuous"))
      io::config_error("discretize needs a continuous system description");
    const auto& c = cfg.system["continuous"];
    if (!cfg.t && !c.contains("T")) io::config_error("discretize needs the sampling period T");
    const double t = cfg.t ? *cfg.t : io::number(c["T"], "continuous.T");
    if (!(t > 0.0)) io::config_error("sampling period T must be positive");
    const auto modes = io::continuous_modes_from_json(c);
    for (std::size_t j = 0; j < modes.size(); ++j)
      if (modes[j].bound == 0.0)
        run.report_.warnings.push_back("mode " + std::to_string(j + 1) + " has a zero uncertainty bound; its vertices coincide");
    const auto d = discretize(modes, t);
    std::optional<Cycle> cycle;
    if (cfg.cycle) cycle = Cycle::from_one_based(*cfg.cycle);
    else if (cfg.system.contains("cycle")) cycle = Cycle::from_one_based(cfg.system["cycle"].get<std::vector<int>>());
    json out = io::system_to_json(d.system, d.nominal, cycle);
    out["T"] = t;
    out["config_hash"] = cfg.hash;
    run.write_json("system.json", out);
    s.details["T"] = t;
    s.details["modes"] = d.system.num_modes();
    s.details["vertices_per_mode"] = d.system.mode(0).size();
  });
  return run.finish();
}

inline PipelineReport cmd_certify(const RunConfig& cfg) {
  Run run(cfg, "certify");
  if (!run.certificate_stages()) return run.finish();

  run.stage("write_certificates", [&](StageReport&) {
    json sys = io::system_to_json(run.sys->system, run.sys->nominal, run.cycle);
    sys["config_hash"] = cfg.hash;
    run.write_json("system.json", sys);
    run.write_json("nominal_certificate.json", io::nominal_certificate_to_json(*run.lc, *run.ncert, cfg.hash));
    run.write_json("robust_certificate.json", io::robust_certificate_to_json(*run.rcert, cfg.hash));
    const RobustContext ctx{run.sys->system, run.sys->nominal, *run.cycle, *run.lc, *run.ncert};
    json lmi = io::lmi_to_json(assemble_robust_lmi(ctx, run.rcert->gamma));
    lmi["config_hash"] = cfg.hash;
    run.write_json("lmi.json", lmi);
  });

  // Read the written files back and check them from scratch.
  run.stage("reverify", [&](StageReport& s) {
    const auto dir = cfg.out_dir;
    const auto nf = io::nominal_certificate_from_json(io::read_json_file((dir / "nominal_certificate.json").string()));
    const auto rc = io::robust_certificate_from_json(io::read_json_file((dir / "robust_certificate.json").string()));
    const auto nrep = verify_nominal_certificate(nf.cert, run.sys->nominal, *run.cycle);
    const RobustContext ctx{run.sys->system, run.sys->nominal, *run.cycle, *run.lc, nf.cert};
    const auto rrep = verify_robust_certificate(ctx, rc);
    s.details["nominal_margin"] = nrep.min_margin;
    s.details["robust_margin"] = rrep.min_margin;
    if (!nrep.valid || !rrep.valid)
      throw InfeasibleError("written certificates fail re-verification", std::min(nrep.min_margin, rrep.min_margin));
  });

  run.stage("invariance_mc", [&](StageReport& s) {
    const auto rep = check_robust_invariance_mc(run.setup(), cfg.invariance_samples, cfg.seed);
    s.details["samples"] = rep.requested;
    s.details["accepted"] = rep.accepted;
    s.details["max_v_next"] = rep.max_v_next;
    s.details["pass"] = rep.pass;
    if (rep.vacuous) run.report_.warnings.push_back("invariance check skipped (0 samples)");
    if (!rep.pass) throw InfeasibleError("sampled state left the attractor", 1.0 - rep.max_v_next);
  });
  return run.finish();
}

/// Pure re-verification. With `coupling_only`, only the sampling-period-free
/// coupling blocks are checked and no system is needed.
inline PipelineReport cmd_verify(const RunConfig& cfg, bool coupling_only) {
  Run run(cfg, "verify");
  std::optional<io::NominalFile> nf;
  std::optional<RobustCertificate> rc;
  if (!run.stage("load_certificates", [&](StageReport& s) {
        if (!cfg.nominal_cert_path) io::config_error("no nominal certificate given");
        nf = io::nominal_certificate_from_json(io::read_json_file(*cfg.nominal_cert_path));
        if (cfg.robust_cert_path) rc = io::robust_certificate_from_json(io::read_json_file(*cfg.robust_cert_path));
        else if (coupling_only) io::config_error("coupling-only verification needs a robust certificate");
        s.details["positions"] = nf->cert.P.size();
      }))
    return run.finish();

  if (coupling_only) {
    run.stage("coupling_blocks", [&](StageReport& s) {
      const auto rep = verify_coupling_blocks(nf->cert, *rc);
      json blocks = json::object();
      for (const auto& b : rep.blocks) blocks[b.name] = b.min_eig;
      s.details["blocks"] = blocks;
      s.details["min_margin"] = rep.min_margin;
      if (!rep.valid) throw InfeasibleError("coupling blocks are not positive definite", rep.min_margin);
    });
    return run.finish();
  }

  if (!run.load_system() || !run.limit_cycle_stages()) return run.finish();
  run.ncert = nf->cert;
  if (nf->limit_cycle) {
    double diff = 0.0;
    for (std::size_t i = 0; i < std::min(nf->limit_cycle->rho.size(), run.lc->rho.size()); ++i)
      if (nf->limit_cycle->rho[i].size() == run.lc->rho[i].size())
        diff = std::max(diff, (nf->limit_cycle->rho[i] - run.lc->rho[i]).cwiseAbs().maxCoeff());
    if (diff > 1e-6) run.report_.warnings.push_back("certificate rho differs from the computed limit cycle by " + io::fmt17(diff));
  }
  run.stage("nominal_certificate", [&](StageReport& s) {
    const auto rep = verify_nominal_certificate(*run.ncert, run.sys->nominal, *run.cycle);
    s.details["mu"] = run.ncert->mu;
    s.details["p_min_eig"] = rep.p_min_eig;
    s.details["decay_min_eig"] = rep.decay_min_eig;
    s.details["min_margin"] = rep.min_margin;
    if (!rep.valid) throw InfeasibleError("nominal certificate is invalid", rep.min_margin);
  });
  if (rc)
    run.stage("robust_certificate", [&](StageReport& s) {
      const RobustContext ctx{run.sys->system, run.sys->nominal, *run.cycle, *run.lc, *run.ncert};
      const auto rep = verify_robust_certificate(ctx, *rc);
      json blocks = json::object();
      for (const auto& b : rep.blocks) blocks[b.name] = b.min_eig;
      s.details["blocks"] = blocks;
      s.details["r_min_eig"] = rep.r_min_eig;
      s.details["q_min_eig"] = rep.q_min_eig;
      s.details["min_margin"] = rep.min_margin;
      if (!rep.valid) throw InfeasibleError("robust certificate is invalid", rep.min_margin);
    });
  return run.finish();
}

inline PipelineReport cmd_simulate(const RunConfig& cfg) {
  Run run(cfg, "simulate");
  if (!run.certificate_stages()) return run.finish();
  run.stage("simulate", [&](StageReport& s) {
    if (!cfg.x0) io::config_error("simulation.x0 is required");
    std::optional<int> sigma0;
    if (cfg.sigma0) sigma0 = *cfg.sigma0 - 1;
    const auto su = run.setup();
    bool all_invariant = true;
    s.details["runs"] = json::array();
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const std::uint64_t seed = cfg.seed + b;
      const Trace tr = simulate(su, *cfg.x0, sigma0, cfg.horizon, seed, cfg.strategy);
      const std::string stem = cfg.batch == 1 ? "trace" : "trace_" + std::to_string(seed);
      run.write_text(stem + ".csv", io::trace_csv(tr));
      run.write_json(stem + ".meta.json", io::trace_metadata(tr, cfg.hash));
      if (b == 0) run.write_text("v_history.csv", io::v_history_csv(tr));
      const auto entry = tr.entry_step();
      const bool inv = tr.invariant_after_entry();
      all_invariant = all_invariant && inv;
      s.details["runs"].push_back({{"seed", seed},
                                   {"sigma0", tr.sigma0 + 1},
                                   {"entry_step", entry ? json(*entry) : json(nullptr)},
                                   {"invariant_after_entry", inv},
                                   {"V_initial", tr.records.front().V},
                                   {"V_final", tr.records.back().V}});
    }
    s.details["all_invariant"] = all_invariant;
    if (!all_invariant) throw InfeasibleError("a trace left the attractor after entering it", 0.0);
  });
  run.stage("project", [&](StageReport& s) {
    const auto proj = attractor_projection(*run.lc, *run.ncert, *run.rcert);
    run.write_json("ellipsoids.json", io::ellipsoids_to_json(proj, cfg.hash));
    s.details["pairwise_disjoint"] = proj.pairwise_disjoint;
  });
  return run.finish();
}

inline PipelineReport cmd_project(const RunConfig& cfg) {
  Run run(cfg, "project");
  if (!run.certificate_stages()) return run.finish();
  run.stage("project", [&](StageReport& s) {
    const auto proj = attractor_projection(*run.lc, *run.ncert, *run.rcert);
    run.write_json("ellipsoids.json", io::ellipsoids_to_json(proj, cfg.hash));
    s.details["pairwise_disjoint"] = proj.pairwise_disjoint;
    json seps = json::array();
    for (std::size_t i = 0; i < proj.ellipsoids.size(); ++i)
      for (std::size_t j = i + 1; j < proj.ellipsoids.size(); ++j)
        seps.push_back({{"pair", {i + 1, j + 1}}, {"separation", ellipsoid_separation(proj.ellipsoids[i], proj.ellipsoids[j])}});
    s.details["separations"] = seps;
  });
  return run.finish();
}

}  // namespace sasrc::pipeline
