// sasrc: certify, verify and simulate switched affine systems with a
// one-step input delay under polytopic uncertainty.
//
// Exit codes: 0 success, 2 configuration error, 3 infeasible or invalid,
// 4 diverged simulation.

#include <iostream>

#include "CLI11.hpp"
#include "sasrc/pipeline.hpp"

namespace {

using namespace sasrc;
using namespace sasrc::pipeline;

struct Args {
  std::string config;
  Overrides ov;
  bool coupling_only = false;
};

template <class T>
void opt(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

void common_flags(CLI::App* app, Args& a, bool config_required) {
  auto* c = app->add_option("--config", a.config, "run configuration (JSON)");
  if (config_required) c->required();
  opt(app, "--out", a.ov.out, "output directory");
  opt(app, "--seed", a.ov.seed, "base seed for sampling and simulation");
  opt(app, "--gamma", a.ov.gamma, "decay parameter of the robust certificate");
  opt(app, "--mu", a.ov.mu, "decay rate of the nominal certificate");
  opt(app, "--T", a.ov.t, "sampling period for continuous descriptions");
  opt(app, "--horizon", a.ov.horizon, "simulation steps");
  opt(app, "--strategy", a.ov.strategy, "vertex-random | dirichlet-uniform | nominal");
  opt(app, "--nominal-cert", a.ov.nominal_cert, "nominal certificate file {rho, P, mu}");
  opt(app, "--robust-cert", a.ov.robust_cert, "robust certificate file {R, Q, gamma}");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust limit-cycle certification for delayed switched affine systems"};
  app.require_subcommand(1);
  Args a;

  auto* disc = app.add_subcommand("discretize", "sample a continuous description into vertex form");
  common_flags(disc, a, true);
  auto* cert = app.add_subcommand("certify", "limit cycle, nominal and robust certificates, re-verification");
  common_flags(cert, a, true);
  auto* ver = app.add_subcommand("verify", "re-verify certificate files without synthesis");
  common_flags(ver, a, false);
  ver->add_flag("--coupling-only", a.coupling_only, "check only the sampling-period-free coupling blocks");
  auto* sim = app.add_subcommand("simulate", "closed-loop traces, V history and ellipsoids");
  common_flags(sim, a, true);
  opt(sim, "--seeds", a.ov.batch, "number of consecutive seeds to simulate");
  auto* proj = app.add_subcommand("project", "attractor ellipsoids and their disjointness");
  common_flags(proj, a, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = a.config.empty() ? make_config(json::object(), fs::current_path(), a.ov)
                                           : load_config(a.config, a.ov);
    PipelineReport rep;
    if (*disc) rep = cmd_discretize(cfg);
    else if (*cert) rep = cmd_certify(cfg);
    else if (*ver) rep = cmd_verify(cfg, a.coupling_only);
    else if (*sim) rep = cmd_simulate(cfg);
    else rep = cmd_project(cfg);

    std::cout << rep.to_json().dump(2) << "\n";
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& s : rep.stages)
      if (s.status != "ok") std::cerr << "stage '" << s.name << "' failed: " << s.message << "\n";
    return rep.exit_code;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.code());
  }
}
