// hybridlab: validate scenarios, simulate paths, estimate measures, run suites.
//
// Exit status: 0 pass, 1 suite failure, 2 config error, 3 runtime error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hybridlab/config.hpp"
#include "hybridlab/experiments.hpp"
#include "hybridlab/measure.hpp"
#include "hybridlab/parallel.hpp"
#include "hybridlab/simulate.hpp"

namespace hl = hybridlab;

namespace {

enum Exit { kPass = 0, kSuiteFail = 1, kConfigError = 2, kRuntimeError = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::size_t> atom_cap;
  std::optional<int> dt_per_rho;
  std::vector<std::string> suites;
  std::uint64_t path = 0;
  std::optional<double> t_end;
  std::string measure_kind = "ensemble";
};

hl::ScenarioConfig load(const Options& o) {
  hl::ConfigOverrides ov;
  ov.seed = o.seed;
  ov.output_dir = o.out;
  ov.atom_cap = o.atom_cap;
  ov.dt_per_rho = o.dt_per_rho;
  return hl::parse_config(o.config, ov);
}

std::string to_text(const hl::ScenarioConfig& cfg) {
  std::ostringstream os;
  os << "scenario " << cfg.scenario << ": " << cfg.generator.n_states() << " mode(s), dim "
     << cfg.model.dim << ", rho " << cfg.model.rho() << ", dt " << cfg.sim.dt << ", seed "
     << cfg.sim.seed << "\n";
  const auto& cert = cfg.provenance["certificate"];
  if (cert["certified"].is_boolean()) {
    os << "  dissipativity: " << (cert["certified"].get<bool>() ? "certified" : "not certified")
       << ", beta = " << hl::format_double(cert["beta"].get<double>()) << "\n";
  } else {
    os << "  dissipativity: no linear certificate (nonlinear drift)\n";
  }
  os << "  suites:";
  for (const auto& s : cfg.suites) os << " " << s;
  os << "\n";
  return os.str();
}

int cmd_validate(const Options& o) {
  const auto cfg = load(o);
  std::cout << to_text(cfg);
  return kPass;
}

int cmd_simulate(const Options& o) {
  const auto cfg = load(o);
  const auto& m = cfg.model;
  const double s = cfg.times.s;
  const double t_end = o.t_end.value_or(s + cfg.times.stability_times.back());
  const auto xi = hl::detail::initial_for(cfg, 0, m.rho(), cfg.sim.dt);
  const auto tr = hl::integrate(m, s, xi, cfg.initial_mode, t_end, cfg.sim, o.path);
  const auto dir = std::filesystem::path(cfg.output_dir) / cfg.scenario;
  std::ostringstream traj, modes;
  hl::write_trajectory_csv(traj, tr);
  hl::write_mode_path_csv(modes, tr.mode_path);
  hl::write_file_atomic(dir / "trajectory.csv", traj.str());
  hl::write_file_atomic(dir / "mode_path.csv", modes.str());
  std::cout << "wrote " << (dir / "trajectory.csv").string() << " (" << tr.size() - tr.origin
            << " points, " << tr.mode_path.jump_count() << " mode jumps)\n";
  return kPass;
}

int cmd_measure(const Options& o) {
  const auto cfg = load(o);
  const auto& m = cfg.model;
  const double t = cfg.times.t;
  const auto xi = hl::detail::initial_for(cfg, 0, m.rho(), cfg.sim.dt);
  hl::SimConfig sc = cfg.sim;
  sc.seed = hl::derive_seed(cfg.sim.seed, "measure/" + o.measure_kind);
  hl::EmpiricalMeasure mu;
  if (o.measure_kind == "ensemble") {
    mu = hl::ensemble_at(m, t - cfg.times.T_burn, xi, cfg.initial_mode, t, cfg.samples.M, sc);
  } else if (o.measure_kind == "kb") {
    mu = hl::kb_average(m, xi, cfg.initial_mode, t, cfg.times.lookbacks.back(), cfg.samples.starts,
                        cfg.samples.paths_per_start, sc);
  } else {
    std::cerr << "unknown measure kind '" << o.measure_kind << "' (ensemble or kb)\n";
    return kConfigError;
  }
  const auto dir = std::filesystem::path(cfg.output_dir) / cfg.scenario;
  std::ostringstream os;
  hl::write_measure_csv(os, mu);
  const auto file = dir / ("measure_" + o.measure_kind + ".csv");
  hl::write_file_atomic(file, os.str());
  std::cout << "wrote " << file.string() << " (" << mu.size() << " atoms)\n";
  return kPass;
}

int cmd_suite(const Options& o) {
  const auto cfg = load(o);
  const std::vector<std::string> names = o.suites.empty() ? cfg.suites : o.suites;
  for (const auto& n : names) {
    const auto& known = hl::known_suites();
    if (std::find(known.begin(), known.end(), n) == known.end()) {
      std::cerr << "ValidationError: suites: unknown suite '" << n << "'\n";
      return kConfigError;
    }
  }
  std::vector<hl::ExperimentReport> reports;
  for (const auto& n : names) {
    reports.push_back(hl::run_suite(cfg, n));
    const auto& rep = reports.back();
    std::cout << rep.suite << ": " << (rep.passed() ? "PASS" : "FAIL") << " (eps_stat "
              << hl::format_double(rep.eps_stat) << ", " << rep.rows.size() << " rows)\n";
  }
  const auto dir = hl::write_outputs(cfg, reports, cfg.output_dir);
  std::cout << "wrote " << dir.string() << "\n";
  for (const auto& rep : reports) {
    if (const auto* row = rep.first_failure()) {
      std::cerr << "FAIL " << hl::describe(rep, *row) << "\n";
      return kSuiteFail;
    }
  }
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid switching delay SDE laboratory"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Scenario JSON file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Master seed override");
  app.add_option("--out", o.out, "Output directory override");
  app.add_option("--threads", o.threads, "Worker thread cap (0 = all cores)");
  app.add_option("--atom-cap", o.atom_cap, "Atom cap for bounded-Lipschitz distances")
      ->check(CLI::PositiveNumber);
  app.add_option("--dt-per-rho", o.dt_per_rho, "Integrator steps per delay bound rho")
      ->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Parse a scenario and run the cheap checks");
  auto* simulate = app.add_subcommand("simulate", "Write one trajectory and its mode path");
  simulate->add_option("--path", o.path, "Path index (selects the random stream)");
  simulate->add_option("--t-end", o.t_end, "Final time");
  auto* measure = app.add_subcommand("measure", "Write an empirical measure atom table");
  measure->add_option("--kind", o.measure_kind, "ensemble or kb");
  auto* suite = app.add_subcommand("suite", "Run scenario suites and write CSV + verdict.json");
  suite->add_option("--suite", o.suites, "Suite name (repeatable); default from the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigError;
  }
  if (o.config.empty()) {
    std::cerr << "--config is required\n";
    return kConfigError;
  }
  if (o.threads) hl::set_max_threads(*o.threads);

  // Config problems are detected before any simulation starts.
  try {
    load(o);
  } catch (const hl::Error& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "ValidationError: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*simulate) return cmd_simulate(o);
    if (*measure) return cmd_measure(o);
    if (*suite) return cmd_suite(o);
  } catch (const hl::BlowupError& e) {
    std::cerr << "Blowup at t = " << hl::format_double(e.time()) << ", path " << e.path() << ": "
              << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}
