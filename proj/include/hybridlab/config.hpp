#pragma once

// JSON scenario files -> ScenarioConfig. Cheap assumption checks run here and
// their results land in the provenance block.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "hybridlab/error.hpp"
#include "hybridlab/experiments.hpp"
#include "hybridlab/model.hpp"
#include "hybridlab/rng.hpp"
#include "hybridlab/switching.hpp"

namespace hybridlab {

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> atom_cap;
  std::optional<int> dt_per_rho;
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::ValidationError, field + ": " + what);
}

inline const json* find(const json& obj, const char* key) {
  if (!obj.is_object()) return nullptr;
  const auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline const json& require(const json& obj, const char* key, const std::string& field) {
  const json* v = find(obj, key);
  if (!v) invalid(field, "missing");
  return *v;
}

inline double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) invalid(field, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) invalid(field, "must be finite");
  return d;
}

inline double number_or(const json& obj, const char* key, double fallback, const std::string& field) {
  const json* v = find(obj, key);
  return v ? as_number(*v, field) : fallback;
}

inline std::size_t count_or(const json& obj, const char* key, std::size_t fallback,
                            const std::string& field) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer() || v->get<long long>() < 1) invalid(field, "must be an integer >= 1");
  return v->get<std::size_t>();
}

inline std::string string_or(const json& obj, const char* key, const std::string& fallback,
                             const std::string& field) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) invalid(field, "expected a string");
  return v->get<std::string>();
}

inline std::vector<double> numbers(const json& v, const std::string& field) {
  if (v.is_number()) return {as_number(v, field)};
  if (!v.is_array()) invalid(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_number(v[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline Eigen::VectorXd vector_of(const json& v, int n, const std::string& field) {
  const auto xs = numbers(v, field);
  if (static_cast<int>(xs.size()) != n) {
    invalid(field, "expected length " + std::to_string(n) + ", got " + std::to_string(xs.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), n);
}

// A plain number is accepted for 1 x 1 matrices.
inline Eigen::MatrixXd matrix_of(const json& v, int rows, int cols, const std::string& field) {
  if (v.is_number() && rows == 1 && cols == 1) {
    return Eigen::MatrixXd::Constant(1, 1, as_number(v, field));
  }
  if (!v.is_array() || static_cast<int>(v.size()) != rows) {
    invalid(field, "expected " + std::to_string(rows) + " x " + std::to_string(cols) + " matrix");
  }
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto row = numbers(v[static_cast<std::size_t>(r)], field + "[" + std::to_string(r) + "]");
    if (static_cast<int>(row.size()) != cols) {
      invalid(field, "row " + std::to_string(r) + " needs " + std::to_string(cols) + " entries");
    }
    for (int c = 0; c < cols; ++c) out(r, c) = row[static_cast<std::size_t>(c)];
  }
  return out;
}

inline std::vector<Eigen::MatrixXd> per_mode(const json& v, int modes, int rows, int cols,
                                             const std::string& field) {
  if (!v.is_array() || static_cast<int>(v.size()) != modes) {
    invalid(field, "expected one matrix per mode (" + std::to_string(modes) + ")");
  }
  std::vector<Eigen::MatrixXd> out;
  for (int j = 0; j < modes; ++j) {
    out.push_back(matrix_of(v[static_cast<std::size_t>(j)], rows, cols,
                            field + "[" + std::to_string(j) + "]"));
  }
  return out;
}

inline Generator parse_generator(const json& model) {
  const json* g = find(model, "generator");
  if (!g) invalid("generator", "missing");
  if (!g->is_array() || g->empty()) invalid("generator", "expected a square matrix");
  const int n = static_cast<int>(g->size());
  Generator gen;
  gen.rates = matrix_of(*g, n, n, "generator");
  try {
    validate_generator(gen);
    stationary_distribution(gen);
  } catch (const Error& e) {
    invalid("generator", e.what());
  }
  return gen;
}

inline DelaySpec parse_delay(const json& d, const std::string& field) {
  const std::string kind = string_or(d, "kind", "none", field + ".kind");
  try {
    if (kind == "none") return DelaySpec::none();
    const double rho = as_number(require(d, "rho", field + ".rho"), field + ".rho");
    if (kind == "constant") return DelaySpec::constant(rho);
    if (kind == "sawtooth") return DelaySpec::sawtooth(rho);
    if (kind == "tabulated") {
      const double period = as_number(require(d, "period", field + ".period"), field + ".period");
      const json& knots = require(d, "knots", field + ".knots");
      if (!knots.is_array()) invalid(field + ".knots", "expected [[time, lag], ...]");
      std::vector<double> ts, vs;
      for (std::size_t i = 0; i < knots.size(); ++i) {
        const auto kv = numbers(knots[i], field + ".knots[" + std::to_string(i) + "]");
        if (kv.size() != 2) invalid(field + ".knots", "each knot is [time, lag]");
        ts.push_back(kv[0]);
        vs.push_back(kv[1]);
      }
      return DelaySpec::tabulated(rho, period, ts, vs);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ValidationError) throw;
    invalid(field, e.what());
  }
  invalid(field + ".kind", "unknown delay kind '" + kind + "'");
}

struct ParsedCoefficients {
  LinearCoefficients lin;
  bool linear_drift = true;
  std::string named;
};

inline ParsedCoefficients parse_coefficients(const json& model, int dim, int noise_dim, int modes) {
  ParsedCoefficients pc;
  const json& drift = require(model, "drift", "model.drift");
  const std::string type = string_or(drift, "type", "linear", "model.drift.type");
  if (type == "linear") {
    pc.lin.F = per_mode(require(drift, "F", "model.drift.F"), modes, dim, dim, "model.drift.F");
    if (const json* off = find(drift, "offset")) {
      if (!off->is_array() || static_cast<int>(off->size()) != modes) {
        invalid("model.drift.offset", "expected one vector per mode");
      }
      for (int j = 0; j < modes; ++j) {
        pc.lin.offset.push_back(vector_of((*off)[static_cast<std::size_t>(j)], dim,
                                          "model.drift.offset[" + std::to_string(j) + "]"));
      }
    }
  } else if (type == "named") {
    pc.linear_drift = false;
    pc.named = string_or(drift, "name", "", "model.drift.name");
    try {
      named_drift(pc.named);
    } catch (const Error& e) {
      invalid("model.drift.name", e.what());
    }
  } else {
    invalid("model.drift.type", "expected 'linear' or 'named'");
  }

  const json empty = json::object();
  const json* diff = find(model, "diffusion");
  const json& dj = diff ? *diff : empty;
  if (const json* G = find(dj, "G")) {
    if (!G->is_array() || static_cast<int>(G->size()) != modes) {
      invalid("model.diffusion.G", "expected one list of noise_dim matrices per mode");
    }
    for (int j = 0; j < modes; ++j) {
      pc.lin.G.push_back(per_mode((*G)[static_cast<std::size_t>(j)], noise_dim, dim, dim,
                                  "model.diffusion.G[" + std::to_string(j) + "]"));
    }
  } else {
    pc.lin.G.assign(static_cast<std::size_t>(modes),
                    std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(noise_dim),
                                                 Eigen::MatrixXd::Zero(dim, dim)));
  }
  if (const json* b = find(dj, "additive")) {
    pc.lin.additive = per_mode(*b, modes, dim, noise_dim, "model.diffusion.additive");
  }
  if (pc.lin.F.empty()) {
    pc.lin.F.assign(static_cast<std::size_t>(modes), Eigen::MatrixXd::Zero(dim, dim));
  }
  try {
    pc.lin.check(dim, noise_dim, modes);
  } catch (const Error& e) {
    invalid("model", e.what());
  }
  return pc;
}

inline bool on_grid(double v, double dt) {
  const double q = v / dt;
  return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q));
}

inline SegmentGrid parse_segment(const json& seg, int dim, int resolution, const std::string& field) {
  const std::string type = string_or(seg, "type", "constant", field + ".type");
  SegmentGrid out;
  out.rho = 1.0;
  out.values.resize(dim, resolution + 1);
  if (type == "constant") {
    const Eigen::VectorXd v = vector_of(require(seg, "value", field + ".value"), dim, field + ".value");
    out.values = v.replicate(1, resolution + 1);
  } else if (type == "affine") {
    // Value "from" at relative time -1, "to" at 0.
    const Eigen::VectorXd a = vector_of(require(seg, "from", field + ".from"), dim, field + ".from");
    const Eigen::VectorXd b = vector_of(require(seg, "to", field + ".to"), dim, field + ".to");
    for (int c = 0; c <= resolution; ++c) {
      const double w = static_cast<double>(c) / resolution;
      out.values.col(c) = (1.0 - w) * a + w * b;
    }
  } else if (type == "samples") {
    const json& vals = require(seg, "values", field + ".values");
    if (!vals.is_array() || vals.size() < 2) invalid(field + ".values", "need at least two samples");
    const int m = static_cast<int>(vals.size()) - 1;
    out.values.resize(dim, m + 1);
    for (int c = 0; c <= m; ++c) {
      out.values.col(c) = vector_of(vals[static_cast<std::size_t>(c)], dim,
                                    field + ".values[" + std::to_string(c) + "]");
    }
  } else {
    invalid(field + ".type", "expected constant, affine or samples");
  }
  return out;
}

inline std::size_t line_of(const std::string& text, std::size_t byte, std::size_t* column) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  if (column) *column = col;
  return line;
}

}  // namespace detail

/// Builds a validated scenario from JSON text. `origin` names the source in
/// error messages and provenance.
inline ScenarioConfig parse_config_text(const std::string& text, const std::string& origin = "<string>",
                                        const ConfigOverrides& ov = {}) {
  using detail::find;
  using detail::invalid;
  using nlohmann::json;

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t col = 0;
    const std::size_t line = detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1, &col);
    throw Error(ErrorKind::ParseError, origin + ":" + std::to_string(line) + ":" +
                                           std::to_string(col) + ": malformed JSON");
  }
  if (!root.is_object()) invalid("config", "top level must be an object");

  ScenarioConfig cfg;
  cfg.scenario = detail::string_or(root, "scenario", "", "scenario");
  if (cfg.scenario.empty() || cfg.scenario.find_first_of("/\\") != std::string::npos ||
      cfg.scenario == "." || cfg.scenario == "..") {
    invalid("scenario", "needs a non-empty name usable as a directory");
  }

  const json& model = detail::require(root, "model", "model");
  const std::string kind = detail::string_or(model, "kind", "controlled", "model.kind");
  const int dim = static_cast<int>(detail::count_or(model, "dim", 1, "model.dim"));
  const int noise_dim = static_cast<int>(detail::count_or(model, "noise_dim", 1, "model.noise_dim"));
  cfg.generator = detail::parse_generator(model);
  const int modes = cfg.generator.n_states();
  const auto pc = detail::parse_coefficients(model, dim, noise_dim, modes);
  const StateFn h = pc.linear_drift ? pc.lin.drift_fn() : named_drift(pc.named);

  // Simulation grid first: overrides can change dt.
  const json empty = json::object();
  const json& sim = find(root, "sim") ? root["sim"] : empty;
  cfg.sim.dt = detail::number_or(sim, "dt", 0.01, "sim.dt");
  cfg.sim.blowup_guard = detail::number_or(sim, "blowup_guard", 1e8, "sim.blowup_guard");
  if (const json* seed = find(sim, "seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<long long>() >= 0)) {
      invalid("sim.seed", "expected a non-negative integer");
    }
    cfg.sim.seed = seed->get<std::uint64_t>();
  }
  if (ov.seed) cfg.sim.seed = *ov.seed;

  std::vector<Eigen::MatrixXd> delayed;
  if (kind == "controlled") {
    ControlledModelSpec spec;
    spec.dim = dim;
    spec.noise_dim = noise_dim;
    spec.h = h;
    spec.sigma = pc.lin.noise_fn();
    spec.gains = detail::per_mode(detail::require(model, "gains", "model.gains"), modes, dim, dim,
                                  "model.gains");
    spec.rho = detail::as_number(detail::require(model, "rho", "model.rho"), "model.rho");
    if (!(spec.rho > 0.0 && spec.rho <= 1.0)) invalid("model.rho", "must lie in (0, 1]");
    if (ov.dt_per_rho) {
      if (*ov.dt_per_rho < 1) invalid("--dt-per-rho", "must be >= 1");
      cfg.sim.dt = spec.rho / *ov.dt_per_rho;
    }
    delayed = spec.gains;
    cfg.model = build_controlled_model(spec, cfg.generator);
    cfg.controlled = spec;
    if (const json* nc = find(root, "negative_control")) {
      ControlledModelSpec neg = spec;
      neg.gains = detail::per_mode(detail::require(*nc, "gains", "negative_control.gains"), modes,
                                   dim, dim, "negative_control.gains");
      cfg.negative_control = neg;
      cfg.negative_control_guard =
          detail::number_or(*nc, "blowup_guard", 1e12, "negative_control.blowup_guard");
    }
  } else if (kind == "general") {
    const json* dj = find(model, "delay");
    const DelaySpec delay = dj ? detail::parse_delay(*dj, "model.delay") : DelaySpec::none();
    if (const json* a = find(model, "delayed")) {
      delayed = detail::per_mode(*a, modes, dim, dim, "model.delayed");
    } else {
      delayed.assign(static_cast<std::size_t>(modes), Eigen::MatrixXd::Zero(dim, dim));
    }
    if (ov.dt_per_rho) {
      if (!delay.present()) invalid("--dt-per-rho", "model has no delay");
      if (*ov.dt_per_rho < 1) invalid("--dt-per-rho", "must be >= 1");
      cfg.sim.dt = delay.rho / *ov.dt_per_rho;
    }
    LinearCoefficients lin = pc.lin;
    cfg.model = build_linear_model(dim, noise_dim, lin, delayed, delay, cfg.generator);
    if (!pc.linear_drift) {
      cfg.model.drift = [h, delayed](double, Mode j, const VecIn& x, const VecIn& y, VecOut out) {
        h(j, x, out);
        out.noalias() += delayed[static_cast<std::size_t>(j - 1)] * y;
      };
    }
  } else {
    invalid("model.kind", "expected 'controlled' or 'general'");
  }
  cfg.model.dim = dim;
  cfg.model.noise_dim = noise_dim;

  const double dt = cfg.sim.dt;
  if (!(dt > 0.0)) invalid("sim.dt", "must be positive");
  if (cfg.model.delay.present() && !detail::on_grid(cfg.model.delay.rho, dt)) {
    invalid("rho / grid alignment", "model rho " + format_double(cfg.model.delay.rho) +
                                        " is not a multiple of dt = " + format_double(dt));
  }
  cfg.sim.steps_per_rho = cfg.model.delay.present()
                              ? static_cast<int>(std::llround(cfg.model.delay.rho / dt))
                              : 0;
  if (!(cfg.sim.blowup_guard > 0.0)) invalid("sim.blowup_guard", "must be positive");

  // Metric.
  if (const json* metric = find(root, "metric")) {
    const std::string mm =
        detail::string_or(*metric, "mode_metric", "label_difference", "metric.mode_metric");
    if (mm == "label_difference") {
      cfg.metric.mode_metric = ModeMetric::LabelDifference;
    } else if (mm == "discrete") {
      cfg.metric.mode_metric = ModeMetric::Discrete;
    } else {
      invalid("metric.mode_metric", "expected label_difference or discrete");
    }
  }

  // Sample counts.
  const json& samples = find(root, "samples") ? root["samples"] : empty;
  cfg.samples.M = detail::count_or(samples, "M", cfg.samples.M, "samples.M");
  cfg.samples.starts = detail::count_or(samples, "starts", cfg.samples.starts, "samples.starts");
  cfg.samples.paths_per_start = detail::count_or(samples, "paths_per_start",
                                                 cfg.samples.paths_per_start, "samples.paths_per_start");
  cfg.samples.calibration_replicates =
      detail::count_or(samples, "calibration_replicates", cfg.samples.calibration_replicates,
                       "samples.calibration_replicates");
  cfg.samples.pair_paths =
      detail::count_or(samples, "pair_paths", cfg.samples.pair_paths, "samples.pair_paths");
  cfg.bl.atom_cap = detail::count_or(samples, "atom_cap", cfg.bl.atom_cap, "samples.atom_cap");
  if (ov.atom_cap) {
    if (*ov.atom_cap < 1) invalid("--atom-cap", "must be >= 1");
    cfg.bl.atom_cap = *ov.atom_cap;
  }

  // Times.
  const json& times = find(root, "times") ? root["times"] : empty;
  auto& tp = cfg.times;
  tp.s = detail::number_or(times, "s", tp.s, "times.s");
  tp.t = detail::number_or(times, "t", tp.t, "times.t");
  tp.T_burn = detail::number_or(times, "T_burn", tp.T_burn, "times.T_burn");
  tp.period = detail::number_or(times, "period", tp.period, "times.period");
  tp.endpoint_time = detail::number_or(times, "endpoint_time", tp.endpoint_time, "times.endpoint_time");
  if (const json* v = find(times, "lookbacks")) tp.lookbacks = detail::numbers(*v, "times.lookbacks");
  if (const json* v = find(times, "stability_times")) {
    tp.stability_times = detail::numbers(*v, "times.stability_times");
  }
  for (const auto& [name, value] : {std::pair<const char*, double>{"times.s", tp.s},
                                    {"times.t", tp.t},
                                    {"times.T_burn", tp.T_burn},
                                    {"times.period", tp.period},
                                    {"times.endpoint_time", tp.endpoint_time}}) {
    if (!detail::on_grid(value, dt)) invalid(name, "must be a multiple of dt");
  }
  const double rho = cfg.model.rho();
  if (!(tp.T_burn >= rho) || tp.T_burn <= 0.0) invalid("times.T_burn", "must be positive and >= rho");
  if (!(tp.endpoint_time > 0.0)) invalid("times.endpoint_time", "must be positive");
  if (tp.period < 0.0) invalid("times.period", "must be non-negative");
  if (tp.lookbacks.empty()) invalid("times.lookbacks", "must not be empty");
  for (std::size_t i = 0; i < tp.lookbacks.size(); ++i) {
    if (!(tp.t - rho > -tp.lookbacks[i])) invalid("times.lookbacks", "need t - rho > -n");
    if (i > 0 && !(tp.lookbacks[i] > tp.lookbacks[i - 1])) {
      invalid("times.lookbacks", "must be strictly increasing");
    }
  }
  if (tp.stability_times.empty()) invalid("times.stability_times", "must not be empty");
  for (std::size_t i = 0; i < tp.stability_times.size(); ++i) {
    const double e = tp.stability_times[i];
    if (!(e >= rho) || !(e > 0.0) || (i > 0 && !(e > tp.stability_times[i - 1]))) {
      invalid("times.stability_times", "must be increasing and at least rho");
    }
  }

  // Initial data.
  const json& init = find(root, "initial") ? root["initial"] : empty;
  const int resolution =
      static_cast<int>(detail::count_or(init, "resolution", 100, "initial.resolution"));
  if (const json* im = find(init, "mode")) {
    if (!im->is_number_integer()) invalid("initial.mode", "expected an integer");
    cfg.initial_mode = im->get<int>();
  }
  if (cfg.initial_mode < 1 || cfg.initial_mode > modes) {
    invalid("initial.mode", "must lie in 1.." + std::to_string(modes));
  }
  if (const json* segs = find(init, "segments")) {
    if (!segs->is_array() || segs->empty()) invalid("initial.segments", "expected a non-empty array");
    for (std::size_t i = 0; i < segs->size(); ++i) {
      cfg.initial_segments.push_back(detail::parse_segment(
          (*segs)[i], dim, resolution, "initial.segments[" + std::to_string(i) + "]"));
    }
  } else {
    cfg.initial_segments.push_back(SegmentGrid::constant(Eigen::VectorXd::Ones(dim), 1.0, resolution));
    cfg.initial_segments.push_back(SegmentGrid::constant(Eigen::VectorXd::Zero(dim), 1.0, resolution));
  }

  // Ladders and tolerances.
  if (const json* ladder = find(root, "rho_ladder")) {
    cfg.rho_ladder = detail::numbers(*ladder, "rho_ladder");
    for (std::size_t i = 0; i < cfg.rho_ladder.size(); ++i) {
      const double r = cfg.rho_ladder[i];
      if (!(r > 0.0 && r <= 1.0)) invalid("rho ladder", "entries must lie in (0, 1]");
      if (i > 0 && !(r < cfg.rho_ladder[i - 1])) invalid("rho ladder", "must be strictly decreasing");
      if (!detail::on_grid(r, dt)) {
        invalid("rho ladder / grid alignment",
                format_double(r) + " is not a multiple of dt = " + format_double(dt));
      }
    }
  }
  if (const json* eta = find(root, "eta")) {
    cfg.etas = detail::numbers(*eta, "eta");
    for (double e : cfg.etas) {
      if (!(e > 0.0)) invalid("eta", "entries must be positive");
    }
  }
  if (const json* tight = find(root, "tightness")) {
    if (const json* v = find(*tight, "radii")) cfg.tightness.radii = detail::numbers(*v, "tightness.radii");
    if (const json* v = find(*tight, "etas")) cfg.tightness.etas = detail::numbers(*v, "tightness.etas");
  }
  const json& tol = find(root, "tolerances") ? root["tolerances"] : empty;
  cfg.tol.exceedance_max = detail::number_or(tol, "exceedance_max", cfg.tol.exceedance_max,
                                             "tolerances.exceedance_max");
  cfg.tol.exceedance_slack = detail::number_or(tol, "exceedance_slack", cfg.tol.exceedance_slack,
                                               "tolerances.exceedance_slack");
  cfg.tol.eps_quantile =
      detail::number_or(tol, "eps_quantile", cfg.tol.eps_quantile, "tolerances.eps_quantile");
  cfg.tol.final_factor =
      detail::number_or(tol, "final_factor", cfg.tol.final_factor, "tolerances.final_factor");
  if (!(cfg.tol.eps_quantile > 0.0 && cfg.tol.eps_quantile <= 1.0)) {
    invalid("tolerances.eps_quantile", "must lie in (0, 1]");
  }
  if (cfg.tol.exceedance_slack < 0.0) invalid("tolerances.exceedance_slack", "must be >= 0");
  if (!(cfg.tol.final_factor > 0.0)) invalid("tolerances.final_factor", "must be positive");

  // Suites.
  if (const json* suites = find(root, "suites")) {
    if (!suites->is_array()) invalid("suites", "expected an array of names");
    for (const auto& s : *suites) {
      if (!s.is_string()) invalid("suites", "expected suite names");
      const auto name = s.get<std::string>();
      const auto& known = known_suites();
      if (std::find(known.begin(), known.end(), name) == known.end()) {
        invalid("suites", "unknown suite '" + name + "'");
      }
      cfg.suites.push_back(name);
    }
  } else {
    cfg.suites = cfg.controlled ? known_suites()
                                : std::vector<std::string>{"existence", "periodicity", "stability"};
  }
  for (const auto& s : cfg.suites) {
    if ((s == "endpoint" || s == "delay_limit") && !cfg.controlled) {
      invalid("suites", s + " needs a controlled model");
    }
    if ((s == "endpoint" || s == "delay_limit") && cfg.rho_ladder.empty()) {
      invalid("rho ladder", s + " needs a non-empty rho_ladder");
    }
    if (s == "stability" && cfg.initial_segments.size() < 2) {
      invalid("initial.segments", "stability needs at least two segments");
    }
  }
  cfg.output_dir = detail::string_or(root, "output_dir", "out", "output_dir");
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;

  // Eager assumption checks recorded as provenance.
  json prov;
  prov["source"] = origin;
  prov["config_fnv1a64"] = tag_of(text);
  prov["version"] = kVersion;
  prov["generator_valid"] = true;
  const Eigen::VectorXd pi = stationary_distribution(cfg.generator);
  prov["stationary_distribution"] = std::vector<double>(pi.data(), pi.data() + pi.size());
  prov["steps_per_rho"] = cfg.sim.steps_per_rho;
  if (pc.linear_drift) {
    std::vector<Eigen::MatrixXd> Q = identity_weights(dim, modes);
    if (const json* q = find(model, "Q")) Q = detail::per_mode(*q, modes, dim, dim, "model.Q");
    try {
      const auto cert = check_dissipativity_linear(pc.lin.F, delayed, pc.lin.G, cfg.generator, Q);
      prov["certificate"] = {{"certified", cert.certified},
                             {"beta", cert.beta},
                             {"lambda_max", cert.lambda_max},
                             {"worst_mode", cert.worst_mode},
                             {"verified_on", cert.verified_on}};
    } catch (const Error& e) {
      invalid("model.Q", e.what());
    }
  } else {
    prov["certificate"] = {{"certified", nullptr}, {"verified_on", "not-linear"}};
  }
  cfg.provenance = prov;
  return cfg;
}

inline ScenarioConfig parse_config(const std::string& path, const ConfigOverrides& ov = {}) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::ParseError, "cannot read config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path, ov);
}

}  // namespace hybridlab
