#pragma once

// Scenario suites. Each suite estimates laws by Monte Carlo, compares them in
// the bounded-Lipschitz metric and judges the distances against a threshold
// calibrated from self-distances of independent same-law ensembles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "hybridlab/error.hpp"
#include "hybridlab/measure.hpp"
#include "hybridlab/model.hpp"
#include "hybridlab/parallel.hpp"
#include "hybridlab/simulate.hpp"
#include "hybridlab/switching.hpp"

namespace hybridlab {

inline constexpr const char* kVersion = "0.3.0";

struct Tolerances {
  double exceedance_max = 0.05;    // final endpoint exceedance probability
  double exceedance_slack = 0.0;   // allowed increase per ladder step
  double eps_quantile = 0.95;      // calibration quantile
  double final_factor = 2.0;       // delay-limit final entry <= factor * eps_stat
};

struct SampleCounts {
  std::size_t M = 2000;
  std::size_t starts = 200;
  std::size_t paths_per_start = 10;
  std::size_t calibration_replicates = 20;
  std::size_t pair_paths = 500;
};

struct TimePoints {
  double s = 0.0;       // start of stability and endpoint runs
  double t = 0.0;       // evaluation time for existence, periodicity, delay limit
  double T_burn = 20.0;
  double period = 0.0;  // periodicity shift; 0 uses the model's rho
  std::vector<double> lookbacks = {5.0, 10.0, 20.0};
  std::vector<double> stability_times = {1.0, 2.0, 5.0, 10.0, 15.0};  // elapsed since s
  double endpoint_time = 1.0;                                          // elapsed since s
};

struct TightnessGrid {
  std::vector<double> radii = {0.5, 1.0, 2.0, 4.0};
  std::vector<double> etas = {0.02, 0.05, 0.1};
};

struct ScenarioConfig {
  std::string scenario = "scenario";
  Generator generator;
  HybridDelayModel model;
  // Present when the model has the form h(j, x) + A(j) u(floor(t/rho) rho).
  std::optional<ControlledModelSpec> controlled;
  // Same system with the gains switched off; stability must fail for it.
  std::optional<ControlledModelSpec> negative_control;
  double negative_control_guard = 1e12;
  MetricSpec metric;
  SimConfig sim;
  BlOptions bl;
  SampleCounts samples;
  TimePoints times;
  TightnessGrid tightness;
  std::vector<SegmentGrid> initial_segments;  // on [-1, 0]
  Mode initial_mode = 1;
  std::vector<double> rho_ladder;
  std::vector<double> etas = {0.1};
  Tolerances tol;
  std::vector<std::string> suites;
  std::string output_dir = "out";
  nlohmann::json provenance = nlohmann::json::object();
};

inline const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> names = {"existence", "periodicity", "stability",
                                                 "endpoint", "delay_limit"};
  return names;
}

// ---------------------------------------------------------------------------
// Reports

enum class Relation { Info, AtMost, Above };

inline const char* to_string(Relation r) {
  switch (r) {
    case Relation::Info: return "info";
    case Relation::AtMost: return "<=";
    case Relation::Above: return ">";
  }
  return "?";
}

struct ReportRow {
  std::string section;
  std::string parameter;
  std::string statistic;
  double value = 0.0;
  double reference = 0.0;
  Relation relation = Relation::Info;

  bool passed() const {
    switch (relation) {
      case Relation::Info: return true;
      case Relation::AtMost: return value <= reference;
      case Relation::Above: return value > reference;
    }
    return false;
  }
  std::string verdict() const {
    if (relation == Relation::Info) return "INFO";
    return passed() ? "PASS" : "FAIL";
  }
};

struct ExperimentReport {
  std::string scenario;
  std::string suite;
  std::vector<ReportRow> rows;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  double eps_stat = 0.0;

  void add(std::string section, std::string parameter, std::string statistic, double value,
           double reference = 0.0, Relation rel = Relation::Info) {
    rows.push_back({std::move(section), std::move(parameter), std::move(statistic), value,
                    reference, rel});
  }

  bool passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.passed(); });
  }

  const ReportRow* first_failure() const {
    for (const auto& r : rows) {
      if (!r.passed()) return &r;
    }
    return nullptr;
  }
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string param(const std::string& name, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%.10g", name.c_str(), v);
  return buf;
}

inline std::string describe(const ExperimentReport& rep, const ReportRow& r) {
  return rep.suite + "/" + r.section + " " + r.statistic + " [" + r.parameter +
         "] = " + format_double(r.value) + " (needs " + to_string(r.relation) + " " +
         format_double(r.reference) + ")";
}

// ---------------------------------------------------------------------------
// Helpers shared by the suites

namespace detail {

inline int steps_for(double rho, double dt) {
  if (rho == 0.0) return 0;
  const auto k = static_cast<int>(std::llround(rho / dt));
  if (k < 1 || std::abs(k * dt - rho) > 1e-9 * rho) {
    throw Error(ErrorKind::GridMismatch, "rho = " + format_double(rho) + " is not a multiple of dt");
  }
  return k;
}

inline SegmentGrid initial_for(const ScenarioConfig& cfg, std::size_t i, double rho, double dt) {
  const SegmentGrid& full = cfg.initial_segments.at(i);
  SegmentGrid out = rho == 0.0 ? SegmentGrid::constant(full.endpoint(), 0.0, 0)
                               : restrict(full, rho, steps_for(rho, dt));
  out.mode = cfg.initial_mode;
  return out;
}

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

// Suite context: derives and records every seed used.
class Context {
 public:
  Context(const ScenarioConfig& cfg, ExperimentReport& rep) : cfg_(cfg), rep_(rep) {}

  SimConfig sim(const std::string& role, int steps_per_rho = -1) {
    SimConfig c = cfg_.sim;
    c.seed = seed(role);
    if (steps_per_rho >= 0) c.steps_per_rho = steps_per_rho;
    return c;
  }

  std::uint64_t seed(const std::string& role) {
    const std::string full = rep_.suite + "/" + role;
    const std::uint64_t v = derive_seed(cfg_.sim.seed, full);
    rep_.seeds.emplace_back(full, v);
    return v;
  }

  double distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const std::string& role) {
    BlOptions opt = cfg_.bl;
    opt.seed = seed("bl/" + role);
    return bl_distance(a, b, cfg_.metric, opt);
  }

  // eps_stat from independent pairs drawn by draw(role). When `family`
  // gating rows share the threshold, the quantile is taken at
  // 1 - (1 - q) / family over family * R pairs.
  double calibrate(const std::function<EmpiricalMeasure(const std::string&)>& draw,
                   std::size_t family = 1) {
    family = std::max<std::size_t>(family, 1);
    const std::size_t R = cfg_.samples.calibration_replicates * family;
    const double q = 1.0 - (1.0 - cfg_.tol.eps_quantile) / static_cast<double>(family);
    std::vector<EmpiricalMeasure> a(R), b(R);
    std::vector<BlOptions> opts(R, cfg_.bl);
    for (std::size_t r = 0; r < R; ++r) {
      const std::string tag = "calibration/" + std::to_string(r);
      a[r] = draw(tag + "/a");
      b[r] = draw(tag + "/b");
      opts[r].seed = seed("bl/" + tag);
    }
    std::vector<double> d(R);
    parallel_for(R, [&](std::size_t r) { d[r] = bl_distance(a[r], b[r], cfg_.metric, opts[r]); });
    const double eps = quantile(d, q);
    rep_.eps_stat = eps;
    const std::string p = "replicates=" + std::to_string(R) + ";" + param("quantile", q) +
                          ";family=" + std::to_string(family);
    rep_.add("calibration", p, "self_distance_min", *std::min_element(d.begin(), d.end()));
    rep_.add("calibration", p, "self_distance_median", quantile(d, 0.5));
    rep_.add("calibration", p, "self_distance_max", *std::max_element(d.begin(), d.end()));
    rep_.add("calibration", p, "eps_stat", eps);
    return eps;
  }

  const ScenarioConfig& cfg() const { return cfg_; }
  ExperimentReport& report() { return rep_; }

 private:
  const ScenarioConfig& cfg_;
  ExperimentReport& rep_;
};

inline const ControlledModelSpec& require_controlled(const ScenarioConfig& cfg, const char* suite) {
  if (!cfg.controlled) {
    throw Error(ErrorKind::InvalidArgument,
                std::string(suite) + " suite needs a controlled model (h, sigma, gains)");
  }
  return *cfg.controlled;
}

inline ControlledModelSpec with_rho(ControlledModelSpec spec, double rho) {
  spec.rho = rho;
  return spec;
}

inline double segment_sup(const SegmentGrid& a, const SegmentGrid& b) {
  double sup = 0.0;
  for (Eigen::Index c = 0; c < a.values.cols(); ++c) {
    sup = std::max(sup, (a.values.col(c) - b.values.col(c)).norm());
  }
  return sup;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Suites

/// Krylov-Bogolyubov measures for an increasing lookback ladder, their
/// tightness diagnostics and the distances between consecutive measures.
inline ExperimentReport run_existence(const ScenarioConfig& cfg) {
  ExperimentReport rep{cfg.scenario, "existence", {}, {}, 0.0};
  detail::Context ctx(cfg, rep);
  const auto& m = cfg.model;
  const double t = cfg.times.t;
  const SegmentGrid xi = detail::initial_for(cfg, 0, m.rho(), cfg.sim.dt);
  const auto& ns = cfg.times.lookbacks;
  auto kb = [&](double n, const std::string& role) {
    return kb_average(m, xi, cfg.initial_mode, t, n, cfg.samples.starts,
                      cfg.samples.paths_per_start, ctx.sim(role));
  };

  std::vector<EmpiricalMeasure> measures;
  for (double n : ns) {
    measures.push_back(kb(n, param("kb/n", n)));
    EmpiricalMeasure as_segments = measures.back();
    as_segments.space = Space::Segments;  // states are one-point segments
    const auto tight = tightness_report(as_segments, cfg.tightness.radii, cfg.tightness.etas);
    for (const auto& b : tight.balls) {
      rep.add("tightness", param("n", n) + ";" + param("R", b.radius), "prob_norm_le_R",
              b.probability);
    }
    if (m.rho() > 0.0) {
      for (const auto& md : tight.moduli) {
        const std::string p = param("n", n) + ";" + param("eta", md.eta);
        rep.add("tightness", p, "modulus_mean", md.mean);
        rep.add("tightness", p, "modulus_q95", md.q95);
        rep.add("tightness", p, "modulus_max", md.max);
      }
    }
  }

  const double eps = ctx.calibrate([&](const std::string& role) { return kb(ns.back(), role); });
  for (std::size_t i = 1; i < measures.size(); ++i) {
    const double d = ctx.distance(measures[i - 1], measures[i], param("kb", ns[i]));
    const bool last = i + 1 == measures.size();
    rep.add("kb_distance", param("n_prev", ns[i - 1]) + ";" + param("n", ns[i]), "bl_distance", d,
            eps, last ? Relation::AtMost : Relation::Info);
  }
  return rep;
}

/// mu_t against mu_{t + period}, both from burn-in ensembles; the half-period
/// shift is reported as a contrast.
inline ExperimentReport run_periodicity(const ScenarioConfig& cfg) {
  ExperimentReport rep{cfg.scenario, "periodicity", {}, {}, 0.0};
  detail::Context ctx(cfg, rep);
  const auto& m = cfg.model;
  const double dt = cfg.sim.dt;
  const double period = cfg.times.period > 0.0 ? cfg.times.period : m.rho();
  if (!(period > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "periodicity needs a delay or an explicit period");
  }
  const auto period_steps = static_cast<std::int64_t>(std::llround(period / dt));
  const SegmentGrid xi = detail::initial_for(cfg, 0, m.rho(), dt);
  const double t = cfg.times.t;
  auto law_at = [&](double when, const std::string& role) {
    return ensemble_at(m, when - cfg.times.T_burn, xi, cfg.initial_mode, when, cfg.samples.M,
                       ctx.sim(role));
  };

  const EmpiricalMeasure mu_t = law_at(t, "law/t");
  const double eps = ctx.calibrate([&](const std::string& role) { return law_at(t, role); });

  const double shifted = t + static_cast<double>(period_steps) * dt;
  const double d_full = ctx.distance(mu_t, law_at(shifted, "law/t+period"), "period");
  rep.add("periodicity", param("t", t) + ";" + param("shift", period) + ";" +
                             param("T_burn", cfg.times.T_burn),
          "bl_distance", d_full, eps, Relation::AtMost);

  const std::int64_t half_steps = period_steps / 2;
  if (half_steps > 0) {
    const double half = static_cast<double>(half_steps) * dt;
    const double d_half = ctx.distance(mu_t, law_at(t + half, "law/t+half"), "half");
    rep.add("contrast", param("t", t) + ";" + param("shift", half), "bl_distance", d_half, eps);
  }
  return rep;
}

/// Laws from different initial data compared with each other and with the
/// burn-in estimate of mu_t along a time ladder, plus the pathwise
/// contraction of coupled pairs and the uncontrolled negative control.
inline ExperimentReport run_stability(const ScenarioConfig& cfg) {
  ExperimentReport rep{cfg.scenario, "stability", {}, {}, 0.0};
  detail::Context ctx(cfg, rep);
  const auto& m = cfg.model;
  const double dt = cfg.sim.dt;
  if (cfg.initial_segments.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "stability needs at least two initial segments");
  }
  const double s = cfg.times.s;
  std::vector<double> ladder;
  for (double e : cfg.times.stability_times) ladder.push_back(s + e);
  const double horizon = ladder.back();
  const std::size_t K = ladder.size(), I = cfg.initial_segments.size();
  const std::size_t M = cfg.samples.M;

  std::vector<std::vector<EmpiricalMeasure>> laws;  // [initial][time]
  for (std::size_t i = 0; i < I; ++i) {
    laws.push_back(ensemble_at_times(m, s, detail::initial_for(cfg, i, m.rho(), dt),
                                     cfg.initial_mode, ladder, M,
                                     ctx.sim("law/xi" + std::to_string(i + 1))));
  }
  const SegmentGrid xi1 = detail::initial_for(cfg, 0, m.rho(), dt);
  const double eps = ctx.calibrate(
      [&](const std::string& role) {
        return ensemble_at(m, s, xi1, cfg.initial_mode, horizon, M, ctx.sim(role));
      },
      2 * I - 1);

  for (std::size_t k = 0; k < K; ++k) {
    const Relation rel = k + 1 == K ? Relation::AtMost : Relation::Info;
    const std::string tp = param("t", ladder[k]);
    for (std::size_t i = 1; i < I; ++i) {
      const double d = ctx.distance(laws[0][k], laws[i][k], "between/" + tp + "/" + std::to_string(i));
      rep.add("between_initial", tp + ";pair=1-" + std::to_string(i + 1), "bl_distance", d, eps,
              rel);
    }
    const EmpiricalMeasure burn =
        ensemble_at(m, ladder[k] - cfg.times.T_burn, xi1, cfg.initial_mode, ladder[k], M,
                    ctx.sim("burnin/" + tp));
    for (std::size_t i = 0; i < I; ++i) {
      const double d = ctx.distance(laws[i][k], burn, "to_burnin/" + tp + "/" + std::to_string(i));
      rep.add("to_burnin", tp + ";xi=" + std::to_string(i + 1) + ";" +
                               param("T_burn", cfg.times.T_burn),
              "bl_distance", d, eps, rel);
    }
  }

  // Common-randomness contraction of the first two initial segments.
  {
    const SegmentGrid xi2 = detail::initial_for(cfg, 1, m.rho(), dt);
    const std::size_t P = cfg.samples.pair_paths;
    const SimConfig pc = ctx.sim("pair");
    std::vector<std::vector<double>> sup(P, std::vector<double>(K));
    parallel_for(P, [&](std::size_t p) {
      const auto [a, b] = integrate_pair(m, s, xi1, xi2, cfg.initial_mode, horizon, pc, p);
      for (std::size_t k = 0; k < K; ++k) {
        sup[p][k] = detail::segment_sup(segment_at(a, ladder[k]), segment_at(b, ladder[k]));
      }
    });
    for (std::size_t k = 0; k < K; ++k) {
      double mean = 0.0;
      for (std::size_t p = 0; p < P; ++p) mean += sup[p][k] / static_cast<double>(P);
      rep.add("pathwise_contraction", param("t", ladder[k]) + ";paths=" + std::to_string(P),
              "mean_sup_difference", mean);
    }
  }

  if (cfg.negative_control) {
    const HybridDelayModel nc = build_controlled_model(*cfg.negative_control, cfg.generator);
    auto nc_sim = [&](const std::string& role) {
      SimConfig c = ctx.sim(role);
      c.blowup_guard = cfg.negative_control_guard;
      return c;
    };
    try {
      std::vector<std::vector<EmpiricalMeasure>> nl;
      for (std::size_t i = 0; i < 2; ++i) {
        nl.push_back(ensemble_at_times(nc, s, detail::initial_for(cfg, i, nc.rho(), dt),
                                       cfg.initial_mode, ladder, M,
                                       nc_sim("negative/law/xi" + std::to_string(i + 1))));
      }
      for (std::size_t k = 0; k < K; ++k) {
        const std::string tp = param("t", ladder[k]);
        const double d = ctx.distance(nl[0][k], nl[1][k], "negative/" + tp);
        rep.add("negative_control", tp + ";pair=1-2;gains=0", "bl_distance", d, eps,
                k + 1 == K ? Relation::Above : Relation::Info);
      }
    } catch (const BlowupError& e) {
      // Divergence is the expected outcome here.
      rep.add("negative_control", param("t", e.time()) + ";path=" + std::to_string(e.path()),
              "blowup", 1.0, 0.0, Relation::Above);
    }
  }
  return rep;
}

/// Coupled delayed/undelayed runs from a compact initial family: empirical
/// P(|u^rho(t) - u^0(t)| >= eta), sup over the family, down the rho ladder.
inline ExperimentReport run_endpoint_convergence(const ScenarioConfig& cfg) {
  ExperimentReport rep{cfg.scenario, "endpoint", {}, {}, 0.0};
  detail::Context ctx(cfg, rep);
  const ControlledModelSpec& base = detail::require_controlled(cfg, "endpoint");
  const double dt = cfg.sim.dt;
  const double s = cfg.times.s, t_end = s + cfg.times.endpoint_time;
  const std::size_t M = cfg.samples.M, I = cfg.initial_segments.size();
  const std::uint64_t seed = ctx.seed("coupled");

  std::vector<std::vector<double>> prob(cfg.etas.size(), std::vector<double>(cfg.rho_ladder.size()));
  for (std::size_t r = 0; r < cfg.rho_ladder.size(); ++r) {
    const double rho = cfg.rho_ladder[r];
    const int k = detail::steps_for(rho, dt);
    const ControlledModelSpec spec = detail::with_rho(base, rho);
    SimConfig sc = cfg.sim;
    sc.seed = seed;  // common random numbers across the ladder
    sc.steps_per_rho = k;
    double start_gap = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
      const SegmentGrid xi = detail::initial_for(cfg, i, rho, dt);
      std::vector<double> gap(M), g0(M);
      parallel_for(M, [&](std::size_t p) {
        const auto [d, l] =
            integrate_coupled_delay_limit(spec, cfg.generator, s, xi, cfg.initial_mode, t_end, sc, p);
        gap[p] = (d.state(d.size() - 1) - l.state(l.size() - 1)).norm();
        g0[p] = (d.state(d.origin) - l.state(l.origin)).norm();
      });
      start_gap = std::max(start_gap, *std::max_element(g0.begin(), g0.end()));
      for (std::size_t e = 0; e < cfg.etas.size(); ++e) {
        const auto hits = std::count_if(gap.begin(), gap.end(),
                                         [&](double v) { return v >= cfg.etas[e]; });
        prob[e][r] = std::max(prob[e][r], static_cast<double>(hits) / static_cast<double>(M));
      }
    }
    rep.add("start", param("rho", rho) + ";" + param("t", s), "max_abs_difference", start_gap, 0.0,
            Relation::AtMost);
  }

  for (std::size_t e = 0; e < cfg.etas.size(); ++e) {
    for (std::size_t r = 0; r < cfg.rho_ladder.size(); ++r) {
      const std::string p = param("rho", cfg.rho_ladder[r]) + ";" + param("eta", cfg.etas[e]) +
                            ";" + param("t", t_end);
      const bool last = r + 1 == cfg.rho_ladder.size();
      rep.add("exceedance", p, "sup_probability", prob[e][r], cfg.tol.exceedance_max,
              last ? Relation::AtMost : Relation::Info);
      if (r > 0) {
        rep.add("monotone", p, "increase_from_previous", prob[e][r] - prob[e][r - 1],
                cfg.tol.exceedance_slack, Relation::AtMost);
      }
    }
  }
  return rep;
}

/// Endpoint projections of the delayed laws against the law of the
/// continuous-observation limit, down the rho ladder.
inline ExperimentReport run_delay_limit(const ScenarioConfig& cfg) {
  ExperimentReport rep{cfg.scenario, "delay_limit", {}, {}, 0.0};
  detail::Context ctx(cfg, rep);
  const ControlledModelSpec& base = detail::require_controlled(cfg, "delay_limit");
  const double dt = cfg.sim.dt;
  const double t = cfg.times.t, s = t - cfg.times.T_burn;
  const std::size_t M = cfg.samples.M;
  const HybridDelayModel limit = build_limit_model(base, cfg.generator);
  const SegmentGrid xi0 = detail::initial_for(cfg, 0, 0.0, dt);
  auto limit_law = [&](const std::string& role) {
    return ensemble_at(limit, s, xi0, cfg.initial_mode, t, M, ctx.sim(role, 0));
  };

  const EmpiricalMeasure mu0 = limit_law("limit");
  const double eps = ctx.calibrate(limit_law, cfg.rho_ladder.size());

  std::vector<double> dist;
  for (std::size_t r = 0; r < cfg.rho_ladder.size(); ++r) {
    const double rho = cfg.rho_ladder[r];
    const int k = detail::steps_for(rho, dt);
    const HybridDelayModel delayed = build_controlled_model(detail::with_rho(base, rho), cfg.generator);
    const EmpiricalMeasure mu = ensemble_at(delayed, s, detail::initial_for(cfg, 0, rho, dt),
                                            cfg.initial_mode, t, M,
                                            ctx.sim(param("delayed/rho", rho), k));
    dist.push_back(ctx.distance(project_T(mu), mu0, param("rho", rho)));
    const std::string p = param("rho", rho) + ";" + param("t", t) + ";" +
                          param("T_burn", cfg.times.T_burn);
    const bool last = r + 1 == cfg.rho_ladder.size();
    rep.add("distance", p, "bl_distance", dist.back(), cfg.tol.final_factor * eps,
            last ? Relation::AtMost : Relation::Info);
    if (r > 0) {
      rep.add("monotone", p, "increase_from_previous", dist[r] - dist[r - 1], eps, Relation::AtMost);
    }
  }
  return rep;
}

/// Runs one suite by name. A blow-up inside a suite becomes a failing row.
inline ExperimentReport run_suite(const ScenarioConfig& cfg, const std::string& name) {
  using Runner = ExperimentReport (*)(const ScenarioConfig&);
  Runner run = nullptr;
  if (name == "existence") run = run_existence;
  if (name == "periodicity") run = run_periodicity;
  if (name == "stability") run = run_stability;
  if (name == "endpoint") run = run_endpoint_convergence;
  if (name == "delay_limit") run = run_delay_limit;
  if (!run) throw Error(ErrorKind::InvalidArgument, "unknown suite '" + name + "'");
  try {
    return run(cfg);
  } catch (const BlowupError& e) {
    ExperimentReport rep{cfg.scenario, name, {}, {}, 0.0};
    rep.add("failure", param("t", e.time()) + ";path=" + std::to_string(e.path()), "blowups", 1.0,
            0.0, Relation::AtMost);
    return rep;
  }
}

// ---------------------------------------------------------------------------
// Output

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_report_csv(std::ostream& os, const ExperimentReport& rep) {
  os << "scenario,suite,section,parameter,statistic,value,reference,relation,verdict\r\n";
  for (const auto& r : rep.rows) {
    os << csv_field(rep.scenario) << ',' << csv_field(rep.suite) << ',' << csv_field(r.section)
       << ',' << csv_field(r.parameter) << ',' << csv_field(r.statistic) << ','
       << format_double(r.value) << ',' << format_double(r.reference) << ','
       << csv_field(to_string(r.relation)) << ',' << r.verdict() << "\r\n";
  }
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + tmp.string());
    f << content;
    if (!f.flush()) throw Error(ErrorKind::InvalidArgument, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json tolerances_json(const ScenarioConfig& cfg) {
  return {{"exceedance_max", cfg.tol.exceedance_max},
          {"exceedance_slack", cfg.tol.exceedance_slack},
          {"eps_quantile", cfg.tol.eps_quantile},
          {"final_factor", cfg.tol.final_factor},
          {"calibration_replicates", cfg.samples.calibration_replicates},
          {"atom_cap", cfg.bl.atom_cap}};
}

inline nlohmann::json verdict_json(const ScenarioConfig& cfg,
                                   const std::vector<ExperimentReport>& reports,
                                   const std::string& timestamp) {
  nlohmann::json suites = nlohmann::json::array();
  bool all = true;
  for (const auto& rep : reports) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows) {
      rows.push_back({{"section", r.section},
                      {"parameter", r.parameter},
                      {"statistic", r.statistic},
                      {"value", format_double(r.value)},
                      {"reference", format_double(r.reference)},
                      {"relation", to_string(r.relation)},
                      {"verdict", r.verdict()}});
    }
    nlohmann::json seeds = nlohmann::json::object();
    for (const auto& [role, v] : rep.seeds) seeds[role] = v;
    const ReportRow* fail = rep.first_failure();
    suites.push_back({{"suite", rep.suite},
                      {"passed", rep.passed()},
                      {"eps_stat", format_double(rep.eps_stat)},
                      {"first_failure", fail ? describe(rep, *fail) : ""},
                      {"csv", rep.suite + ".csv"},
                      {"seeds", seeds},
                      {"rows", rows}});
    all = all && rep.passed();
  }
  return {{"scenario", cfg.scenario},
          {"passed", all},
          {"generated_at", timestamp},
          {"master_seed", cfg.sim.seed},
          {"dt", cfg.sim.dt},
          {"paths", cfg.samples.M},
          {"tolerances", tolerances_json(cfg)},
          {"provenance", cfg.provenance},
          {"version", kVersion},
          {"suites", suites}};
}

/// Writes <out>/<scenario>/<suite>.csv for each report and verdict.json.
inline std::filesystem::path write_outputs(const ScenarioConfig& cfg,
                                           const std::vector<ExperimentReport>& reports,
                                           const std::filesystem::path& out_dir) {
  const std::filesystem::path dir = out_dir / cfg.scenario;
  for (const auto& rep : reports) {
    std::ostringstream os;
    write_report_csv(os, rep);
    write_file_atomic(dir / (rep.suite + ".csv"), os.str());
  }
  write_file_atomic(dir / "verdict.json", verdict_json(cfg, reports, utc_timestamp()).dump(2) + "\n");
  return dir;
}

}  // namespace hybridlab
