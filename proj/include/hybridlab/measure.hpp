#pragma once

// Empirical probability measures on C_rho x S (segments) and R^n x S
// (states), the bounded-Lipschitz distance between them, and the Monte-Carlo
// estimators of transition laws and Krylov-Bogolyubov averages.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridlab/error.hpp"
#include "hybridlab/model.hpp"
#include "hybridlab/parallel.hpp"
#include "hybridlab/rng.hpp"
#include "hybridlab/simulate.hpp"
#include "hybridlab/transport.hpp"

namespace hybridlab {

enum class ModeMetric { LabelDifference, Discrete };

struct MetricSpec {
  ModeMetric mode_metric = ModeMetric::LabelDifference;
};

// Segments: points of H = C_rho x S. States: points of R^n x S, stored as
// one-column segments with rho = 0.
enum class Space { Segments, States };

struct EmpiricalMeasure {
  Space space = Space::Segments;
  std::vector<SegmentGrid> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }

  static EmpiricalMeasure uniform(std::vector<SegmentGrid> pts, Space space) {
    EmpiricalMeasure mu;
    mu.space = space;
    mu.weights.assign(pts.size(), 1.0 / static_cast<double>(pts.size()));
    mu.points = std::move(pts);
    return mu;
  }

  static EmpiricalMeasure dirac(SegmentGrid p, Space space) {
    return uniform(std::vector<SegmentGrid>{std::move(p)}, space);
  }

  void validate() const {
    if (points.empty() || points.size() != weights.size()) {
      throw Error(ErrorKind::InvalidArgument, "measure needs one positive weight per atom");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw Error(ErrorKind::InvalidArgument, "non-positive atom weight");
      total += w;
    }
    if (!(std::abs(total - 1.0) <= 1e-12)) {
      throw Error(ErrorKind::InvalidArgument, "weights sum to " + std::to_string(total));
    }
    for (const auto& p : points) {
      if (p.values.rows() != points.front().values.rows() ||
          p.values.cols() != points.front().values.cols() || p.rho != points.front().rho) {
        throw Error(ErrorKind::GridMismatch, "atoms do not share rho and grid resolution");
      }
    }
  }
};

inline double mode_distance(Mode a, Mode b, const MetricSpec& spec) {
  if (spec.mode_metric == ModeMetric::Discrete) return a == b ? 0.0 : 1.0;
  return std::abs(static_cast<double>(a - b));
}

/// Sup over the shared sample grid of |a(tau) - b(tau)| plus the mode metric.
inline double h_distance(const SegmentGrid& a, const SegmentGrid& b, const MetricSpec& spec) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols() ||
      std::abs(a.rho - b.rho) > 1e-12) {
    throw Error(ErrorKind::GridMismatch, "segments live on different grids");
  }
  double sup = 0.0;
  for (Eigen::Index c = 0; c < a.values.cols(); ++c) {
    sup = std::max(sup, (a.values.col(c) - b.values.col(c)).norm());
  }
  return sup + mode_distance(a.mode, b.mode, spec);
}

namespace detail {

inline bool point_less(const SegmentGrid& a, const SegmentGrid& b) {
  if (a.mode != b.mode) return a.mode < b.mode;
  const double* pa = a.values.data();
  const double* pb = b.values.data();
  return std::lexicographical_compare(pa, pa + a.values.size(), pb, pb + b.values.size());
}

inline bool point_equal(const SegmentGrid& a, const SegmentGrid& b) {
  return a.mode == b.mode && a.values == b.values;
}

}  // namespace detail

/// Merges atoms at identical points. Atom order becomes canonical (sorted).
inline EmpiricalMeasure compact(const EmpiricalMeasure& mu) {
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detail::point_less(mu.points[a], mu.points[b]);
  });
  EmpiricalMeasure out;
  out.space = mu.space;
  for (std::size_t idx : order) {
    if (!out.points.empty() && detail::point_equal(out.points.back(), mu.points[idx])) {
      out.weights.back() += mu.weights[idx];
    } else {
      out.points.push_back(mu.points[idx]);
      out.weights.push_back(mu.weights[idx]);
    }
  }
  return out;
}

/// i.i.d. resample of `cap` atoms (with replacement, proportional to weight).
inline EmpiricalMeasure subsample(const EmpiricalMeasure& mu, std::size_t cap, std::uint64_t seed) {
  PhiloxStream rng(seed, 0, tag_of("subsample"));
  std::discrete_distribution<std::size_t> pick(mu.weights.begin(), mu.weights.end());
  EmpiricalMeasure out;
  out.space = mu.space;
  for (std::size_t k = 0; k < cap; ++k) {
    out.points.push_back(mu.points[pick(rng)]);
    out.weights.push_back(1.0 / static_cast<double>(cap));
  }
  return compact(out);
}

struct BlOptions {
  std::size_t atom_cap = 400;
  std::uint64_t seed = 0;  // subsampling stream when a measure exceeds the cap
  double tolerance = 1e-13;
  int max_iterations = 200;
};

struct BlResult {
  double value = 0.0;        // best attained dual objective
  double upper_bound = 0.0;  // cutting-plane bound; value <= d_L* <= upper_bound
  double lipschitz = 0.0;    // maximising Lipschitz budget L (sup-norm budget is 1 - L)
  int iterations = 0;
  std::size_t atoms_used_1 = 0;
  std::size_t atoms_used_2 = 0;
};

/// Bounded-Lipschitz distance between finitely supported measures,
///   sup { sum_i a_i (w1_i - w2_i) : |a_i| <= c, a_i - a_k <= L d_ik, c + L <= 1 }.
/// For fixed L the inner problem is the Kantorovich dual for the truncated
/// metric min(L d, 2 (1 - L)), so its value phi(L) is an optimal transport
/// cost. phi is concave and piecewise linear in L; it is maximised by a
/// cutting-plane search whose cuts are exact supergradients read off the
/// optimal plans, which terminates at the LP optimum.
inline BlResult bl_distance_detail(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2,
                                   const MetricSpec& spec, const BlOptions& opt = {}) {
  mu1.validate();
  mu2.validate();
  if (mu1.space != mu2.space) {
    throw Error(ErrorKind::GridMismatch, "measures live on different spaces");
  }
  const EmpiricalMeasure a = mu1.size() > opt.atom_cap
                                 ? subsample(mu1, opt.atom_cap, derive_seed(opt.seed, 1))
                                 : compact(mu1);
  const EmpiricalMeasure b = mu2.size() > opt.atom_cap
                                 ? subsample(mu2, opt.atom_cap, derive_seed(opt.seed, 2))
                                 : compact(mu2);
  const std::size_t ns = a.size(), nt = b.size();
  std::vector<double> d(ns * nt);
  double dmax = 0.0;
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      d[i * nt + j] = h_distance(a.points[i], b.points[j], spec);
      dmax = std::max(dmax, d[i * nt + j]);
    }
  }

  BlResult res;
  res.atoms_used_1 = ns;
  res.atoms_used_2 = nt;
  if (dmax == 0.0) return res;

  // Upper model: min over lines (slope, intercept). Start from the valid
  // bounds phi(L) <= L * dmax and phi(L) <= 2 (1 - L).
  struct Line {
    double slope, intercept;
  };
  std::vector<Line> lines = {{dmax, 0.0}, {-2.0, 2.0}};
  auto model = [&](double x) {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& l : lines) v = std::min(v, l.intercept + l.slope * x);
    return v;
  };

  std::vector<double> cost(ns * nt);
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    double best_x = 0.0, best_ub = -std::numeric_limits<double>::infinity();
    auto consider = [&](double x) {
      if (!(x >= 0.0 && x <= 1.0)) return;
      const double v = model(x);
      if (v > best_ub) {
        best_ub = v;
        best_x = x;
      }
    };
    consider(0.0);
    consider(1.0);
    for (std::size_t p = 0; p < lines.size(); ++p) {
      for (std::size_t q = p + 1; q < lines.size(); ++q) {
        const double ds = lines[p].slope - lines[q].slope;
        if (ds != 0.0) consider((lines[q].intercept - lines[p].intercept) / ds);
      }
    }
    res.upper_bound = best_ub;
    if (best_ub - res.value <= opt.tolerance * std::max(1.0, best_ub)) break;

    const double L = best_x;
    const double cap = 2.0 * (1.0 - L);
    for (std::size_t k = 0; k < cost.size(); ++k) cost[k] = std::min(L * d[k], cap);
    const TransportPlan plan = solve_transport(a.weights, b.weights, cost);
    double slope = 0.0;
    for (std::size_t k = 0; k < cost.size(); ++k) {
      if (plan.flow[k] == 0.0) continue;
      slope += plan.flow[k] * (L * d[k] <= cap ? d[k] : -2.0);
    }
    if (plan.cost > res.value) {
      res.value = plan.cost;
      res.lipschitz = L;
    }
    lines.push_back({slope, plan.cost - slope * L});
  }
  if (res.upper_bound - res.value > 1e-8) {
    throw Error(ErrorKind::LPFailure, "bounded-Lipschitz search stalled with gap " +
                                          std::to_string(res.upper_bound - res.value));
  }
  return res;
}

inline double bl_distance(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2,
                          const MetricSpec& spec, const BlOptions& opt = {}) {
  return bl_distance_detail(mu1, mu2, spec, opt).value;
}

// ---------------------------------------------------------------------------
// Estimators of transition laws

inline Space space_of(const HybridDelayModel& m) {
  return m.delay.present() ? Space::Segments : Space::States;
}

/// M independent solutions from (s, xi, j0); atoms are (segment at t, r(t)).
/// Path p uses stream (cfg.seed, first_path + p).
inline EmpiricalMeasure ensemble_at(const HybridDelayModel& m, double s, const SegmentGrid& xi,
                                    Mode j0, double t, std::size_t M, const SimConfig& cfg,
                                    std::uint64_t first_path = 0) {
  if (M < 1) throw Error(ErrorKind::InvalidArgument, "ensemble needs at least one path");
  if (!(t >= s + m.rho() - 1e-12)) {
    throw Error(ErrorKind::InvalidArgument, "ensemble time must satisfy t >= s + rho");
  }
  std::vector<SegmentGrid> atoms(M);
  parallel_for(M, [&](std::size_t p) {
    const Trajectory tr = integrate(m, s, xi, j0, t, cfg, first_path + p);
    atoms[p] = segment_at(tr, t);
  });
  return EmpiricalMeasure::uniform(std::move(atoms), space_of(m));
}

/// Laws at several times from one set of M paths; times must be increasing.
inline std::vector<EmpiricalMeasure> ensemble_at_times(const HybridDelayModel& m, double s,
                                                       const SegmentGrid& xi, Mode j0,
                                                       const std::vector<double>& times,
                                                       std::size_t M, const SimConfig& cfg,
                                                       std::uint64_t first_path = 0) {
  if (M < 1 || times.empty()) throw Error(ErrorKind::InvalidArgument, "need paths and times");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] >= s + m.rho() - 1e-12) || (k > 0 && !(times[k] > times[k - 1]))) {
      throw Error(ErrorKind::InvalidArgument, "times must increase and satisfy t >= s + rho");
    }
  }
  std::vector<std::vector<SegmentGrid>> atoms(times.size(), std::vector<SegmentGrid>(M));
  parallel_for(M, [&](std::size_t p) {
    const Trajectory tr = integrate(m, s, xi, j0, times.back(), cfg, first_path + p);
    for (std::size_t k = 0; k < times.size(); ++k) atoms[k][p] = segment_at(tr, times[k]);
  });
  std::vector<EmpiricalMeasure> out;
  for (auto& a : atoms) out.push_back(EmpiricalMeasure::uniform(std::move(a), space_of(m)));
  return out;
}

/// Monte-Carlo Krylov-Bogolyubov average: start times drawn uniformly on
/// [-n, t - rho] (snapped down to the dt grid), paths_per_start solutions from
/// each, all atoms pooled with equal weight.
inline EmpiricalMeasure kb_average(const HybridDelayModel& m, const SegmentGrid& xi, Mode j0,
                                   double t, double n, std::size_t starts,
                                   std::size_t paths_per_start, const SimConfig& cfg) {
  const double rho = m.rho();
  if (!(t - rho > -n)) throw Error(ErrorKind::InvalidArgument, "need t - rho > -n");
  if (starts < 1 || paths_per_start < 1) {
    throw Error(ErrorKind::InvalidArgument, "starts and paths_per_start must be positive");
  }
  PhiloxStream start_rng(cfg.seed, 0, tag_of("kb-start-times"));
  std::vector<double> start_times(starts);
  for (auto& tau : start_times) {
    const double u = -n + (t - rho + n) * start_rng.uniform_open();
    tau = std::floor(u / cfg.dt) * cfg.dt;
    if (!(tau < t)) tau = t - cfg.dt;
  }
  std::vector<SegmentGrid> atoms(starts * paths_per_start);
  parallel_for(atoms.size(), [&](std::size_t k) {
    const double tau = start_times[k / paths_per_start];
    const Trajectory tr = integrate(m, tau, xi, j0, t, cfg, k);
    atoms[k] = segment_at(tr, t);
  });
  return EmpiricalMeasure::uniform(std::move(atoms), space_of(m));
}

/// Pushforward under (psi, j) -> (psi(0), j).
inline EmpiricalMeasure project_T(const EmpiricalMeasure& mu) {
  if (mu.space != Space::Segments) {
    throw Error(ErrorKind::InvalidArgument, "projection expects a measure on segments");
  }
  EmpiricalMeasure out;
  out.space = Space::States;
  out.weights = mu.weights;
  out.points.reserve(mu.size());
  for (const auto& p : mu.points) out.points.push_back(SegmentGrid::constant(p.endpoint(), 0.0, 0, p.mode));
  return compact(out);
}

/// Restriction of a segment (typically on [-1, 0]) to [-rho, 0], resampled to m + 1 points.
inline SegmentGrid restrict(const SegmentGrid& full, double rho, int m) {
  if (!(rho > 0.0 && rho <= full.rho + 1e-12) || m < 1) {
    throw Error(ErrorKind::InvalidArgument, "restriction needs 0 < rho <= source span and m >= 1");
  }
  SegmentGrid out;
  out.rho = rho;
  out.mode = full.mode;
  out.values.resize(full.dim(), m + 1);
  for (int c = 0; c <= m; ++c) out.values.col(c) = full.at(-rho + rho * c / m);
  return out;
}

inline double integrate_functional(const EmpiricalMeasure& mu,
                                   const std::function<double(const SegmentGrid&)>& phi) {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double v = phi(mu.points[i]);
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::NonFiniteCoefficient, "functional not finite on atom " + std::to_string(i));
    }
    acc += mu.weights[i] * v;
  }
  return acc;
}

struct TightnessReport {
  struct Ball {
    double radius;
    double probability;  // mass of atoms with sup-norm <= radius
  };
  struct Modulus {
    double eta;
    double mean, median, q95, max;  // weighted over atoms
  };
  std::vector<Ball> balls;
  std::vector<Modulus> moduli;
};

/// sup over sample pairs at most eta apart of |psi(tau2) - psi(tau1)|.
inline double modulus_of_continuity(const SegmentGrid& seg, double eta) {
  const int m = seg.m();
  if (m == 0) return 0.0;
  const double h = seg.rho / m;
  const int lag = std::min(m, static_cast<int>(std::floor(eta / h + 1e-9)));
  double sup = 0.0;
  for (int a = 0; a <= m; ++a) {
    for (int b = a + 1; b <= std::min(m, a + lag); ++b) {
      sup = std::max(sup, (seg.values.col(b) - seg.values.col(a)).norm());
    }
  }
  return sup;
}

inline TightnessReport tightness_report(const EmpiricalMeasure& mu, const std::vector<double>& radii,
                                        const std::vector<double>& etas) {
  if (mu.space != Space::Segments) {
    throw Error(ErrorKind::InvalidArgument, "tightness report expects a measure on segments");
  }
  TightnessReport rep;
  std::vector<double> norms(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double sup = 0.0;
    for (Eigen::Index c = 0; c < mu.points[i].values.cols(); ++c) {
      sup = std::max(sup, mu.points[i].values.col(c).norm());
    }
    norms[i] = sup;
  }
  for (double r : radii) {
    double p = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      if (norms[i] <= r) p += mu.weights[i];
    }
    rep.balls.push_back({r, p});
  }
  for (double eta : etas) {
    std::vector<std::pair<double, double>> vals(mu.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      vals[i] = {modulus_of_continuity(mu.points[i], eta), mu.weights[i]};
      mean += vals[i].first * vals[i].second;
    }
    std::sort(vals.begin(), vals.end());
    auto quantile = [&](double q) {
      double acc = 0.0;
      for (const auto& [v, w] : vals) {
        acc += w;
        if (acc >= q - 1e-12) return v;
      }
      return vals.back().first;
    };
    rep.moduli.push_back({eta, mean, quantile(0.5), quantile(0.95), vals.back().first});
  }
  return rep;
}

/// Atom table: weight, mode, then segment samples (column-major, u_d at sample c).
inline void write_measure_csv(std::ostream& os, const EmpiricalMeasure& mu) {
  const int dim = mu.points.front().dim();
  const int cols = mu.points.front().m() + 1;
  os << "weight,mode";
  for (int c = 0; c < cols; ++c) {
    for (int d = 0; d < dim; ++d) os << ",s" << c << "_" << (d + 1);
  }
  os << "\r\n";
  char buf[64];
  for (std::size_t i = 0; i < mu.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%d", mu.weights[i], mu.points[i].mode);
    os << buf;
    for (int c = 0; c < cols; ++c) {
      for (int d = 0; d < dim; ++d) {
        std::snprintf(buf, sizeof buf, ",%.17g", mu.points[i].values(d, c));
        os << buf;
      }
    }
    os << "\r\n";
  }
}

}  // namespace hybridlab
