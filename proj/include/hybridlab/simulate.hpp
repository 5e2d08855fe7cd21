#pragma once

// Euler-Maruyama for hybrid delay SDEs on a dt grid refined at the exact
// mode-jump times. Grid times are always computed as (integer index) * dt, and
// dt = rho / k, so sawtooth observation instants are exact grid points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hybridlab/error.hpp"
#include "hybridlab/model.hpp"
#include "hybridlab/rng.hpp"
#include "hybridlab/switching.hpp"

namespace hybridlab {

struct SimConfig {
  double dt = 0.01;
  std::uint64_t seed = 0;
  int steps_per_rho = 0;  // k with dt * k == rho; 0 derives it from the model
  double blowup_guard = 1e8;
};

/// A point of C_rho x S sampled on m + 1 equally spaced times over [-rho, 0].
/// Column c holds u(t - rho + c * rho / m). With rho = 0 there is one column.
struct SegmentGrid {
  double rho = 0.0;
  Eigen::MatrixXd values;
  Mode mode = 1;

  int dim() const { return static_cast<int>(values.rows()); }
  int m() const { return static_cast<int>(values.cols()) - 1; }
  Eigen::VectorXd endpoint() const { return values.col(values.cols() - 1); }

  static SegmentGrid constant(const Eigen::VectorXd& c, double rho, int m, Mode mode = 1) {
    SegmentGrid s;
    s.rho = rho;
    s.mode = mode;
    s.values = c.replicate(1, m + 1);
    return s;
  }

  /// Linear interpolation at relative time tau in [-rho, 0].
  Eigen::VectorXd at(double tau) const {
    if (m() == 0) return values.col(0);
    const double pos = std::clamp((tau + rho) / rho * m(), 0.0, static_cast<double>(m()));
    const auto lo = std::min(static_cast<int>(std::floor(pos)), m() - 1);
    const double w = pos - lo;
    return (1.0 - w) * values.col(lo) + w * values.col(lo + 1);
  }
};

/// Sampled solution. The first steps_per_rho + 1 points are the initial
/// history on [start - rho, start]; times[origin] == start.
struct Trajectory {
  int dim = 1;
  double start = 0.0;
  double rho = 0.0;
  double dt = 0.0;
  int steps_per_rho = 0;
  std::size_t origin = 0;
  std::vector<double> times;
  std::vector<double> states;  // dim values per time, contiguous
  ModePath mode_path;
  // Position in `times` of each grid index from first_grid onwards.
  std::int64_t first_grid = 0;
  std::vector<std::size_t> grid_pos;

  std::size_t size() const { return times.size(); }
  double end() const { return times.back(); }

  Eigen::Map<const Eigen::VectorXd> state(std::size_t i) const {
    return Eigen::Map<const Eigen::VectorXd>(states.data() + i * static_cast<std::size_t>(dim),
                                             dim);
  }

  // Exact stored value at a grid index.
  Eigen::Map<const Eigen::VectorXd> at_grid(std::int64_t index) const {
    return state(grid_pos.at(static_cast<std::size_t>(index - first_grid)));
  }

  /// u(t) by linear interpolation between stored points; exact on stored times.
  Eigen::VectorXd value_at(double t) const {
    if (!(t >= times.front() - 1e-12 * dt && t <= times.back() + 1e-12 * dt)) {
      throw Error(ErrorKind::OutOfRange, "t = " + std::to_string(t) + " outside stored history");
    }
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end()) --it;
    const auto hi = static_cast<std::size_t>(it - times.begin());
    if (times[hi] == t || hi == 0) return state(hi);
    const std::size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return (1.0 - w) * state(lo) + w * state(hi);
  }

  // Index of the grid point at t, if t lies on the grid.
  bool grid_index(double t, std::int64_t& index) const {
    const double q = t / dt;
    const auto r = static_cast<std::int64_t>(std::llround(q));
    if (std::abs(q - static_cast<double>(r)) > 1e-9) return false;
    const std::int64_t last = first_grid + static_cast<std::int64_t>(grid_pos.size()) - 1;
    if (r < first_grid || r > last) return false;
    index = r;
    return true;
  }
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

inline std::int64_t aligned_index(double t, double dt, const char* what) {
  const double q = t / dt;
  const auto r = static_cast<std::int64_t>(std::llround(q));
  if (std::abs(q - static_cast<double>(r)) > 1e-9) {
    throw Error(ErrorKind::GridMismatch, std::string(what) + " " + std::to_string(t) +
                                             " is not a multiple of dt = " + std::to_string(dt));
  }
  return r;
}

inline int resolve_steps_per_rho(const HybridDelayModel& m, const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (!m.delay.present()) return 0;
  const double rho = m.delay.rho;
  const int k = cfg.steps_per_rho > 0 ? cfg.steps_per_rho
                                      : static_cast<int>(std::llround(rho / cfg.dt));
  if (k < 1 || std::abs(k * cfg.dt - rho) > 1e-9 * rho) {
    throw Error(ErrorKind::GridMismatch, "dt * steps_per_rho must equal rho = " +
                                             std::to_string(rho));
  }
  return k;
}

// Resample a segment onto k + 1 points; identity when the resolution matches.
inline Eigen::MatrixXd history_columns(const SegmentGrid& xi, double rho, int k, int dim) {
  if (xi.dim() != dim) {
    throw Error(ErrorKind::ShapeMismatch, "initial segment dimension differs from the model");
  }
  if (k == 0) return xi.endpoint();
  if (std::abs(xi.rho - rho) > 1e-12) {
    throw Error(ErrorKind::GridMismatch, "initial segment spans rho = " + std::to_string(xi.rho) +
                                             ", model needs " + std::to_string(rho));
  }
  if (xi.m() == k) return xi.values;
  Eigen::MatrixXd out(dim, k + 1);
  for (int c = 0; c <= k; ++c) out.col(c) = xi.at(-rho + rho * c / k);
  return out;
}

// One Euler-Maruyama run against a given mode path and noise stream.
inline Trajectory run_euler_maruyama(const HybridDelayModel& m, double s, const SegmentGrid& xi,
                                     double t_end, const SimConfig& cfg, int k,
                                     const ModePath& modes, PhiloxStream noise,
                                     std::uint64_t path) {
  const int n = m.dim;
  const double dt = cfg.dt;
  const std::int64_t i_s = aligned_index(s, dt, "start time");
  const double start = static_cast<double>(i_s) * dt;

  double end = t_end;
  {
    const double q = t_end / dt;
    const auto r = static_cast<std::int64_t>(std::llround(q));
    if (std::abs(q - static_cast<double>(r)) <= 1e-9) end = static_cast<double>(r) * dt;
  }
  if (!(end > start)) throw Error(ErrorKind::InvalidArgument, "t_end must exceed the start time");

  Trajectory tr;
  tr.dim = n;
  tr.start = start;
  tr.rho = m.rho();
  tr.dt = dt;
  tr.steps_per_rho = k;
  tr.first_grid = i_s - k;
  tr.mode_path = modes;

  const auto expected = static_cast<std::size_t>((end - start) / dt) + 2 + modes.jump_count();
  tr.times.reserve(expected + static_cast<std::size_t>(k) + 1);
  tr.states.reserve((expected + static_cast<std::size_t>(k) + 1) * static_cast<std::size_t>(n));
  tr.grid_pos.reserve(expected + static_cast<std::size_t>(k) + 1);

  const Eigen::MatrixXd hist = history_columns(xi, m.rho(), k, n);
  for (int c = 0; c <= k; ++c) {
    tr.times.push_back(static_cast<double>(i_s - k + c) * dt);
    tr.grid_pos.push_back(tr.times.size() - 1);
    for (int d = 0; d < n; ++d) tr.states.push_back(hist(d, c));
  }
  tr.origin = tr.times.size() - 1;

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd x = hist.col(k);
  Eigen::VectorXd y(n), f(n), dw(m.noise_dim), next(n);
  Eigen::MatrixXd g(n, m.noise_dim);

  std::int64_t cur_i = i_s;  // last grid index <= current time
  bool on_grid = true;
  double t = start;
  std::size_t jump = 0;
  Mode mode = modes.modes.front();
  const double tie = 1e-12 * dt;

  while (t < end) {
    const double next_grid = static_cast<double>(cur_i + 1) * dt;
    double t_next = std::min(next_grid, end);
    bool next_on_grid = t_next == next_grid;
    bool switches = false;
    if (jump < modes.jump_count()) {
      const double tj = modes.jump_times[jump];
      if (tj < t_next - tie) {
        t_next = tj;
        next_on_grid = false;
        switches = true;
      } else if (tj <= t_next + tie) {
        switches = true;
      }
    }

    // Delayed argument u(t - lag(t)).
    switch (m.delay.kind) {
      case DelaySpec::Kind::None:
        y = x;
        break;
      case DelaySpec::Kind::Sawtooth:
        y = tr.at_grid(floor_div(cur_i, k) * k);
        break;
      case DelaySpec::Kind::Constant:
        if (on_grid) {
          y = tr.at_grid(cur_i - k);
        } else {
          y = tr.value_at(t - m.delay.rho);
        }
        break;
      case DelaySpec::Kind::Tabulated:
        y = tr.value_at(t - m.delay.lag(t));
        break;
    }

    const double h = t_next - t;
    m.drift(t, mode, x, y, f);
    m.diffusion(t, mode, x, y, g);
    if (!f.allFinite() || !g.allFinite()) {
      throw Error(ErrorKind::NonFiniteCoefficient,
                  "coefficient not finite at t = " + std::to_string(t) + ", mode " +
                      std::to_string(mode) + " (path " + std::to_string(path) + ")");
    }
    const double sq = std::sqrt(h);
    for (int c = 0; c < m.noise_dim; ++c) dw(c) = sq * normal(noise);
    next.noalias() = x + h * f;
    next.noalias() += g * dw;
    const double mag = next.norm();
    if (!(mag <= cfg.blowup_guard)) throw BlowupError(t_next, path, mag);
    x = next;

    t = t_next;
    if (next_on_grid) {
      ++cur_i;
      t = static_cast<double>(cur_i) * dt;
    }
    on_grid = next_on_grid;
    tr.times.push_back(t);
    for (int d = 0; d < n; ++d) tr.states.push_back(x(d));
    if (next_on_grid) tr.grid_pos.push_back(tr.times.size() - 1);
    if (switches) {
      mode = modes.modes[jump + 1];
      ++jump;
    }
  }
  tr.mode_path.end_time = std::max(tr.mode_path.end_time, tr.times.back());
  return tr;
}

inline SegmentGrid as_segment(const Eigen::VectorXd& value, const HybridDelayModel& m, int k,
                              Mode j0) {
  return SegmentGrid::constant(value, m.rho(), k, j0);
}

}  // namespace detail

/// Euler-Maruyama from history xi on [s - rho, s] and r(s) = j0. The path
/// index selects the random stream; (model, cfg, path) fixes the result bit
/// for bit.
inline Trajectory integrate(const HybridDelayModel& m, double s, const SegmentGrid& xi, Mode j0,
                            double t_end, const SimConfig& cfg, std::uint64_t path = 0) {
  const int k = detail::resolve_steps_per_rho(m, cfg);
  PhiloxStream mode_rng(cfg.seed, path, kModeSubstream);
  const ModePath modes = sample_mode_path(m.generator, j0, s, t_end, mode_rng);
  return detail::run_euler_maruyama(m, s, xi, t_end, cfg, k, modes,
                                    PhiloxStream(cfg.seed, path, kNoiseSubstream), path);
}

/// Constant initial history xi(tau) = value.
inline Trajectory integrate(const HybridDelayModel& m, double s, const Eigen::VectorXd& value,
                            Mode j0, double t_end, const SimConfig& cfg, std::uint64_t path = 0) {
  const int k = detail::resolve_steps_per_rho(m, cfg);
  return integrate(m, s, detail::as_segment(value, m, k, j0), j0, t_end, cfg, path);
}

/// Restriction of the trajectory to [t - rho, t] on its native resolution,
/// paired with r(t). Grid-aligned t reads stored states without interpolation.
inline SegmentGrid segment_at(const Trajectory& tr, double t) {
  if (!(t >= tr.start - 1e-12 * tr.dt && t <= tr.end() + 1e-12 * tr.dt)) {
    throw Error(ErrorKind::OutOfRange, "segment time " + std::to_string(t) + " outside [" +
                                           std::to_string(tr.start) + ", " +
                                           std::to_string(tr.end()) + "]");
  }
  SegmentGrid seg;
  seg.rho = tr.rho;
  const int k = tr.steps_per_rho;
  seg.values.resize(tr.dim, k + 1);
  std::int64_t idx = 0;
  if (tr.grid_index(t, idx) && idx - k >= tr.first_grid) {
    for (int c = 0; c <= k; ++c) seg.values.col(c) = tr.at_grid(idx - k + c);
  } else {
    for (int c = 0; c <= k; ++c) {
      const double tc = k == 0 ? t : t - tr.rho + tr.rho * c / k;
      seg.values.col(c) = tr.value_at(tc);
    }
  }
  seg.mode = mode_at(tr.mode_path, std::clamp(t, tr.mode_path.start_time, tr.mode_path.end_time));
  return seg;
}

/// Two solutions driven by the same mode path and the same Wiener increments.
inline std::pair<Trajectory, Trajectory> integrate_pair(const HybridDelayModel& m, double s,
                                                        const SegmentGrid& xi1,
                                                        const SegmentGrid& xi2, Mode j0,
                                                        double t_end, const SimConfig& cfg,
                                                        std::uint64_t path = 0) {
  const int k = detail::resolve_steps_per_rho(m, cfg);
  PhiloxStream mode_rng(cfg.seed, path, kModeSubstream);
  const ModePath modes = sample_mode_path(m.generator, j0, s, t_end, mode_rng);
  const PhiloxStream noise(cfg.seed, path, kNoiseSubstream);
  return {detail::run_euler_maruyama(m, s, xi1, t_end, cfg, k, modes, noise, path),
          detail::run_euler_maruyama(m, s, xi2, t_end, cfg, k, modes, noise, path)};
}

/// The sampled-data system (delay rho) and its continuous-observation limit
/// started from xi(0), sharing mode path and Wiener increments.
inline std::pair<Trajectory, Trajectory> integrate_coupled_delay_limit(
    const ControlledModelSpec& spec, const Generator& gen, double s, const SegmentGrid& xi,
    Mode j0, double t_end, const SimConfig& cfg, std::uint64_t path = 0) {
  const HybridDelayModel delayed = build_controlled_model(spec, gen);
  const HybridDelayModel limit = build_limit_model(spec, gen);
  const int k = detail::resolve_steps_per_rho(delayed, cfg);
  PhiloxStream mode_rng(cfg.seed, path, kModeSubstream);
  const ModePath modes = sample_mode_path(gen, j0, s, t_end, mode_rng);
  const PhiloxStream noise(cfg.seed, path, kNoiseSubstream);
  SimConfig limit_cfg = cfg;
  limit_cfg.steps_per_rho = 0;
  return {detail::run_euler_maruyama(delayed, s, xi, t_end, cfg, k, modes, noise, path),
          detail::run_euler_maruyama(limit, s, SegmentGrid::constant(xi.endpoint(), 0.0, 0, j0),
                                     t_end, limit_cfg, 0, modes, noise, path)};
}

/// CSV rows t, u_1..u_n, mode for t >= start.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t";
  for (int d = 0; d < tr.dim; ++d) os << ",u_" << (d + 1);
  os << ",mode\r\n";
  char buf[64];
  for (std::size_t i = tr.origin; i < tr.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", tr.times[i]);
    os << buf;
    const auto u = tr.state(i);
    for (int d = 0; d < tr.dim; ++d) {
      std::snprintf(buf, sizeof buf, ",%.17g", u(d));
      os << buf;
    }
    os << ',' << mode_at(tr.mode_path, std::min(tr.times[i], tr.mode_path.end_time)) << "\r\n";
  }
}

}  // namespace hybridlab
