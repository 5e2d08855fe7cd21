#pragma once

// Continuous-time Markov chain r(t) on S = {1, ..., N}: generator checks,
// stationary law, and exact (Gillespie) path sampling.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridlab/error.hpp"
#include "hybridlab/rng.hpp"

namespace hybridlab {

// Modes are 1-based throughout.
using Mode = int;

struct Generator {
  Eigen::MatrixXd rates;  // N x N, off-diagonal rates per unit time, rows sum to 0

  int n_states() const { return static_cast<int>(rates.rows()); }
  double exit_rate(Mode i) const { return -rates(i - 1, i - 1); }
};

inline constexpr double kRowSumTolerance = 1e-12;

inline void validate_generator(const Generator& g) {
  const auto n = g.rates.rows();
  if (n < 1 || g.rates.cols() != n) {
    throw Error(ErrorKind::ShapeMismatch, "generator must be a non-empty square matrix");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && !(g.rates(i, j) > 0.0)) {
        throw Error(ErrorKind::NonPositiveRate,
                    "r(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                        ") = " + std::to_string(g.rates(i, j)));
      }
    }
    const double sum = g.rates.row(i).sum();
    if (!(std::abs(sum) <= kRowSumTolerance)) {
      throw Error(ErrorKind::RowSumViolation,
                  "row " + std::to_string(i + 1) + " sums to " + std::to_string(sum));
    }
  }
}

// Solves pi * Gamma = 0 with sum(pi) = 1 by replacing one balance equation
// with the normalisation.
inline Eigen::VectorXd stationary_distribution(const Generator& g) {
  const auto n = g.rates.rows();
  Eigen::MatrixXd a = g.rates.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::SingularSystem, "stationary balance system is singular");
  }
  Eigen::VectorXd pi = lu.solve(b);
  const double residual = (pi.transpose() * g.rates).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-10) || !(pi.minCoeff() > 0.0)) {
    throw Error(ErrorKind::SingularSystem,
                "stationary solve degenerate (residual " + std::to_string(residual) + ")");
  }
  return pi;
}

// Right-continuous step path: modes[k] is in force on [jump_times[k-1], jump_times[k]).
struct ModePath {
  double start_time = 0.0;
  double end_time = 0.0;
  std::vector<double> jump_times;
  std::vector<Mode> modes;

  std::size_t jump_count() const { return jump_times.size(); }
};

inline Mode mode_at(const ModePath& p, double t) {
  if (!(t >= p.start_time && t <= p.end_time)) {
    throw Error(ErrorKind::OutOfRange, "t = " + std::to_string(t) + " outside [" +
                                           std::to_string(p.start_time) + ", " +
                                           std::to_string(p.end_time) + "]");
  }
  const auto it = std::upper_bound(p.jump_times.begin(), p.jump_times.end(), t);
  return p.modes[static_cast<std::size_t>(it - p.jump_times.begin())];
}

// Gillespie simulation: Exponential(-r_ii) holding times, jump to j with
// probability r_ij / (-r_ii). A state with zero exit rate is absorbing.
template <class Urbg>
ModePath sample_mode_path(const Generator& g, Mode j0, double s, double t_end, Urbg& rng) {
  const int n = g.n_states();
  if (j0 < 1 || j0 > n) {
    throw Error(ErrorKind::InvalidArgument, "initial mode " + std::to_string(j0) + " not in S");
  }
  if (!(t_end > s)) {
    throw Error(ErrorKind::InvalidArgument, "t_end must exceed the start time");
  }
  ModePath path;
  path.start_time = s;
  path.end_time = t_end;
  path.modes.push_back(j0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Mode current = j0;
  double t = s;
  for (;;) {
    const double exit = g.exit_rate(current);
    if (!(exit > 0.0)) break;
    std::exponential_distribution<double> hold(exit);
    t += hold(rng);
    if (!(t < t_end)) break;
    double u = unif(rng) * exit;
    Mode next = current;
    for (Mode j = 1; j <= n; ++j) {
      if (j == current) continue;
      next = j;
      u -= g.rates(current - 1, j - 1);
      if (u < 0.0) break;
    }
    if (!path.jump_times.empty() && !(t > path.jump_times.back())) continue;
    path.jump_times.push_back(t);
    path.modes.push_back(next);
    current = next;
  }
  return path;
}

// Fraction of [start, end] spent in each mode.
inline Eigen::VectorXd occupation_fractions(const ModePath& p, int n_states) {
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(n_states);
  double left = p.start_time;
  for (std::size_t k = 0; k < p.modes.size(); ++k) {
    const double right = k < p.jump_times.size() ? p.jump_times[k] : p.end_time;
    occ(p.modes[k] - 1) += right - left;
    left = right;
  }
  return occ / (p.end_time - p.start_time);
}

// CSV (t, mode): one row per change point plus the closing time.
inline void write_mode_path_csv(std::ostream& os, const ModePath& p) {
  char buf[64];
  os << "t,mode\r\n";
  auto row = [&](double t, Mode m) {
    std::snprintf(buf, sizeof buf, "%.17g,%d\r\n", t, m);
    os << buf;
  };
  row(p.start_time, p.modes.front());
  for (std::size_t k = 0; k < p.jump_times.size(); ++k) row(p.jump_times[k], p.modes[k + 1]);
  row(p.end_time, p.modes.back());
}

}  // namespace hybridlab
