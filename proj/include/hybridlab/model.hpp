#pragma once

// Hybrid delay SDE models
//   du = f(t, r(t), u(t), u(t - lag(t))) dt + g(t, r(t), u(t), u(t - lag(t))) dW
// plus the sampled-data controlled family f = h(j, x) + A(j) y with a
// sawtooth lag, and sampled/analytic checkers for the standing assumptions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hybridlab/error.hpp"
#include "hybridlab/switching.hpp"

namespace hybridlab {

using VecIn = Eigen::Ref<const Eigen::VectorXd>;
using VecOut = Eigen::Ref<Eigen::VectorXd>;
using MatOut = Eigen::Ref<Eigen::MatrixXd>;

// Coefficients write into caller-owned storage of the declared shape. They
// must be pure: the integrator calls them from several threads at once.
using DriftFn = std::function<void(double t, Mode j, const VecIn& x, const VecIn& y, VecOut out)>;
using DiffusionFn =
    std::function<void(double t, Mode j, const VecIn& x, const VecIn& y, MatOut out)>;

using StateFn = std::function<void(Mode j, const VecIn& x, VecOut out)>;
using NoiseFn = std::function<void(Mode j, const VecIn& x, MatOut out)>;

/// Sawtooth observation lag t - k*rho for k*rho <= t < (k+1)*rho. Uses floor,
/// so negative times wrap into [0, rho) as well.
inline double sawtooth_delay(double t, double rho) {
  double r = t - std::floor(t / rho) * rho;
  if (r >= rho) r -= rho;
  if (r < 0.0) r = 0.0;
  return r;
}

struct DelaySpec {
  enum class Kind { None, Constant, Sawtooth, Tabulated };

  Kind kind = Kind::None;
  double rho = 0.0;
  // Tabulated lag over one period [0, period): linear between knots, extended
  // periodically. Two knots at the same time mark a jump; the later value is
  // in force from that time on.
  double period = 0.0;
  std::vector<double> knot_times;
  std::vector<double> knot_values;

  static DelaySpec none() { return {}; }
  static DelaySpec constant(double rho) { return checked({Kind::Constant, rho, 0.0, {}, {}}); }
  static DelaySpec sawtooth(double rho) { return checked({Kind::Sawtooth, rho, 0.0, {}, {}}); }
  static DelaySpec tabulated(double rho, double period, std::vector<double> times,
                             std::vector<double> values) {
    return checked({Kind::Tabulated, rho, period, std::move(times), std::move(values)});
  }

  bool present() const { return kind != Kind::None; }

  double lag(double t) const {
    switch (kind) {
      case Kind::None: return 0.0;
      case Kind::Constant: return rho;
      case Kind::Sawtooth: return sawtooth_delay(t, rho);
      case Kind::Tabulated: return tabulated_lag(t);
    }
    return 0.0;
  }

 private:
  static DelaySpec checked(DelaySpec d) {
    if (!(d.rho > 0.0 && d.rho <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "delay bound rho must lie in (0, 1]");
    }
    if (d.kind == Kind::Tabulated) {
      const auto& t = d.knot_times;
      if (t.empty() || t.size() != d.knot_values.size() || t.front() != 0.0 ||
          !(d.period > t.back())) {
        throw Error(ErrorKind::InvalidArgument,
                    "tabulated lag needs knots starting at 0 and ending before the period");
      }
      for (std::size_t k = 0; k < t.size(); ++k) {
        if (!(d.knot_values[k] >= 0.0 && d.knot_values[k] <= d.rho)) {
          throw Error(ErrorKind::InvalidArgument, "tabulated lag value outside [0, rho]");
        }
        if (k > 0 && t[k] < t[k - 1]) {
          throw Error(ErrorKind::InvalidArgument, "tabulated knot times must be nondecreasing");
        }
        if (k > 1 && t[k] == t[k - 2]) {
          throw Error(ErrorKind::InvalidArgument, "at most two knots may share a time");
        }
      }
    }
    return d;
  }

  double tabulated_lag(double t) const {
    const double tau = t - std::floor(t / period) * period;
    const auto it = std::upper_bound(knot_times.begin(), knot_times.end(), tau);
    const auto hi = static_cast<std::size_t>(it - knot_times.begin());
    const std::size_t lo = hi - 1;  // knot_times[0] == 0 <= tau
    // Wrap to the first knot at the end of the period.
    const double t1 = hi < knot_times.size() ? knot_times[hi] : period;
    const double v1 = hi < knot_times.size() ? knot_values[hi] : knot_values.front();
    const double w = (tau - knot_times[lo]) / (t1 - knot_times[lo]);
    return std::clamp(knot_values[lo] + w * (v1 - knot_values[lo]), 0.0, rho);
  }
};

struct HybridDelayModel {
  int dim = 1;
  int noise_dim = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  DelaySpec delay;
  Generator generator;

  int n_modes() const { return generator.n_states(); }
  double rho() const { return delay.present() ? delay.rho : 0.0; }
};

struct ControlledModelSpec {
  int dim = 1;
  int noise_dim = 1;
  StateFn h;
  NoiseFn sigma;
  std::vector<Eigen::MatrixXd> gains;  // A(j), one per mode
  double rho = 0.1;
};

namespace detail {

inline void check_gains(const ControlledModelSpec& spec, const Generator& g) {
  if (static_cast<int>(spec.gains.size()) != g.n_states()) {
    throw Error(ErrorKind::ShapeMismatch, "expected one gain matrix per mode (" +
                                              std::to_string(g.n_states()) + "), got " +
                                              std::to_string(spec.gains.size()));
  }
  for (std::size_t j = 0; j < spec.gains.size(); ++j) {
    if (spec.gains[j].rows() != spec.dim || spec.gains[j].cols() != spec.dim) {
      throw Error(ErrorKind::ShapeMismatch,
                  "gain A(" + std::to_string(j + 1) + ") is not dim x dim");
    }
  }
  if (!spec.h || !spec.sigma) {
    throw Error(ErrorKind::InvalidArgument, "controlled spec needs h and sigma");
  }
}

}  // namespace detail

/// Assembles f(t, j, x, y) = h(j, x) + A(j) y and g = sigma(j, x) with the
/// sawtooth lag, so y is the last observation u(floor(t/rho) rho).
inline HybridDelayModel build_controlled_model(const ControlledModelSpec& spec,
                                               const Generator& g) {
  detail::check_gains(spec, g);
  HybridDelayModel m;
  m.dim = spec.dim;
  m.noise_dim = spec.noise_dim;
  m.generator = g;
  m.delay = DelaySpec::sawtooth(spec.rho);
  m.drift = [h = spec.h, gains = spec.gains](double, Mode j, const VecIn& x, const VecIn& y,
                                             VecOut out) {
    h(j, x, out);
    out.noalias() += gains[static_cast<std::size_t>(j - 1)] * y;
  };
  m.diffusion = [sigma = spec.sigma](double, Mode j, const VecIn& x, const VecIn&, MatOut out) {
    sigma(j, x, out);
  };
  return m;
}

/// Continuous-observation companion: f = h(j, x) + A(j) x, no delay.
inline HybridDelayModel build_limit_model(const ControlledModelSpec& spec, const Generator& g) {
  detail::check_gains(spec, g);
  HybridDelayModel m;
  m.dim = spec.dim;
  m.noise_dim = spec.noise_dim;
  m.generator = g;
  m.delay = DelaySpec::none();
  m.drift = [h = spec.h, gains = spec.gains](double, Mode j, const VecIn& x, const VecIn&,
                                             VecOut out) {
    h(j, x, out);
    out.noalias() += gains[static_cast<std::size_t>(j - 1)] * x;
  };
  m.diffusion = [sigma = spec.sigma](double, Mode j, const VecIn& x, const VecIn&, MatOut out) {
    sigma(j, x, out);
  };
  return m;
}

// ---------------------------------------------------------------------------
// Linear coefficient families

/// Per-mode linear pieces: h(j, x) = F_j x + c_j and column k of sigma(j, x)
/// equal to G_{j,k} x + b_{j,k}.
struct LinearCoefficients {
  std::vector<Eigen::MatrixXd> F;               // per mode, n x n
  std::vector<Eigen::VectorXd> offset;          // per mode, n (optional)
  std::vector<std::vector<Eigen::MatrixXd>> G;  // per mode, per noise column, n x n
  std::vector<Eigen::MatrixXd> additive;        // per mode, n x m (optional)

  void check(int dim, int noise_dim, int modes) const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::ShapeMismatch, what); };
    if (static_cast<int>(F.size()) != modes) bad("F needs one matrix per mode");
    if (static_cast<int>(G.size()) != modes) bad("G needs one list per mode");
    if (!offset.empty() && static_cast<int>(offset.size()) != modes) bad("offset per mode");
    if (!additive.empty() && static_cast<int>(additive.size()) != modes) bad("additive per mode");
    for (int j = 0; j < modes; ++j) {
      const auto js = std::to_string(j + 1);
      if (F[j].rows() != dim || F[j].cols() != dim) bad("F(" + js + ") is not dim x dim");
      if (static_cast<int>(G[j].size()) != noise_dim) bad("G(" + js + ") needs noise_dim factors");
      for (const auto& gk : G[j]) {
        if (gk.rows() != dim || gk.cols() != dim) bad("G(" + js + ") factor is not dim x dim");
      }
      if (!offset.empty() && offset[j].size() != dim) bad("offset(" + js + ") length");
      if (!additive.empty() && (additive[j].rows() != dim || additive[j].cols() != noise_dim)) {
        bad("additive(" + js + ") is not dim x noise_dim");
      }
    }
  }

  StateFn drift_fn() const {
    return [F = F, c = offset](Mode j, const VecIn& x, VecOut out) {
      const auto k = static_cast<std::size_t>(j - 1);
      out.noalias() = F[k] * x;
      if (!c.empty()) out += c[k];
    };
  }

  NoiseFn noise_fn() const {
    return [G = G, b = additive](Mode j, const VecIn& x, MatOut out) {
      const auto k = static_cast<std::size_t>(j - 1);
      for (std::size_t col = 0; col < G[k].size(); ++col) {
        out.col(static_cast<Eigen::Index>(col)).noalias() = G[k][col] * x;
      }
      if (!b.empty()) out += b[k];
    };
  }
};

/// General linear model f = F_j x + A_j y + c_j, g = [G_{j,k} x + b_{j,k}]_k.
inline HybridDelayModel build_linear_model(int dim, int noise_dim, const LinearCoefficients& lin,
                                           const std::vector<Eigen::MatrixXd>& delayed,
                                           DelaySpec delay, const Generator& g) {
  lin.check(dim, noise_dim, g.n_states());
  ControlledModelSpec spec;
  spec.dim = dim;
  spec.noise_dim = noise_dim;
  spec.h = lin.drift_fn();
  spec.sigma = lin.noise_fn();
  spec.gains = delayed;
  spec.rho = delay.present() ? delay.rho : 1.0;
  detail::check_gains(spec, g);
  HybridDelayModel m = delay.present() ? build_controlled_model(spec, g) : build_limit_model(spec, g);
  if (delay.present()) m.delay = std::move(delay);
  return m;
}

// Named nonlinear drifts selectable from scenario files.
inline StateFn named_drift(const std::string& name) {
  if (name == "zero") {
    return [](Mode, const VecIn&, VecOut out) { out.setZero(); };
  }
  if (name == "cubic") {
    // -x^3 - x componentwise; one-sided Lipschitz with constant -1.
    return [](Mode, const VecIn& x, VecOut out) {
      out = -x.array().cube() - x.array();
    };
  }
  if (name == "linear_unstable") {
    return [](Mode, const VecIn& x, VecOut out) { out = x; };
  }
  throw Error(ErrorKind::InvalidArgument, "unknown named drift '" + name + "'");
}

// ---------------------------------------------------------------------------
// Assumption checkers. The sampled ones are diagnostics: they can refute but
// never certify a global property.

struct LipschitzEstimate {
  double drift = 0.0;
  double diffusion = 0.0;
};

namespace detail {

inline void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& v, const char* which,
                           double t, Mode j) {
  if (!v.allFinite()) {
    throw Error(ErrorKind::NonFiniteCoefficient, std::string(which) + " not finite at t = " +
                                                     std::to_string(t) + ", mode " +
                                                     std::to_string(j));
  }
}

template <class Urbg>
Eigen::VectorXd uniform_box(int n, double radius, Urbg& rng) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace detail

/// Largest observed |f(t,j,x1,y1) - f(t,j,x2,y2)| / (|x1-x2| + |y1-y2|) (and
/// the Frobenius analogue for g) over random probes in a box. A third of the
/// probes perturb only the state argument and a third only the delayed one.
template <class Urbg>
LipschitzEstimate check_lipschitz_sampled(const HybridDelayModel& m, int probe_count,
                                          double box_radius, Urbg& rng) {
  if (probe_count < 100) {
    throw Error(ErrorKind::InvalidArgument, "probe_count must be at least 100");
  }
  const int n = m.dim;
  std::uniform_int_distribution<int> mode(1, m.n_modes());
  std::uniform_real_distribution<double> time(-box_radius, box_radius);
  Eigen::VectorXd f1(n), f2(n);
  Eigen::MatrixXd g1(n, m.noise_dim), g2(n, m.noise_dim);
  LipschitzEstimate est;
  for (int p = 0; p < probe_count; ++p) {
    const double t = time(rng);
    const Mode j = mode(rng);
    Eigen::VectorXd x1 = detail::uniform_box(n, box_radius, rng);
    Eigen::VectorXd y1 = detail::uniform_box(n, box_radius, rng);
    Eigen::VectorXd x2 = detail::uniform_box(n, box_radius, rng);
    Eigen::VectorXd y2 = detail::uniform_box(n, box_radius, rng);
    if (p % 3 == 1) y2 = y1;
    if (p % 3 == 2) x2 = x1;
    const double denom = (x1 - x2).norm() + (y1 - y2).norm();
    if (denom < 1e-12) continue;
    m.drift(t, j, x1, y1, f1);
    m.drift(t, j, x2, y2, f2);
    m.diffusion(t, j, x1, y1, g1);
    m.diffusion(t, j, x2, y2, g2);
    detail::require_finite(f1, "drift", t, j);
    detail::require_finite(f2, "drift", t, j);
    detail::require_finite(g1, "diffusion", t, j);
    detail::require_finite(g2, "diffusion", t, j);
    est.drift = std::max(est.drift, (f1 - f2).norm() / denom);
    est.diffusion = std::max(est.diffusion, (g1 - g2).norm() / denom);
  }
  return est;
}

struct ZeroBound {
  Mode mode = 1;
  double drift_sup = 0.0;
  double diffusion_sup = 0.0;
};

/// max over the grid of |f(t, j, 0, 0)| and |g(t, j, 0, 0)|, per mode.
inline std::vector<ZeroBound> check_bounded_at_zero(const HybridDelayModel& m,
                                                    const std::vector<double>& t_grid) {
  if (t_grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty time grid");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.dim);
  Eigen::VectorXd f(m.dim);
  Eigen::MatrixXd g(m.dim, m.noise_dim);
  std::vector<ZeroBound> out;
  for (Mode j = 1; j <= m.n_modes(); ++j) {
    ZeroBound b{j, 0.0, 0.0};
    for (double t : t_grid) {
      m.drift(t, j, zero, zero, f);
      m.diffusion(t, j, zero, zero, g);
      detail::require_finite(f, "drift", t, j);
      detail::require_finite(g, "diffusion", t, j);
      b.drift_sup = std::max(b.drift_sup, f.norm());
      b.diffusion_sup = std::max(b.diffusion_sup, g.norm());
    }
    out.push_back(b);
  }
  return out;
}

struct DissipativityResult {
  bool certified = false;
  double beta = 0.0;                    // -max_j lambda_max(M_j); positive iff certified
  Mode worst_mode = 1;                  // mode attaining the max eigenvalue
  std::vector<double> lambda_max;       // per mode
  std::vector<Eigen::MatrixXd> Q;
  std::string verified_on = "analytic-linear";
};

namespace detail {

inline void check_spd(const std::vector<Eigen::MatrixXd>& Q, int dim) {
  for (std::size_t j = 0; j < Q.size(); ++j) {
    const auto& q = Q[j];
    const auto js = std::to_string(j + 1);
    if (q.rows() != dim || q.cols() != dim) {
      throw Error(ErrorKind::ShapeMismatch, "Q(" + js + ") is not dim x dim");
    }
    if (!((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, q.norm()))) {
      throw Error(ErrorKind::NotSPD, "Q(" + js + ") is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) {
      throw Error(ErrorKind::NotSPD, "Q(" + js + ") has a non-positive eigenvalue");
    }
  }
}

}  // namespace detail

inline std::vector<Eigen::MatrixXd> identity_weights(int dim, int modes) {
  return std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(modes),
                                      Eigen::MatrixXd::Identity(dim, dim));
}

/// Exact (A2)-type test for linear drift F_j x + A_j y and diffusion columns
/// G_{j,k} x, evaluated on the diagonal y = x:
///   M_j = Q_j (F_j + A_j) + (F_j + A_j)^T Q_j + sum_k G_{j,k}^T Q_j G_{j,k}
///         + sum_i gamma_ji Q_i,
/// certified with beta = -max_j lambda_max(M_j) when that is positive.
inline DissipativityResult check_dissipativity_linear(
    const std::vector<Eigen::MatrixXd>& F, const std::vector<Eigen::MatrixXd>& A,
    const std::vector<std::vector<Eigen::MatrixXd>>& G, const Generator& gen,
    const std::vector<Eigen::MatrixXd>& Q) {
  const int modes = gen.n_states();
  if (static_cast<int>(F.size()) != modes || static_cast<int>(A.size()) != modes ||
      static_cast<int>(G.size()) != modes || static_cast<int>(Q.size()) != modes) {
    throw Error(ErrorKind::ShapeMismatch, "F, A, G and Q need one entry per mode");
  }
  const auto dim = F.front().rows();
  for (int j = 0; j < modes; ++j) {
    if (F[j].rows() != dim || F[j].cols() != dim || A[j].rows() != dim || A[j].cols() != dim) {
      throw Error(ErrorKind::ShapeMismatch, "F/A shape mismatch in mode " + std::to_string(j + 1));
    }
    for (const auto& gk : G[j]) {
      if (gk.rows() != dim || gk.cols() != dim) {
        throw Error(ErrorKind::ShapeMismatch, "G shape mismatch in mode " + std::to_string(j + 1));
      }
    }
  }
  detail::check_spd(Q, static_cast<int>(dim));

  DissipativityResult res;
  res.Q = Q;
  double worst = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < modes; ++j) {
    const Eigen::MatrixXd B = F[j] + A[j];
    Eigen::MatrixXd M = Q[j] * B + B.transpose() * Q[j];
    for (const auto& gk : G[j]) M += gk.transpose() * Q[j] * gk;
    for (int i = 0; i < modes; ++i) M += gen.rates(j, i) * Q[i];
    M = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    res.lambda_max.push_back(lmax);
    if (lmax > worst) {
      worst = lmax;
      res.worst_mode = j + 1;
    }
  }
  res.beta = -worst;
  res.certified = res.beta > 0.0;
  return res;
}

/// Sampled (A2) diagnostic: min over probes of -LHS / |x - y|^2 with drift
/// evaluated at (t, j, x, x) and (t, j, y, y). Probes with |x - y| < 1e-12 are
/// skipped. Half the probes place y within 1% of the box of x.
template <class Urbg>
double check_dissipativity_sampled(const HybridDelayModel& m, const std::vector<Eigen::MatrixXd>& Q,
                                   int probe_count, double box_radius, Urbg& rng) {
  if (probe_count < 100) {
    throw Error(ErrorKind::InvalidArgument, "probe_count must be at least 100");
  }
  if (static_cast<int>(Q.size()) != m.n_modes()) {
    throw Error(ErrorKind::ShapeMismatch, "Q needs one matrix per mode");
  }
  detail::check_spd(Q, m.dim);
  const int n = m.dim;
  std::uniform_int_distribution<int> mode(1, m.n_modes());
  std::uniform_real_distribution<double> time(-box_radius, box_radius);
  Eigen::VectorXd fx(n), fy(n);
  Eigen::MatrixXd gx(n, m.noise_dim), gy(n, m.noise_dim);
  double best = std::numeric_limits<double>::infinity();
  for (int p = 0; p < probe_count; ++p) {
    const double t = time(rng);
    const Mode j = mode(rng);
    const Eigen::VectorXd x = detail::uniform_box(n, box_radius, rng);
    Eigen::VectorXd y = detail::uniform_box(n, box_radius, rng);
    if (p % 2 == 1) y = x + 0.01 * detail::uniform_box(n, box_radius, rng);
    const Eigen::VectorXd z = x - y;
    const double z2 = z.squaredNorm();
    if (std::sqrt(z2) < 1e-12) continue;
    m.drift(t, j, x, x, fx);
    m.drift(t, j, y, y, fy);
    m.diffusion(t, j, x, x, gx);
    m.diffusion(t, j, y, y, gy);
    detail::require_finite(fx, "drift", t, j);
    detail::require_finite(fy, "drift", t, j);
    detail::require_finite(gx, "diffusion", t, j);
    detail::require_finite(gy, "diffusion", t, j);
    const auto& q = Q[static_cast<std::size_t>(j - 1)];
    const Eigen::MatrixXd dg = gx - gy;
    double lhs = 2.0 * z.dot(q * (fx - fy)) + (dg.transpose() * q * dg).trace();
    for (int i = 0; i < m.n_modes(); ++i) {
      lhs += m.generator.rates(j - 1, i) * z.dot(Q[static_cast<std::size_t>(i)] * z);
    }
    best = std::min(best, -lhs / z2);
  }
  return best;
}

}  // namespace hybridlab
