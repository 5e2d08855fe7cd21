#include <gtest/gtest.h>

#include <cmath>

#include "hybridlab/model.hpp"
#include "hybridlab/rng.hpp"

using namespace hybridlab;

namespace {

Generator single_mode() {
  Generator g;
  g.rates = Eigen::MatrixXd::Zero(1, 1);
  return g;
}

Generator two_state() {
  Generator g;
  g.rates.resize(2, 2);
  g.rates << -1, 1, 2, -2;
  return g;
}

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

ControlledModelSpec scalar_benchmark(double gain, int modes = 1) {
  ControlledModelSpec spec;
  spec.h = [](Mode, const VecIn& x, VecOut out) { out = x; };
  spec.sigma = [](Mode, const VecIn& x, MatOut out) { out(0, 0) = 0.5 * x(0); };
  spec.gains.assign(static_cast<std::size_t>(modes), scalar(gain));
  spec.rho = 0.1;
  return spec;
}

HybridDelayModel from_drift(std::function<double(double, double, double)> f, int modes = 1) {
  HybridDelayModel m;
  m.generator = modes == 1 ? single_mode() : two_state();
  m.drift = [f](double t, Mode, const VecIn& x, const VecIn& y, VecOut out) {
    out(0) = f(t, x(0), y(0));
  };
  m.diffusion = [](double, Mode, const VecIn&, const VecIn&, MatOut out) { out.setZero(); };
  return m;
}

}  // namespace

TEST(SawtoothDelay, Examples) {
  EXPECT_NEAR(sawtooth_delay(0.25, 0.1), 0.05, 1e-15);
  EXPECT_NEAR(sawtooth_delay(-0.03, 0.1), 0.07, 1e-15);
  EXPECT_EQ(sawtooth_delay(0.0, 0.1), 0.0);
  // Dyadic grid: exact.
  EXPECT_EQ(sawtooth_delay(3 * 0.125, 0.125), 0.0);
  EXPECT_EQ(sawtooth_delay(-2 * 0.125, 0.125), 0.0);
}

TEST(SawtoothDelay, PeriodicAndBoundedOnDyadicGrid) {
  const double rho = 0.125, dt = rho / 16;
  for (int i = -500; i < 500; ++i) {
    const double t = i * dt;
    const double lag = sawtooth_delay(t, rho);
    ASSERT_GE(lag, 0.0);
    ASSERT_LT(lag, rho);
    ASSERT_EQ(lag, sawtooth_delay(t + rho, rho));
  }
}

TEST(DelaySpec, TabulatedLagInterpolatesAndWraps) {
  const auto d = DelaySpec::tabulated(0.2, 1.0, {0.0, 0.5, 0.5}, {0.0, 0.2, 0.1});
  EXPECT_NEAR(d.lag(0.25), 0.1, 1e-15);
  EXPECT_NEAR(d.lag(0.5), 0.1, 1e-15);  // right value at a listed jump
  EXPECT_NEAR(d.lag(0.75), 0.05, 1e-15);  // 0.1 -> 0.0 over [0.5, 1)
  EXPECT_NEAR(d.lag(1.25), d.lag(0.25), 1e-15);
  EXPECT_NEAR(d.lag(-0.75), d.lag(0.25), 1e-15);
  EXPECT_THROW(DelaySpec::tabulated(0.2, 1.0, {0.0}, {0.3}), Error);
  EXPECT_THROW(DelaySpec::constant(1.5), Error);
}

TEST(BuildControlledModel, ComposesDrift) {
  const auto m = build_controlled_model(scalar_benchmark(-2.0), single_mode());
  Eigen::VectorXd x(1), y(1), f(1);
  x << 1.0;
  y << 3.0;
  m.drift(0.0, 1, x, y, f);
  EXPECT_DOUBLE_EQ(f(0), -5.0);
  EXPECT_EQ(m.delay.kind, DelaySpec::Kind::Sawtooth);
  EXPECT_DOUBLE_EQ(m.delay.lag(0.25), sawtooth_delay(0.25, 0.1));
  // Observation read at 0.25 is u(0.20).
  EXPECT_NEAR(0.25 - m.delay.lag(0.25), 0.2, 1e-15);
  Eigen::MatrixXd g(1, 1);
  m.diffusion(0.0, 1, x, y, g);
  EXPECT_DOUBLE_EQ(g(0, 0), 0.5);
}

TEST(BuildControlledModel, ZeroGainReducesToUncontrolledDrift) {
  const auto m = build_controlled_model(scalar_benchmark(0.0), single_mode());
  PhiloxStream rng(3, 0);
  std::uniform_real_distribution<double> u(-10, 10);
  Eigen::VectorXd x(1), y(1), f(1);
  for (int k = 0; k < 1000; ++k) {
    x << u(rng);
    y << u(rng);
    m.drift(u(rng), 1, x, y, f);
    ASSERT_EQ(f(0), x(0));
  }
}

TEST(BuildControlledModel, ShapeMismatch) {
  auto spec = scalar_benchmark(-2.0);
  spec.gains = {Eigen::MatrixXd::Identity(2, 2)};
  try {
    build_controlled_model(spec, single_mode());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  spec = scalar_benchmark(-2.0);
  EXPECT_THROW(build_controlled_model(spec, two_state()), Error);  // one gain, two modes
}

TEST(LipschitzSampled, LinearDriftApproachesLargerCoefficient) {
  const double a = 1.5, c = -0.7;
  const auto m = from_drift([&](double, double x, double y) { return a * x + c * y; });
  PhiloxStream rng(5, 0);
  const auto est = check_lipschitz_sampled(m, 600, 4.0, rng);
  EXPECT_LE(est.drift, std::abs(a) + std::abs(c));
  EXPECT_NEAR(est.drift, std::max(std::abs(a), std::abs(c)), 1e-12);
  EXPECT_EQ(est.diffusion, 0.0);
}

TEST(LipschitzSampled, ConstantDriftHasZeroEstimate) {
  const auto m = from_drift([](double, double, double) { return 3.0; });
  PhiloxStream rng(5, 0);
  EXPECT_EQ(check_lipschitz_sampled(m, 300, 2.0, rng).drift, 0.0);
}

TEST(LipschitzSampled, QuadraticDriftGrowsWithBox) {
  const auto m = from_drift([](double, double x, double) { return x * x; });
  double prev = 0.0;
  for (double radius : {1.0, 4.0, 16.0}) {
    PhiloxStream rng(8, 0);
    const double est = check_lipschitz_sampled(m, 3000, radius, rng).drift;
    // Quotient |x1 + x2| <= 2R, approached near the corners.
    EXPECT_LE(est, 2 * radius);
    EXPECT_GT(est, 1.8 * radius);
    EXPECT_GT(est, prev);
    prev = est;
  }
  EXPECT_THROW(
      [&] {
        PhiloxStream rng(1, 0);
        check_lipschitz_sampled(m, 50, 1.0, rng);
      }(),
      Error);
}

TEST(LipschitzSampled, NonFiniteCoefficientIsReported) {
  const auto m = from_drift([](double, double x, double) { return 1.0 / (x - x); });
  PhiloxStream rng(1, 0);
  try {
    check_lipschitz_sampled(m, 100, 1.0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteCoefficient);
  }
}

TEST(BoundedAtZero, AutonomousAndOscillating) {
  const auto autonomous = from_drift([](double, double, double) { return -2.5; }, 2);
  const auto b = check_bounded_at_zero(autonomous, {0.0, 10.0, -3.0});
  ASSERT_EQ(b.size(), 2u);
  EXPECT_DOUBLE_EQ(b[0].drift_sup, 2.5);
  EXPECT_DOUBLE_EQ(b[1].drift_sup, 2.5);

  const auto wave = from_drift([](double t, double, double) { return std::sin(t); });
  double prev = 0.0;
  for (int points : {7, 70, 7000}) {
    std::vector<double> grid;
    for (int i = 0; i < points; ++i) grid.push_back(20.0 * i / (points - 1));
    const double sup = check_bounded_at_zero(wave, grid)[0].drift_sup;
    EXPECT_LE(sup, 1.0);
    EXPECT_GE(sup, prev);
    prev = sup;
  }
  EXPECT_NEAR(prev, 1.0, 1e-4);

  const auto ramp = from_drift([](double t, double, double) { return t; });
  EXPECT_DOUBLE_EQ(check_bounded_at_zero(ramp, {0, 10})[0].drift_sup, 10.0);
  EXPECT_DOUBLE_EQ(check_bounded_at_zero(ramp, {0, 1000})[0].drift_sup, 1000.0);
  EXPECT_THROW(check_bounded_at_zero(ramp, {}), Error);
}

TEST(DissipativityLinear, ScalarBenchmarkCertifies) {
  // M = 2 (1 - 2) + 0.25 = -1.75.
  const auto res = check_dissipativity_linear({scalar(1)}, {scalar(-2)}, {{scalar(0.5)}},
                                              single_mode(), {scalar(1)});
  EXPECT_TRUE(res.certified);
  EXPECT_DOUBLE_EQ(res.beta, 1.75);
  EXPECT_EQ(res.verified_on, "analytic-linear");
}

TEST(DissipativityLinear, EqualWeightsCancelSwitchingTerm) {
  // Two modes, same Q: beta is the worst single-mode value.
  const auto res = check_dissipativity_linear({scalar(1), scalar(0.5)}, {scalar(-2), scalar(-2)},
                                              {{scalar(0.5)}, {scalar(0.3)}}, two_state(),
                                              {scalar(2), scalar(2)});
  const double mode1 = 2 * 2 * (1 - 2) + 0.25 * 2;
  const double mode2 = 2 * 2 * (0.5 - 2) + 0.09 * 2;
  EXPECT_NEAR(res.lambda_max[0], mode1, 1e-12);
  EXPECT_NEAR(res.lambda_max[1], mode2, 1e-12);
  EXPECT_NEAR(res.beta, -std::max(mode1, mode2), 1e-12);
  EXPECT_EQ(res.worst_mode, 1);
}

TEST(DissipativityLinear, UncontrolledIsRefuted) {
  const auto res = check_dissipativity_linear({scalar(1)}, {scalar(0)}, {{scalar(0)}},
                                              single_mode(), {scalar(1)});
  EXPECT_FALSE(res.certified);
  EXPECT_DOUBLE_EQ(res.lambda_max[0], 2.0);
  EXPECT_EQ(res.worst_mode, 1);
}

TEST(DissipativityLinear, RejectsNonSpdWeights) {
  try {
    check_dissipativity_linear({scalar(1)}, {scalar(-2)}, {{scalar(0.5)}}, single_mode(),
                               {scalar(0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSPD);
  }
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(check_dissipativity_linear({Eigen::MatrixXd::Zero(2, 2)}, {Eigen::MatrixXd::Zero(2, 2)},
                                          {{}}, single_mode(), {asym}),
               Error);
}

TEST(DissipativitySampled, BoundedBelowByCertificate) {
  const auto m = build_controlled_model(scalar_benchmark(-2.0), single_mode());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PhiloxStream rng(seed, 0);
    const double est = check_dissipativity_sampled(m, {scalar(1)}, 500, 10.0, rng);
    EXPECT_GE(est, 1.75 - 1e-9);
  }
  // Multi-dimensional certified model, random probes never undercut beta.
  Eigen::MatrixXd F(2, 2), A(2, 2), G(2, 2);
  F << 0.5, 1.0, -1.0, 0.2;
  A << -2.0, 0.0, 0.3, -2.5;
  G << 0.3, 0.1, 0.0, 0.2;
  const auto cert = check_dissipativity_linear({F, F}, {A, A}, {{G}, {G}}, two_state(),
                                               identity_weights(2, 2));
  ASSERT_TRUE(cert.certified);
  LinearCoefficients lin;
  lin.F = {F, F};
  lin.G = {{G}, {G}};
  const auto model = build_linear_model(2, 1, lin, {A, A}, DelaySpec::sawtooth(0.1), two_state());
  PhiloxStream rng(4, 0);
  EXPECT_GE(check_dissipativity_sampled(model, identity_weights(2, 2), 2000, 5.0, rng),
            cert.beta - 1e-6);
}

TEST(DissipativitySampled, ZeroCoefficientsGiveZero) {
  const auto m = from_drift([](double, double, double) { return 0.0; }, 2);
  PhiloxStream rng(1, 0);
  EXPECT_NEAR(check_dissipativity_sampled(m, identity_weights(1, 2), 200, 3.0, rng), 0.0, 1e-12);
}

// For f(x) = -x^3 - x the quotient is 2 (x^2 + xy + y^2) + 2, so the infimum
// over any box around 0 is 2, approached near the origin.
TEST(DissipativitySampled, CubicDriftNearAnalyticInfimum) {
  auto m = from_drift([](double, double x, double) { return -x * x * x - x; });
  PhiloxStream rng(2, 0);
  const double est = check_dissipativity_sampled(m, {scalar(1)}, 2000, 3.0, rng);
  EXPECT_GE(est, 2.0);
  EXPECT_LT(est, 2.05);
}

TEST(NamedDrift, Registry) {
  Eigen::VectorXd x(2), out(2);
  x << 1.0, -2.0;
  named_drift("cubic")(1, x, out);
  EXPECT_DOUBLE_EQ(out(0), -2.0);
  EXPECT_DOUBLE_EQ(out(1), 10.0);
  EXPECT_THROW(named_drift("nope"), Error);
}
