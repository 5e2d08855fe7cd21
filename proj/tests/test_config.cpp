#include <gtest/gtest.h>

#include <string>

#include "hybridlab/config.hpp"

using namespace hybridlab;

namespace {

const char* kBenchmark = R"({
  "scenario": "bench",
  "model": {
    "kind": "controlled",
    "generator": [[-1, 1], [2, -2]],
    "drift": {"type": "linear", "F": [1, 1]},
    "diffusion": {"G": [[0.5], [0.5]]},
    "gains": [-2, -2],
    "rho": 0.1
  },
  "sim": {"dt": 0.01, "seed": 7},
  "rho_ladder": [0.4, 0.2, 0.1, 0.05]
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return s.replace(pos, from.size(), to);
}

void expect_validation(const std::string& text, const std::string& field) {
  try {
    parse_config_text(text);
    FAIL() << "expected ValidationError for " << field;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
    EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(ParseConfig, MinimalBenchmarkRecordsCertificate) {
  const auto cfg = parse_config_text(kBenchmark);
  EXPECT_EQ(cfg.scenario, "bench");
  ASSERT_TRUE(cfg.controlled.has_value());
  EXPECT_EQ(cfg.model.delay.kind, DelaySpec::Kind::Sawtooth);
  EXPECT_EQ(cfg.sim.steps_per_rho, 10);
  EXPECT_EQ(cfg.sim.seed, 7u);
  const auto& cert = cfg.provenance["certificate"];
  EXPECT_TRUE(cert["certified"].get<bool>());
  EXPECT_NEAR(cert["beta"].get<double>(), 1.75, 1e-12);
  EXPECT_EQ(cfg.suites.size(), known_suites().size());
  EXPECT_NEAR(cfg.provenance["stationary_distribution"][0].get<double>(), 2.0 / 3.0, 1e-12);

  Eigen::VectorXd x(1), y(1), f(1);
  x << 1.0;
  y << 0.5;
  cfg.model.drift(0.0, 2, x, y, f);
  EXPECT_DOUBLE_EQ(f(0), 0.0);
}

TEST(ParseConfig, LadderOffGrid) {
  expect_validation(replace(kBenchmark, "[0.4, 0.2, 0.1, 0.05]", "[0.4, 0.2, 0.105]"),
                    "rho ladder / grid alignment");
  expect_validation(replace(kBenchmark, "[0.4, 0.2, 0.1, 0.05]", "[0.2, 0.4]"), "rho ladder");
}

TEST(ParseConfig, MissingOrInvalidGenerator) {
  expect_validation(replace(kBenchmark, R"("generator": [[-1, 1], [2, -2]],)", ""), "generator");
  expect_validation(replace(kBenchmark, "[[-1, 1], [2, -2]]", "[[-1, 0.5], [2, -2]]"), "generator");
  expect_validation(replace(kBenchmark, "[[-1, 1], [2, -2]]", "[[-1, 1], [0, 0]]"), "generator");
}

TEST(ParseConfig, MalformedJsonReportsLine) {
  try {
    parse_config_text("{\n  \"scenario\": \"x\",\n  \"model\": {,\n}", "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find("bad.json:3:"), std::string::npos) << e.what();
  }
}

TEST(ParseConfig, FieldErrorsNameTheField) {
  expect_validation(replace(kBenchmark, R"("gains": [-2, -2])", R"("gains": [-2])"), "model.gains");
  expect_validation(replace(kBenchmark, R"("seed": 7)", R"("seed": "x")"), "sim.seed");
  expect_validation(replace(kBenchmark, R"("rho": 0.1)", R"("rho": 0.1, "x": 1}, "samples": {"M": 0)"),
                    "samples.M");
  expect_validation(replace(kBenchmark, R"("scenario": "bench")", R"("scenario": "a/b")"), "scenario");
  expect_validation(replace(kBenchmark, R"("rho": 0.1)", R"("rho": 0.1}, "suites": ["nope"], "y": {)"),
                    "suites");
  expect_validation(replace(kBenchmark, R"("rho": 0.1)", R"("rho": 0.105)"), "rho / grid alignment");
}

TEST(ParseConfig, OverridesApply) {
  ConfigOverrides ov;
  ov.seed = 99;
  ov.output_dir = "elsewhere";
  ov.atom_cap = 50;
  ov.dt_per_rho = 20;
  const auto cfg = parse_config_text(kBenchmark, "<test>", ov);
  EXPECT_EQ(cfg.sim.seed, 99u);
  EXPECT_EQ(cfg.output_dir, "elsewhere");
  EXPECT_EQ(cfg.bl.atom_cap, 50u);
  EXPECT_DOUBLE_EQ(cfg.sim.dt, 0.005);
  EXPECT_EQ(cfg.sim.steps_per_rho, 20);
  ov.dt_per_rho = 0;
  try {
    parse_config_text(kBenchmark, "<test>", ov);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
  }
}

TEST(ParseConfig, InitialSegmentsAndMetric) {
  const auto cfg = parse_config_text(replace(kBenchmark, R"("rho": 0.1)", R"("rho": 0.1},
    "metric": {"mode_metric": "discrete"},
    "initial": {"mode": 2, "resolution": 4, "segments": [
      {"type": "constant", "value": 3},
      {"type": "affine", "from": 0, "to": 1},
      {"type": "samples", "values": [0, 2, 1]}]},
    "z": {)"));
  EXPECT_EQ(cfg.metric.mode_metric, ModeMetric::Discrete);
  EXPECT_EQ(cfg.initial_mode, 2);
  ASSERT_EQ(cfg.initial_segments.size(), 3u);
  EXPECT_EQ(cfg.initial_segments[0].values(0, 2), 3.0);
  EXPECT_DOUBLE_EQ(cfg.initial_segments[1].values(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(cfg.initial_segments[2].at(-0.25)(0), 1.5);
  expect_validation(replace(kBenchmark, R"("rho": 0.1)", R"("rho": 0.1}, "initial": {"mode": 3)"),
                    "initial.mode");
}

TEST(ParseConfig, GeneralModelWithNamedDriftAndTabulatedDelay) {
  const char* text = R"({
    "scenario": "general",
    "model": {
      "kind": "general",
      "dim": 2, "noise_dim": 1,
      "generator": [[0]],
      "drift": {"type": "named", "name": "cubic"},
      "diffusion": {"additive": [[[0.3], [0.1]]]},
      "delayed": [[[-1, 0], [0, -1]]],
      "delay": {"kind": "tabulated", "rho": 0.2, "period": 0.5, "knots": [[0, 0], [0.25, 0.2]]}
    },
    "suites": ["existence"]
  })";
  const auto cfg = parse_config_text(text);
  EXPECT_FALSE(cfg.controlled.has_value());
  EXPECT_EQ(cfg.model.delay.kind, DelaySpec::Kind::Tabulated);
  EXPECT_EQ(cfg.provenance["certificate"]["verified_on"], "not-linear");
  Eigen::VectorXd x(2), y(2), f(2);
  x << 1.0, 2.0;
  y << 1.0, 1.0;
  cfg.model.drift(0.0, 1, x, y, f);
  EXPECT_DOUBLE_EQ(f(0), -3.0);
  EXPECT_DOUBLE_EQ(f(1), -11.0);
  Eigen::MatrixXd g(2, 1);
  cfg.model.diffusion(0.0, 1, x, y, g);
  EXPECT_DOUBLE_EQ(g(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(g(1, 0), 0.1);

  std::string bad = text;
  bad.replace(bad.find("\"suites\": [\"existence\"]"), 23, "\"suites\": [\"endpoint\"]");
  expect_validation(bad, "suites");
}

TEST(ParseConfig, UncertifiedModelIsRecorded) {
  const auto cfg = parse_config_text(replace(kBenchmark, R"("gains": [-2, -2])", R"("gains": [0, 0])"));
  EXPECT_FALSE(cfg.provenance["certificate"]["certified"].get<bool>());
  EXPECT_NEAR(cfg.provenance["certificate"]["beta"].get<double>(), -2.25, 1e-12);
}

TEST(ParseConfig, MissingFile) {
  try {
    parse_config("/nonexistent/config.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  }
}
