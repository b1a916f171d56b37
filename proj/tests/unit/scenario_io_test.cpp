#include <gtest/gtest.h>

#include <string>

#include "relarb/error.hpp"
#include "relarb/scenario_io.hpp"

using namespace relarb;

namespace {

const char* kMinimal = R"({
  "schema_version": 1,
  "n": 2, "N": 3, "T": 0.5, "steps": 10, "delta": 0.4,
  "x0": [1.0, 2.0],
  "market": {"kind": "volatility_stabilized", "zeta": 0.3}
})";

std::string with(const std::string& extra) {
  std::string s = kMinimal;
  s.insert(s.rfind('}'), ", " + extra);
  return s;
}

}  // namespace

TEST(ScenarioIo, ParsesMinimalDocument) {
  const auto cfg = parse_scenario(kMinimal);
  EXPECT_EQ(cfg.n, 2u);
  EXPECT_EQ(cfg.N, 3u);
  EXPECT_EQ(cfg.market.kind, MarketKind::volatility_stabilized);
  EXPECT_DOUBLE_EQ(cfg.market.zeta, 0.3);
  EXPECT_EQ(cfg.solver.measure, SamplingMeasure::deflated);
}

TEST(ScenarioIo, UnknownKeyNamesPath) {
  try {
    parse_scenario(with(R"("solver": {"pathz": 10})"));
    FAIL() << "accepted unknown key";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("solver.pathz"), std::string::npos) << e.what();
  }
}

TEST(ScenarioIo, MissingRequiredKeyRejected) {
  EXPECT_THROW(parse_scenario(R"({"schema_version": 1, "n": 1})"), ConfigError);
}

TEST(ScenarioIo, WrongSchemaVersionRejected) {
  std::string s = kMinimal;
  s.replace(s.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
  EXPECT_THROW(parse_scenario(s), ConfigError);
}

TEST(ScenarioIo, PopulationLawForms) {
  const auto cfg = parse_scenario(
      with(R"("c": [0.1, 0.2, 0.3], "v0": {"law": "lognormal", "log_mean": 0.0, "log_sd": 0.2})"));
  EXPECT_TRUE(cfg.c_law.is_list());
  EXPECT_EQ(cfg.c_law.values.size(), 3u);
  EXPECT_EQ(cfg.v0_law.kind, PopulationLaw::Kind::lognormal);
  EXPECT_DOUBLE_EQ(cfg.v0_law.b, 0.2);
}

TEST(ScenarioIo, ResolvedConfigRoundTrips) {
  const auto cfg = parse_scenario(with(R"("c": {"law": "uniform", "low": -0.1, "high": 0.1}, "seed": 5)"));
  const std::string once = resolved_config_json(cfg);
  const std::string twice = resolved_config_json(parse_scenario(once));
  EXPECT_EQ(once, twice);
}

TEST(ScenarioIo, CanonicalJsonSortsAndFormats) {
  const std::string out = canonical_json(R"({"b": [1, 2], "a": {"y": 0.1, "x": true}})");
  EXPECT_EQ(out, "{\n  \"a\": {\n    \"x\": true,\n    \"y\": 0.10000000000000001\n  },\n  \"b\": [1, 2]\n}\n");
}
