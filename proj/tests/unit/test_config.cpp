// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <string>

#include "abmda/config.hpp"
#include "abmda/error.hpp"
#include "test_support.hpp"

using namespace abmda;
using abmda::testing::TempDir;

namespace {

// Message of the ConfigError thrown by parse_config, or "" when none is thrown.
std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyObjectGivesReferenceParameters) {
  const ExperimentConfig c = parse_config("{}");
  EXPECT_EQ(c.scenario, Scenario::VaryingLambda);
  const ModelParams& m = c.model;
  ASSERT_EQ(m.contact_rate.size(), 1u);
  EXPECT_EQ(m.contact_rate[0], 0.5);
  EXPECT_EQ(m.p_infect_domestic, 0.8);
  EXPECT_EQ(m.p_infect_casual, 0.16);
  EXPECT_EQ(m.p_death, 0.4);
  EXPECT_EQ(m.p_severe, 0.1);
  EXPECT_EQ(m.p_casual, 0.5);
  EXPECT_EQ(m.exposed.shape, 1.78);
  EXPECT_EQ(m.exposed.scale, 2.25);
  EXPECT_EQ(m.mild.shape, 7.11);
  EXPECT_EQ(m.mild.scale, 1.13);
  EXPECT_EQ(m.severe.shape, 4.0);
  EXPECT_EQ(m.severe.scale, 1.0);
  EXPECT_EQ(m.hospitalized.shape, 9.0);
  EXPECT_EQ(m.hospitalized.scale, 0.9);
  EXPECT_EQ(m.house_sizes[0], 0.36);
  EXPECT_EQ(m.house_sizes[4], 0.08);
  EXPECT_EQ(c.n_locations, 4);
  EXPECT_EQ(c.method, AdjustmentMethod::Randomized);
  EXPECT_FALSE(c.params.empty());
}

TEST(Config, OutOfRangeValueNamesKeyAndBound) {
  const std::string msg = config_error(R"({"model": {"q_S": 1.5}})");
  EXPECT_NE(msg.find("model.q_S"), std::string::npos) << msg;
  EXPECT_NE(msg.find("1.5"), std::string::npos) << msg;
  EXPECT_NE(msg.find("[0, 1]"), std::string::npos) << msg;
}

TEST(Config, WrongLengthContactRate) {
  const std::string msg = config_error(R"({"n_locations": 4, "model": {"lambda": [0.5, 0.6]}})");
  EXPECT_NE(msg.find("lambda"), std::string::npos) << msg;
  EXPECT_TRUE(config_error(R"({"n_locations": 2, "model": {"lambda": [0.5, 0.6]}})").empty());
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  EXPECT_NE(config_error(R"({"bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(config_error(R"({"model": {"lamda": 1}})").find("model.lamda"), std::string::npos);
  EXPECT_FALSE(config_error(R"({"scenario": "nope"})").empty());
  EXPECT_FALSE(config_error(R"({"method": "magic"})").empty());
  EXPECT_FALSE(config_error(R"({"n_members": 1})").empty());
  EXPECT_FALSE(config_error(R"({"seed": -4})").empty());
  EXPECT_FALSE(config_error(R"({"data": {"reports": "x.csv"}})").empty());
  EXPECT_FALSE(config_error("{not json").empty());
  EXPECT_FALSE(config_error(R"({"params": [{"name": "lambda", "prior": [0.2]}]})").empty());
}

TEST(Config, ScenarioPresets) {
  const ExperimentConfig asym = parse_config(R"({"scenario": "asymptomatic"})");
  EXPECT_TRUE(asym.asymptomatic());
  EXPECT_GT(asym.truth.p_asymptomatic, 0.0);
  const ExperimentConfig err = parse_config(R"({"scenario": "model_error"})");
  EXPECT_EQ(err.truth.contact_law, ContactLaw::Geometric);
  EXPECT_EQ(err.model.contact_law, ContactLaw::Poisson);
}

TEST(Config, EchoRoundTrips) {
  for (const char* text : {"{}", R"({"scenario": "microscale", "seed": 7, "method": "cascade"})",
                           R"({"scenario": "asymptomatic", "n_agents": 5000, "control": true})",
                           R"({"scenario": "model_error", "model": {"lambda": 0.7, "q_S": 0.2}})"}) {
    const ExperimentConfig c = parse_config(text);
    const std::string echo = config_echo(c);
    const ExperimentConfig back = parse_config(echo);
    EXPECT_EQ(config_echo(back), echo) << text;
    EXPECT_EQ(back.seed, c.seed);
    EXPECT_EQ(back.method, c.method);
    EXPECT_EQ(back.model.contact_rate, c.model.contact_rate);
    EXPECT_EQ(back.params.size(), c.params.size());
  }
}

TEST(Config, MissingFileNamesThePath) {
  try {
    load_config("/nonexistent/abmda/run.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/abmda/run.json"), std::string::npos);
  }
}

TEST(Config, DataPathsResolveAgainstTheConfigFile) {
  TempDir dir("config");
  std::filesystem::create_directories(dir / "cfg");
  {
    std::ofstream out(dir / "cfg/run.json");
    out << R"({"scenario": "realdata", "data": {"reports": "../data/r.csv", "census": "/abs/c.csv", "scale": 50}})";
  }
  const ExperimentConfig c = load_config(dir / "cfg/run.json");
  EXPECT_EQ(std::filesystem::path(c.data_reports), (dir / "data/r.csv").lexically_normal());
  EXPECT_EQ(c.data_census, "/abs/c.csv");
  EXPECT_EQ(c.data_scale, 50.0);
}
