// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abmda/config.hpp"
#include "abmda/error.hpp"
#include "abmda/experiments.hpp"
#include "test_support.hpp"

using namespace abmda;
using abmda::testing::AgentSpec;

namespace {

ExperimentConfig small_twin(Scenario scenario = Scenario::VaryingLambda) {
  ExperimentConfig c = scenario_defaults(scenario);
  c.n_agents = 2000;
  c.n_members = 8;
  c.days = 40;
  c.seed = 11;
  return c;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST(Labels, RoundTrip) {
  for (Scenario s : {Scenario::VaryingLambda, Scenario::Microscale, Scenario::Asymptomatic, Scenario::ModelError,
                     Scenario::RealData}) {
    EXPECT_EQ(parse_scenario(scenario_label(s)), s);
  }
  for (AdjustmentMethod m : {AdjustmentMethod::Randomized, AdjustmentMethod::Cascade, AdjustmentMethod::None}) {
    EXPECT_EQ(parse_method(method_label(m)), m);
  }
  EXPECT_FALSE(parse_scenario("bogus"));
  EXPECT_FALSE(parse_method("bogus"));
}

TEST(Matching, IdenticalPopulationsMatchFully) {
  Rng rng(1);
  const std::vector<double> w{0.5, 0.5};
  AgentPopulation pop = init_population(500, 2, ModelParams{}.house_sizes, w, rng);
  for (auto& a : pop.agents) a.status = status_at(uniform_index(rng, 7));
  const MatchReport m = matching_metrics(pop, pop);
  EXPECT_EQ(m.agent_id, 1.0);
  EXPECT_EQ(m.house_id, 1.0);
  EXPECT_EQ(m.household_type, 1.0);
  EXPECT_EQ(m.loc_household_type, 1.0);
}

TEST(Matching, SwapWithinAHouse) {
  const AgentPopulation truth = abmda::testing::make_population(
      {{0, 0, HealthStatus::Mild}, {0, 0, HealthStatus::Susceptible}, {1, 0, HealthStatus::Recovered}}, 1);
  AgentPopulation est = truth;
  std::swap(est.agents[0].status, est.agents[1].status);
  const MatchReport m = matching_metrics(truth, est);
  EXPECT_LT(m.agent_id, 1.0);
  EXPECT_DOUBLE_EQ(m.agent_id, 1.0 / 3.0);
  EXPECT_EQ(m.house_id, 1.0);
}

TEST(Matching, FourAgentToy) {
  // Houses: {0, 1} and {2} in location 0, {3} in location 1.
  const AgentPopulation truth = abmda::testing::make_population({{0, 0, HealthStatus::Susceptible},
                                                                 {0, 0, HealthStatus::Exposed},
                                                                 {1, 0, HealthStatus::Susceptible},
                                                                 {2, 1, HealthStatus::Mild}},
                                                                2);
  AgentPopulation est = truth;
  est.agents[0].status = HealthStatus::Exposed;
  est.agents[1].status = HealthStatus::Susceptible;
  est.agents[2].status = HealthStatus::Mild;
  est.agents[3].status = HealthStatus::Susceptible;
  const MatchReport m = matching_metrics(truth, est);
  EXPECT_DOUBLE_EQ(m.agent_id, 0.0);
  EXPECT_DOUBLE_EQ(m.house_id, 0.5);
  EXPECT_DOUBLE_EQ(m.household_type, 1.0);
  EXPECT_DOUBLE_EQ(m.loc_household_type, 0.5);
}

TEST(Matching, ValuesStayInUnitIntervalAndNest) {
  Rng rng(2);
  const std::vector<double> w{0.3, 0.7};
  const AgentPopulation layout = init_population(300, 2, ModelParams{}.house_sizes, w, rng);
  for (int trial = 0; trial < 50; ++trial) {
    AgentPopulation a = layout;
    AgentPopulation b = layout;
    for (auto& x : a.agents) x.status = status_at(uniform_index(rng, 3));
    for (auto& x : b.agents) x.status = status_at(uniform_index(rng, 3));
    const MatchReport m = matching_metrics(a, b);
    // Coarser groupings can only match more agents.
    EXPECT_LE(m.agent_id, m.house_id);
    EXPECT_LE(m.house_id, m.loc_household_type);
    EXPECT_LE(m.loc_household_type, m.household_type);
    EXPECT_GE(m.agent_id, 0.0);
    EXPECT_LE(m.household_type, 1.0);
  }
}

TEST(Matching, DifferentLayoutsAreRejected) {
  const AgentPopulation a = abmda::testing::make_population({{0, 0}, {0, 0}}, 1);
  const AgentPopulation b = abmda::testing::make_population({{0, 0}, {1, 0}}, 1);
  EXPECT_THROW(matching_metrics(a, b), ContractViolation);
}

TEST(HouseInfections, AllInLargestHouses) {
  std::vector<AgentSpec> specs;
  for (int i = 0; i < 5; ++i) specs.push_back({0, 0, i < 2 ? HealthStatus::Mild : HealthStatus::Susceptible});
  specs.push_back({1, 0, HealthStatus::Recovered});
  const auto shares = infections_by_house_size(abmda::testing::make_population(specs, 1));
  ASSERT_TRUE(shares.has_value());
  EXPECT_EQ(*shares, (std::array<double, 5>{0, 0, 0, 0, 1}));
}

TEST(HouseInfections, EmptyWhenNobodyIsInfected) {
  const AgentPopulation pop = abmda::testing::make_population({{0, 0}, {1, 0, HealthStatus::Dead}}, 1);
  EXPECT_FALSE(infections_by_house_size(pop).has_value());
}

TEST(HouseInfections, SharesSumToOne) {
  Rng rng(3);
  const std::vector<double> w{1.0};
  AgentPopulation pop = init_population(1000, 1, ModelParams{}.house_sizes, w, rng);
  for (auto& a : pop.agents) a.status = status_at(uniform_index(rng, 7));
  const auto shares = infections_by_house_size(pop);
  ASSERT_TRUE(shares.has_value());
  EXPECT_NEAR(std::accumulate(shares->begin(), shares->end(), 0.0), 1.0, 1e-12);
  const auto residents = residents_by_house_size(pop);
  EXPECT_NEAR(std::accumulate(residents.begin(), residents.end(), 0.0), 1.0, 1e-12);
}

TEST(HouseInfections, LargeHousesAreOverrepresented) {
  ExperimentConfig c = small_twin();
  c.n_agents = 6000;
  c.days = 120;
  c.lambda_schedule.reset();
  c.truth.contact_rate = {0.6};
  c.truth.p_infect_casual = 0.05;
  c.truth.p_infect_domestic = 0.9;
  std::vector<double> excess;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    c.seed = seed;
    const TruthRun run = run_truth(c);
    double sum = 0.0;
    int n = 0;
    for (const auto& shares : run.house_infections) {
      if (!shares) continue;
      sum += (*shares)[4];
      ++n;
    }
    ASSERT_GT(n, 0);
    excess.push_back(sum / n - run.resident_share[4]);
  }
  EXPECT_GT(median(excess), 0.0);
}

TEST(DensityMatrix, EqualPopulations) {
  const std::vector<double> w{100, 100, 100};
  const Eigen::MatrixXd c = build_density_contact_matrix(w);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(c(i, j), i == j ? 0.5 : 0.25);
  }
}

TEST(DensityMatrix, ColumnsSumToOne) {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + uniform_index(rng, 14);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& x : w) x = 1.0 + 1e5 * uniform01(rng);
    const Eigen::MatrixXd c = build_density_contact_matrix(w);
    EXPECT_TRUE((c.array() >= 0.0).all());
    for (int j = 0; j < n; ++j) EXPECT_NEAR(c.col(j).sum(), 1.0, 1e-12);
  }
}

TEST(DensityMatrix, CommuneSpotChecks) {
  const std::vector<double> w{205886, 157932, 187537, 218245, 179005, 176076, 220591, 187237,
                              161797, 166022, 189832, 200116, 231331, 225970, 182574};
  const Eigen::MatrixXd c = build_density_contact_matrix(w);
  EXPECT_NEAR(c(1, 0), 0.029418108867790626, 1e-15);
  EXPECT_NEAR(c(14, 0), 0.03400819218668798, 1e-15);
  EXPECT_NEAR(c(0, 7), 0.0380859324418017, 1e-15);
  EXPECT_DOUBLE_EQ(c(6, 6), 0.5);
}

TEST(DensityMatrix, SingleLocationAndBadInput) {
  const std::vector<double> one{42};
  EXPECT_EQ(build_density_contact_matrix(one), Eigen::MatrixXd::Identity(1, 1));
  const std::vector<double> bad{1, 0};
  EXPECT_THROW(build_density_contact_matrix(bad), ConfigError);
}

TEST(Schedule, EndpointsAreExact) {
  const LambdaSchedule s{0.9, 0.3};
  EXPECT_EQ(s.at(0, 150), 0.9);
  EXPECT_EQ(s.at(150, 150), 0.3);
  EXPECT_NEAR(s.at(75, 150), 0.6, 1e-15);
  ExperimentConfig c = small_twin();
  c.lambda_schedule = LambdaSchedule{0.77, 0.21};
  const TruthRun run = run_truth(c);
  ASSERT_EQ(run.contact_rate.size(), static_cast<std::size_t>(c.days + 1));
  EXPECT_EQ(run.contact_rate.front().front(), 0.77);
  EXPECT_EQ(run.contact_rate.back().front(), 0.21);
}

TEST(Truth, FlatWithoutContactsOrSeeds) {
  ExperimentConfig c = small_twin();
  c.lambda_schedule.reset();
  c.truth.contact_rate = {0.0};
  c.seed_exposed = {0, 0, 0, 0};
  const TruthRun run = run_truth(c);
  ASSERT_EQ(run.counts.size(), static_cast<std::size_t>(c.days + 1));
  for (const auto& counts : run.counts) {
    EXPECT_EQ(counts.col(0).sum(), c.n_agents);
  }
}

TEST(Truth, ConservesLocationSizes) {
  ExperimentConfig c = small_twin();
  const TruthRun run = run_truth(c, true);
  const auto sizes = run.populations.front().location_sizes();
  for (const auto& counts : run.counts) {
    for (int l = 0; l < c.n_locations; ++l) EXPECT_EQ(counts.row(l).sum(), sizes[l]);
  }
  ASSERT_EQ(run.populations.size(), run.counts.size());
  EXPECT_EQ(aggregate(run.populations.back()), run.counts.back());
}

TEST(Truth, FinalSizeGrowsWithContactRate) {
  ExperimentConfig c = small_twin();
  c.lambda_schedule.reset();
  c.days = 150;
  std::vector<double> medians;
  for (double lambda : {0.3, 0.5, 0.8}) {
    c.truth.contact_rate = {lambda};
    std::vector<double> final_sizes;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      c.seed = seed;
      const TruthRun run = run_truth(c);
      final_sizes.push_back(c.n_agents - run.counts.back().col(0).sum());
    }
    medians.push_back(median(final_sizes));
  }
  EXPECT_LT(medians[0], medians[1]);
  EXPECT_LT(medians[1], medians[2]);
}

TEST(Truth, TestingRecordsPositivity) {
  ExperimentConfig c = small_twin(Scenario::Asymptomatic);
  const TruthRun run = run_truth(c);
  ASSERT_EQ(run.tests.size(), static_cast<std::size_t>(c.days + 1));
  for (std::size_t t = 1; t < run.tests.size(); ++t) {
    EXPECT_EQ(run.tests[t].tested, static_cast<int>(std::floor(c.testing_fraction * c.n_agents)));
  }
}

TEST(Twin, Deterministic) {
  const ExperimentConfig c = small_twin();
  const RunArtifacts a = run_twin(c);
  const RunArtifacts b = run_twin(c);
  ASSERT_EQ(a.ensemble.mean.size(), b.ensemble.mean.size());
  for (std::size_t t = 0; t < a.ensemble.mean.size(); ++t) {
    EXPECT_EQ(a.ensemble.mean[t], b.ensemble.mean[t]);
    EXPECT_EQ(a.ensemble.param_mean[t], b.ensemble.param_mean[t]);
  }
  EXPECT_EQ(a.relabels.size(), b.relabels.size());
}

TEST(Twin, ShapesOfTheArtifacts) {
  const ExperimentConfig c = small_twin();
  const RunArtifacts a = run_twin(c);
  const auto n = static_cast<std::size_t>(c.days);
  EXPECT_EQ(a.days.size(), n);
  EXPECT_EQ(a.days.front(), 1);
  EXPECT_EQ(a.truth.size(), n);
  EXPECT_EQ(a.observations.size(), n);
  EXPECT_EQ(a.relabels.size(), n * c.n_members);
  EXPECT_EQ(a.innovations.size(), n * 2 * c.n_locations);
  EXPECT_EQ(a.param_names, std::vector<std::string>{"lambda"});
  EXPECT_TRUE(std::isnan(a.observed_incidence.front()(0)));
  for (std::size_t t = 0; t < n; ++t) {
    EXPECT_NEAR(a.param_truth[t](0), c.lambda_schedule->at(static_cast<int>(t + 1), c.days), 1e-15);
    EXPECT_TRUE((a.ensemble.incidence_mean[t].array() >= 0.0).all());
    EXPECT_TRUE((a.ensemble.param_mean[t].array() >= 0.0).all());
    EXPECT_TRUE((a.ensemble.param_mean[t].array() <= 3.0).all());
  }
}

TEST(Twin, NoAssimilationEqualsControl) {
  ExperimentConfig c = small_twin();
  c.method = AdjustmentMethod::None;
  c.control = true;
  const RunArtifacts a = run_twin(c);
  ASSERT_TRUE(a.control.has_value());
  for (std::size_t t = 0; t < a.ensemble.mean.size(); ++t) {
    EXPECT_EQ(a.ensemble.mean[t], a.control->mean[t]);
    EXPECT_EQ(a.ensemble.std[t], a.control->std[t]);
    EXPECT_EQ(a.ensemble.param_mean[t], a.control->param_mean[t]);
  }
  EXPECT_TRUE(a.innovations.empty());
}

TEST(Twin, ObservedDeathsAreTighterThanUnobservedClasses) {
  ExperimentConfig c = small_twin();
  c.n_agents = 4000;
  c.n_members = 20;
  c.days = 60;
  const RunArtifacts a = run_twin(c);
  // Day of the truth's largest mild-case count.
  std::size_t peak = 0;
  for (std::size_t t = 0; t < a.truth.size(); ++t) {
    if (a.truth[t].col(2).sum() > a.truth[peak].col(2).sum()) peak = t;
  }
  const RealMatrix& sd = a.ensemble.std[peak];
  const double deaths = sd.col(index_of(HealthStatus::Dead)).mean();
  const double exposed = sd.col(index_of(HealthStatus::Exposed)).mean();
  EXPECT_LT(deaths, 0.5 * exposed) << "deaths std " << deaths << " exposed std " << exposed;
}

TEST(Twin, MicroscaleTracksMatchesFromDayZero) {
  ExperimentConfig c = small_twin(Scenario::Microscale);
  c.n_agents = 1000;
  c.days = 10;
  const RunArtifacts a = run_twin(c);
  ASSERT_FALSE(a.matches.empty());
  EXPECT_EQ(a.matches.front().day, 0);
  EXPECT_EQ(a.matches.front().mean.agent_id, 1.0);
  EXPECT_EQ(a.matches.front().mean.household_type, 1.0);
  bool has_control = false;
  for (const auto& m : a.matches) {
    has_control = has_control || m.group == "control";
    EXPECT_GE(m.mean.agent_id, 0.0);
    EXPECT_LE(m.mean.household_type, 1.0);
  }
  EXPECT_TRUE(has_control);
}

TEST(Twin, AsymptomaticRunObservesPositivity) {
  ExperimentConfig c = small_twin(Scenario::Asymptomatic);
  c.days = 15;
  const RunArtifacts a = run_twin(c);
  const ObservationBatch& b = a.observations.back();
  EXPECT_EQ(b.kinds.back(), ObsKind::Positivity);
  EXPECT_EQ(b.locations.back(), -1);
  EXPECT_GT(b.n_tested, 0);
  EXPECT_EQ(a.ensemble.mean.front().cols(), 9);
  EXPECT_NE(std::find(a.param_names.begin(), a.param_names.end(), "q_A"), a.param_names.end());
}

TEST(Config, ValidateRejectsBadFields) {
  ExperimentConfig c = small_twin();
  c.n_members = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_twin();
  c.seed_exposed = {1, 2};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_twin();
  c.testing_fraction = 0.01;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_twin();
  c.params.push_back(ParamSpec{"q_A", 0.1, 0.9, 0.005, 0, 1});
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_twin();
  c.truth.p_death = 2.0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("truth.", 0), 0u) << e.what();
  }
  c = small_twin();
  c.scenario = Scenario::RealData;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(run_twin(scenario_defaults(Scenario::RealData)), ConfigError);
}
