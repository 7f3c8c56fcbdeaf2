// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "abmda/error.hpp"
#include "abmda/epi_abm.hpp"
#include "abmda/macro_map.hpp"
#include "test_support.hpp"

using namespace abmda;
using abmda::testing::sample_mean;

namespace {

const std::vector<double> kOneLocation{1.0};
const std::vector<double> kFourLocations{0.25, 0.25, 0.25, 0.25};

std::map<int, int> house_size_histogram(const AgentPopulation& pop) {
  std::map<int, int> h;
  for (const auto& house : pop.houses) ++h[static_cast<int>(house.members.size())];
  return h;
}

AgentPopulation seeded_city(int n_agents, std::uint64_t seed, int exposed = 10) {
  Rng rng(seed);
  ModelParams params;
  AgentPopulation pop = init_population(n_agents, 4, params.house_sizes, kFourLocations, rng);
  const std::vector<int> seeds(4, exposed);
  seed_infections(pop, seeds, params, rng);
  return pop;
}

}  // namespace

TEST(ModelParams, DefaultsAreValid) {
  ModelParams p;
  EXPECT_NO_THROW(p.validate(1));
  EXPECT_NO_THROW(p.validate(4));
  EXPECT_DOUBLE_EQ(p.contact_rate_at(3), 0.5);
  EXPECT_DOUBLE_EQ(p.exposed.mean(), 1.78 * 2.25);
}

TEST(ModelParams, ValidationNamesTheField) {
  ModelParams p;
  p.p_severe = 1.5;
  try {
    p.validate(1);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("q_S"), std::string::npos) << e.what();
  }
  ModelParams q;
  q.contact_rate = {0.5, 0.5, 0.5};
  EXPECT_THROW(q.validate(4), ConfigError);
  ModelParams r;
  r.house_sizes = {0.5, 0.5, 0.5, 0.0, 0.0};
  EXPECT_THROW(r.validate(1), ConfigError);
  ModelParams c;
  c.contact_matrix = Eigen::MatrixXd::Constant(2, 2, 0.4);
  EXPECT_THROW(c.validate(2), ConfigError);
}

TEST(InitPopulation, SizeTwoHouses) {
  Rng rng(1);
  const AgentPopulation pop = init_population(10, 1, {0, 1, 0, 0, 0}, kOneLocation, rng);
  ASSERT_EQ(pop.houses.size(), 5u);
  for (const auto& h : pop.houses) EXPECT_EQ(h.members.size(), 2u);
  for (const auto& a : pop.agents) {
    EXPECT_EQ(a.status, HealthStatus::Susceptible);
    EXPECT_EQ(a.days_in_status, 0);
    EXPECT_EQ(a.risky_contacts, 0);
  }
}

TEST(InitPopulation, SingleAgentIsTruncatedHouse) {
  Rng rng(2);
  const AgentPopulation pop = init_population(1, 1, {0.2, 0.2, 0.2, 0.2, 0.2}, kOneLocation, rng);
  ASSERT_EQ(pop.houses.size(), 1u);
  EXPECT_EQ(pop.houses[0].members.size(), 1u);
}

TEST(InitPopulation, StructureIsConsistent) {
  Rng rng(3);
  const AgentPopulation pop = init_population(5000, 4, ModelParams{}.house_sizes, kFourLocations, rng);
  EXPECT_EQ(pop.size(), 5000u);
  for (std::size_t i = 0; i < pop.agents.size(); ++i) EXPECT_EQ(pop.agents[i].id, static_cast<int>(i));
  int placed = 0;
  for (const auto& h : pop.houses) {
    EXPECT_GE(h.members.size(), 1u);
    EXPECT_LE(h.members.size(), static_cast<std::size_t>(kMaxHouseSize));
    for (int m : h.members) {
      EXPECT_EQ(pop.agents[m].house, h.id);
      EXPECT_EQ(pop.agents[m].location, h.location);
    }
    placed += static_cast<int>(h.members.size());
  }
  EXPECT_EQ(placed, 5000);
  const auto sizes = pop.location_sizes();
  EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), 0), 5000);
}

TEST(InitPopulation, HouseSizeHistogramMatchesDistribution) {
  const ModelParams params;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const AgentPopulation pop = init_population(30000, 1, params.house_sizes, kOneLocation, rng);
    const auto hist = house_size_histogram(pop);
    const double n_houses = static_cast<double>(pop.houses.size());
    for (int s = 1; s <= kMaxHouseSize; ++s) {
      const double share = hist.count(s) ? hist.at(s) / n_houses : 0.0;
      EXPECT_NEAR(share, params.house_sizes[s - 1], 0.02) << "size " << s << " seed " << seed;
    }
  }
}

TEST(InitPopulation, RejectsBadInput) {
  Rng rng(4);
  EXPECT_THROW(init_population(0, 1, ModelParams{}.house_sizes, kOneLocation, rng), ConfigError);
  EXPECT_THROW(init_population(10, 1, {0, 0, 0, 0, 0}, kOneLocation, rng), ConfigError);
  const std::vector<double> bad{0.5, 0.6};
  EXPECT_THROW(init_population(10, 2, ModelParams{}.house_sizes, bad, rng), ConfigError);
}

TEST(SeedInfections, ExactCountsPerLocation) {
  Rng rng(5);
  ModelParams params;
  AgentPopulation pop = init_population(400, 4, params.house_sizes, kFourLocations, rng);
  const std::vector<int> seeds{3, 0, 0, 0};
  seed_infections(pop, seeds, params, rng);
  const CountMatrix counts = aggregate(pop);
  EXPECT_EQ(counts.col(index_of(HealthStatus::Exposed)).sum(), 3);
  EXPECT_EQ(counts(0, index_of(HealthStatus::Exposed)), 3);
  for (const auto& a : pop.agents) {
    if (a.status == HealthStatus::Exposed) EXPECT_GT(a.remaining_days, 0.0);
  }
}

TEST(SeedInfections, ZeroSeedLeavesPopulationUnchanged) {
  Rng rng(6);
  ModelParams params;
  AgentPopulation pop = init_population(200, 4, params.house_sizes, kFourLocations, rng);
  const AgentPopulation before = pop;
  const std::vector<int> seeds(4, 0);
  seed_infections(pop, seeds, params, rng);
  ASSERT_EQ(pop.agents.size(), before.agents.size());
  for (std::size_t i = 0; i < pop.agents.size(); ++i) {
    EXPECT_EQ(pop.agents[i].status, before.agents[i].status);
    EXPECT_EQ(pop.agents[i].remaining_days, before.agents[i].remaining_days);
  }
}

TEST(SeedInfections, TooManyIsAnErrorNamingTheLocation) {
  Rng rng(7);
  ModelParams params;
  AgentPopulation pop = init_population(20, 1, params.house_sizes, kOneLocation, rng);
  const std::vector<int> seeds{21};
  try {
    seed_infections(pop, seeds, params, rng);
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("location 0"), std::string::npos) << e.what();
  }
}

TEST(SampleDuration, MeansMatchGammaParameters) {
  const ModelParams params;
  Rng rng(8);
  const int n = 100000;
  for (HealthStatus s : {HealthStatus::Exposed, HealthStatus::Mild, HealthStatus::Severe, HealthStatus::Hospitalized,
                         HealthStatus::Asymptomatic}) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = sample_duration(s, params, rng);
      sum += d;
      sum_sq += d * d;
    }
    const GammaShape& g = params.residence(s);
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    EXPECT_NEAR(mean, g.mean(), 3.0 * std::sqrt(g.variance() / n)) << status_label(s);
    EXPECT_NEAR(var, g.variance(), 0.05 * g.variance()) << status_label(s);
  }
}

TEST(SampleDuration, PublishedMeans) {
  const ModelParams params;
  Rng rng(9);
  for (auto [status, expected] : {std::pair{HealthStatus::Exposed, 4.005}, std::pair{HealthStatus::Hospitalized, 8.1}}) {
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += sample_duration(status, params, rng);
    EXPECT_NEAR(sum / 100000, expected, 0.05);
  }
}

TEST(SampleDuration, ClassesWithoutDurationAreRejected) {
  const ModelParams params;
  Rng rng(10);
  for (HealthStatus s : {HealthStatus::Susceptible, HealthStatus::Recovered, HealthStatus::Dead,
                         HealthStatus::RecoveredAsymptomatic}) {
    EXPECT_THROW(sample_duration(s, params, rng), ContractViolation);
  }
}

TEST(SampleNumContacts, ZeroRateGivesNoContacts) {
  ModelParams params;
  params.contact_rate = {0.0};
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_num_contacts(params, 0, rng), 0);
}

TEST(SampleNumContacts, PoissonMean) {
  ModelParams params;
  Rng rng(12);
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) sum += sample_num_contacts(params, 0, rng);
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(SampleNumContacts, GeometricMeanOnSupportFromZero) {
  ModelParams params;
  params.contact_law = ContactLaw::Geometric;
  params.geometric_p = 0.5;
  // Brute-force expectation of k (1-p)^k p over k >= 0.
  double expected = 0.0;
  for (int k = 0; k < 200; ++k) expected += k * std::pow(0.5, k) * 0.5;
  Rng rng(13);
  double sum = 0.0;
  int zeros = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const int k = sample_num_contacts(params, 0, rng);
    sum += k;
    zeros += (k == 0);
  }
  EXPECT_NEAR(sum / n, expected, 0.01);
  EXPECT_NEAR(static_cast<double>(zeros) / n, 0.5, 0.005);
}

TEST(SampleNumContacts, PerLocationRates) {
  ModelParams params;
  params.contact_rate = {0.0, 2.0};
  Rng rng(14);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    EXPECT_EQ(sample_num_contacts(params, 0, rng), 0);
    sum += sample_num_contacts(params, 1, rng);
  }
  EXPECT_NEAR(sum / 100000, 2.0, 0.03);
}

TEST(StepDay, NoInfectiousAgentsOnlyCountersChange) {
  Rng rng(15);
  ModelParams params;
  params.contact_rate = {5.0};
  AgentPopulation pop = init_population(300, 1, params.house_sizes, kOneLocation, rng);
  pop.agents[0].status = HealthStatus::Recovered;
  pop.agents[1].status = HealthStatus::Dead;
  const CountMatrix before = aggregate(pop);
  for (int d = 0; d < 5; ++d) step_day(pop, params, rng);
  EXPECT_EQ(aggregate(pop), before);
  for (const auto& a : pop.agents) EXPECT_EQ(a.days_in_status, 5);
}

TEST(StepDay, ForcedSevereBranch) {
  ModelParams params;
  params.p_severe = 1.0;
  AgentPopulation pop = abmda::testing::make_population({{0, 0, HealthStatus::Exposed}}, 1);
  pop.agents[0].remaining_days = 1.0;
  Rng rng(16);
  step_day(pop, params, rng);
  EXPECT_EQ(pop.agents[0].status, HealthStatus::Severe);
  EXPECT_EQ(pop.agents[0].days_in_status, 0);
  EXPECT_GT(pop.agents[0].remaining_days, 0.0);
}

TEST(StepDay, AsymptomaticBranchFollowsNonSevere) {
  ModelParams params;
  params.p_severe = 0.0;
  params.p_asymptomatic = 1.0;
  AgentPopulation pop = abmda::testing::make_population({{0, 0, HealthStatus::Exposed}}, 1, true);
  pop.agents[0].remaining_days = 0.5;
  Rng rng(17);
  step_day(pop, params, rng);
  EXPECT_EQ(pop.agents[0].status, HealthStatus::Asymptomatic);
  // Without the extension the same draw leads to a mild case.
  AgentPopulation base = abmda::testing::make_population({{0, 0, HealthStatus::Exposed}}, 1, false);
  base.agents[0].remaining_days = 0.5;
  step_day(base, params, rng);
  EXPECT_EQ(base.agents[0].status, HealthStatus::Mild);
}

namespace {

// Ten agents in one location, agent 0 mild and long-lived, the rest
// susceptible. With beta = 1 a susceptible agent j escapes only if agent 0
// never picks it and it never picks agent 0. Each of the Poisson(lambda)
// contacts of an agent picks a given other agent with probability 1/9, so
// P(escape) = exp(-lambda/9)^2 and E[new E] = 9 (1 - exp(-2 lambda / 9)).
double expected_new_exposures(double lambda) { return 9.0 * (1.0 - std::exp(-2.0 * lambda / 9.0)); }

double mean_new_exposures(bool one_house, double lambda, int reps) {
  ModelParams params;
  params.contact_rate = {lambda};
  params.p_infect_casual = 1.0;
  params.p_infect_domestic = 1.0;
  params.p_casual = one_house ? 0.0 : 1.0;
  std::vector<abmda::testing::AgentSpec> specs;
  for (int i = 0; i < 10; ++i) {
    specs.push_back({one_house ? 0 : i, 0, i == 0 ? HealthStatus::Mild : HealthStatus::Susceptible});
  }
  const AgentPopulation initial = abmda::testing::make_population(specs, 1);
  Rng rng(18);
  double total = 0.0;
  for (int r = 0; r < reps; ++r) {
    AgentPopulation pop = initial;
    pop.agents[0].remaining_days = 100.0;
    total += step_day(pop, params, rng).new_infections;
  }
  return total / reps;
}

}  // namespace

TEST(StepDay, CasualExposureMatchesExactExpectation) {
  const int reps = 40000;
  const double expected = expected_new_exposures(3.0);
  // Variance of a count bounded by 9 is at most 81/4.
  EXPECT_NEAR(mean_new_exposures(false, 3.0, reps), expected, 4.0 * std::sqrt(81.0 / 4.0 / reps));
}

TEST(StepDay, DomesticExposureMatchesExactExpectation) {
  const int reps = 40000;
  const double expected = expected_new_exposures(2.0);
  EXPECT_NEAR(mean_new_exposures(true, 2.0, reps), expected, 4.0 * std::sqrt(81.0 / 4.0 / reps));
}

TEST(StepDay, SingleOccupantDomesticContactIsNoOp) {
  ModelParams params;
  params.contact_rate = {10.0};
  params.p_casual = 0.0;
  params.p_infect_domestic = 1.0;
  AgentPopulation pop = abmda::testing::make_population(
      {{0, 0, HealthStatus::Mild}, {1, 0, HealthStatus::Susceptible}}, 1);
  pop.agents[0].remaining_days = 100.0;
  Rng rng(19);
  for (int d = 0; d < 10; ++d) EXPECT_EQ(step_day(pop, params, rng).new_infections, 0);
  EXPECT_EQ(pop.agents[1].status, HealthStatus::Susceptible);
}

TEST(StepDay, HospitalizedAgentsDoNotTransmit) {
  ModelParams params;
  params.contact_rate = {10.0};
  params.p_infect_casual = 1.0;
  params.p_infect_domestic = 1.0;
  AgentPopulation pop = abmda::testing::make_population(
      {{0, 0, HealthStatus::Hospitalized}, {0, 0, HealthStatus::Susceptible}, {1, 0, HealthStatus::Susceptible}}, 1);
  pop.agents[0].remaining_days = 100.0;
  Rng rng(20);
  for (int d = 0; d < 10; ++d) step_day(pop, params, rng);
  EXPECT_EQ(pop.agents[1].status, HealthStatus::Susceptible);
  EXPECT_EQ(pop.agents[2].status, HealthStatus::Susceptible);
}

TEST(StepDay, RiskyContactsCountEncounters) {
  ModelParams params;
  params.contact_rate = {5.0};
  params.p_infect_casual = 0.0;
  params.p_infect_domestic = 0.0;
  AgentPopulation pop = abmda::testing::make_population(
      {{0, 0, HealthStatus::Mild}, {0, 0, HealthStatus::Susceptible}}, 1);
  pop.agents[0].remaining_days = 100.0;
  Rng rng(21);
  for (int d = 0; d < 10; ++d) step_day(pop, params, rng);
  EXPECT_EQ(pop.agents[1].status, HealthStatus::Susceptible);
  EXPECT_GT(pop.agents[1].risky_contacts, 0);
}

TEST(StepDay, NoTransmissionKeepsSusceptiblesConstant) {
  ModelParams params;
  params.p_infect_casual = 0.0;
  params.p_infect_domestic = 0.0;
  params.contact_rate = {2.0};
  AgentPopulation pop = seeded_city(3000, 22, 30);
  Rng rng(23);
  const auto s0 = aggregate(pop).col(0).eval();
  for (int d = 0; d < 30; ++d) {
    step_day(pop, params, rng);
    EXPECT_EQ(aggregate(pop).col(0), s0);
  }
}

TEST(StepDay, ConservationMonotonicityAndLegalFlows) {
  ModelParams params;
  params.contact_rate = {1.2};
  AgentPopulation pop = seeded_city(4000, 24);
  const auto sizes = pop.location_sizes();
  Rng rng(25);
  CountMatrix prev = aggregate(pop);
  for (int d = 0; d < 80; ++d) {
    const AgentPopulation before = pop;
    step_day(pop, params, rng);
    const CountMatrix now = aggregate(pop);
    for (int l = 0; l < pop.n_locations; ++l) EXPECT_EQ(now.row(l).sum(), sizes[l]);
    for (int l = 0; l < pop.n_locations; ++l) {
      EXPECT_GE(now(l, index_of(HealthStatus::Dead)), prev(l, index_of(HealthStatus::Dead)));
      EXPECT_GE(now(l, index_of(HealthStatus::Recovered)), prev(l, index_of(HealthStatus::Recovered)));
    }
    for (std::size_t i = 0; i < pop.agents.size(); ++i) {
      const HealthStatus a = before.agents[i].status;
      const HealthStatus b = pop.agents[i].status;
      if (a == b) continue;
      // Within one day an agent can be exposed and, with a short incubation,
      // leave E in the progression phase.
      const bool legal = is_forward_arc(a, b) ||
                         (a == HealthStatus::Susceptible && is_forward_arc(HealthStatus::Exposed, b));
      EXPECT_TRUE(legal) << status_label(a) << " -> " << status_label(b);
    }
    prev = now;
  }
}

TEST(StepDay, ResidenceTimesFollowTheirGammaLaws) {
  ModelParams params;
  // Seeded cases only: an agent exposed during the contact phase with a
  // residence below one day leaves E before it can be observed in E.
  params.p_infect_casual = 0.0;
  params.p_infect_domestic = 0.0;
  params.p_severe = 0.3;
  AgentPopulation pop = seeded_city(8000, 26, 1000);
  Rng rng(27);
  std::map<HealthStatus, std::vector<double>> completed;
  for (int d = 0; d < 300; ++d) {
    const AgentPopulation before = pop;
    step_day(pop, params, rng);
    for (std::size_t i = 0; i < pop.agents.size(); ++i) {
      const Agent& a = before.agents[i];
      if (!has_duration(a.status) || pop.agents[i].status == a.status) continue;
      // days_in_status + remaining_days is constant during a stay and equals
      // the drawn residence time.
      completed[a.status].push_back(a.days_in_status + a.remaining_days);
    }
  }
  for (HealthStatus s : {HealthStatus::Exposed, HealthStatus::Mild, HealthStatus::Severe, HealthStatus::Hospitalized}) {
    const auto& v = completed[s];
    ASSERT_GT(v.size(), 100u) << status_label(s);
    const GammaShape& g = params.residence(s);
    EXPECT_NEAR(sample_mean(v), g.mean(), 3.0 * std::sqrt(g.variance() / v.size())) << status_label(s);
  }
}

TEST(StepDay, ContactMatrixRoutesCasualContacts) {
  // Location 0 sends every casual contact to location 1; location 1 keeps its own.
  ModelParams params;
  params.contact_rate = {5.0};
  params.p_casual = 1.0;
  params.p_infect_casual = 1.0;
  params.contact_matrix = (Eigen::MatrixXd(2, 2) << 0.0, 0.0, 1.0, 1.0).finished();
  AgentPopulation pop = abmda::testing::make_population(
      {{0, 0, HealthStatus::Mild}, {1, 0, HealthStatus::Susceptible}, {2, 1, HealthStatus::Recovered}}, 2);
  pop.agents[0].remaining_days = 100.0;
  AgentPopulation local = pop;
  Rng rng(28);
  // Both location-0 agents only ever meet the recovered agent in location 1.
  for (int d = 0; d < 20; ++d) step_day(pop, params, rng);
  EXPECT_EQ(pop.agents[1].status, HealthStatus::Susceptible);
  EXPECT_EQ(pop.agents[1].risky_contacts, 0);
  params.contact_matrix = Eigen::MatrixXd::Identity(2, 2);
  step_day(local, params, rng);
  EXPECT_NE(local.agents[1].status, HealthStatus::Susceptible);
}

TEST(StepDay, SameSeedSameTrajectory) {
  ModelParams params;
  params.contact_rate = {1.0};
  AgentPopulation a = seeded_city(2000, 29);
  AgentPopulation b = a;
  Rng ra(30);
  Rng rb(30);
  for (int d = 0; d < 40; ++d) {
    step_day(a, params, ra);
    step_day(b, params, rb);
  }
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    EXPECT_EQ(a.agents[i].status, b.agents[i].status);
    EXPECT_EQ(a.agents[i].remaining_days, b.agents[i].remaining_days);
    EXPECT_EQ(a.agents[i].risky_contacts, b.agents[i].risky_contacts);
  }
}
