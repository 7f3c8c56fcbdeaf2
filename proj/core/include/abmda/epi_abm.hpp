// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "abmda/rng.hpp"
#include "abmda/status.hpp"

namespace abmda {

/// Shape/scale pair of a Gamma residence-time distribution (mean shape*scale).
struct GammaShape {
  double shape = 1.0;
  double scale = 1.0;

  double mean() const noexcept { return shape * scale; }
  double variance() const noexcept { return shape * scale * scale; }
};

enum class ContactLaw { Poisson, Geometric };

inline constexpr int kMaxHouseSize = 5;
using HouseSizeDistribution = std::array<double, kMaxHouseSize>;

/// Parameters of the household SEIHRD model. Defaults are the reference
/// COVID-19 parameterization (mean 0.5 daily contacts, 4-day incubation, ...).
struct ModelParams {
  /// Mean daily contacts per agent. One entry applies to every location;
  /// otherwise one entry per location.
  std::vector<double> contact_rate{0.5};
  double p_infect_domestic = 0.8;
  double p_infect_casual = 0.16;
  double p_death = 0.4;
  double p_severe = 0.1;
  double p_casual = 0.5;
  /// Probability that a non-severe case is asymptomatic. Only used when the
  /// population has the asymptomatic classes enabled.
  double p_asymptomatic = 0.0;

  GammaShape exposed{1.78, 2.25};
  GammaShape mild{7.11, 1.13};
  GammaShape severe{4.0, 1.0};
  GammaShape hospitalized{9.0, 0.9};

  /// Column-stochastic: entry (i, j) is the probability that a casual contact
  /// initiated in location j lands in location i. Empty means identity.
  Eigen::MatrixXd contact_matrix;
  HouseSizeDistribution house_sizes{0.36, 0.27, 0.16, 0.13, 0.08};

  ContactLaw contact_law = ContactLaw::Poisson;
  /// Success probability of the geometric law on {0, 1, 2, ...}.
  double geometric_p = 0.5;

  double contact_rate_at(int location) const;
  /// Residence-time distribution for a class with a duration. Asymptomatic
  /// infections reuse the mild-case distribution.
  const GammaShape& residence(HealthStatus s) const;

  /// Throws ConfigError naming the offending field.
  void validate(int n_locations) const;
};

struct Agent {
  std::int32_t id = 0;
  std::int32_t house = 0;
  std::int32_t location = 0;
  HealthStatus status = HealthStatus::Susceptible;
  /// Days left in the current class; meaningful only for classes with a duration.
  double remaining_days = 0.0;
  std::int32_t days_in_status = 0;
  /// Contacts with infectious agents while susceptible.
  std::int32_t risky_contacts = 0;
};

struct House {
  std::int32_t id = 0;
  std::int32_t location = 0;
  std::vector<std::int32_t> members;
};

/// Full micro-state of one simulated city. Agents are indexed by id.
struct AgentPopulation {
  std::vector<Agent> agents;
  std::vector<House> houses;
  int n_locations = 1;
  bool asymptomatic = false;

  int n_statuses() const noexcept { return status_count(asymptomatic); }
  std::size_t size() const noexcept { return agents.size(); }
  std::vector<int> location_sizes() const;
  /// True when both populations have the same agents in the same houses.
  bool same_layout(const AgentPopulation& other) const;
};

/// Builds houses by repeatedly drawing a size from `house_sizes` and a
/// location from `location_weights` until every agent is placed; the last
/// house is truncated. All agents start susceptible.
AgentPopulation init_population(int n_agents, int n_locations, const HouseSizeDistribution& house_sizes,
                                std::span<const double> location_weights, Rng& rng,
                                bool asymptomatic = false);

/// Turns the requested number of random susceptible agents per location into
/// exposed agents with a fresh incubation time.
void seed_infections(AgentPopulation& pop, std::span<const int> exposed_per_location,
                     const ModelParams& params, Rng& rng);

/// Draws a residence time for `status`. Throws ContractViolation for classes
/// without a duration (S, R, D, R_A).
double sample_duration(HealthStatus status, const ModelParams& params, Rng& rng);

/// Number of contacts an agent in `location` initiates today.
int sample_num_contacts(const ModelParams& params, int location, Rng& rng);

struct DayStats {
  int new_infections = 0;
  int contacts = 0;
};

/// Advances the population by one day: contact/infection phase followed by
/// the progression phase.
DayStats step_day(AgentPopulation& pop, const ModelParams& params, Rng& rng);

}  // namespace abmda
