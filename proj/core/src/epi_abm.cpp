// SPDX-License-Identifier: Apache-2.0
#include "abmda/epi_abm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "abmda/error.hpp"

namespace abmda {

namespace {

constexpr double kSumTolerance = 1e-6;

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(p));
  }
}

void require_gamma(const GammaShape& g, const char* name) {
  if (!(g.shape > 0.0 && g.scale > 0.0) || !std::isfinite(g.shape) || !std::isfinite(g.scale)) {
    throw ConfigError(std::string(name) + " Gamma shape and scale must be positive");
  }
}

// Per-location contact-count sampler built once per simulated day.
class ContactCounter {
 public:
  ContactCounter(const ModelParams& params, int n_locations) : law_(params.contact_law) {
    if (law_ == ContactLaw::Geometric) {
      always_zero_ = params.geometric_p >= 1.0;
      if (!always_zero_) geometric_ = std::geometric_distribution<int>(params.geometric_p);
      return;
    }
    poisson_.reserve(n_locations);
    for (int loc = 0; loc < n_locations; ++loc) {
      const double rate = params.contact_rate_at(loc);
      poisson_.emplace_back(rate > 0.0 ? rate : 1.0);
      zero_rate_.push_back(rate <= 0.0);
    }
  }

  int operator()(int location, Rng& rng) {
    if (law_ == ContactLaw::Geometric) return always_zero_ ? 0 : geometric_(rng);
    if (zero_rate_[location]) return 0;
    return poisson_[location](rng);
  }

 private:
  ContactLaw law_;
  bool always_zero_ = false;
  std::geometric_distribution<int> geometric_;
  std::vector<std::poisson_distribution<int>> poisson_;
  std::vector<bool> zero_rate_;
};

void enter_status(Agent& agent, HealthStatus status, const ModelParams& params, Rng& rng) {
  agent.status = status;
  agent.days_in_status = 0;
  agent.remaining_days = has_duration(status) ? sample_duration(status, params, rng) : 0.0;
}

HealthStatus next_status(HealthStatus current, const ModelParams& params, bool asymptomatic, Rng& rng) {
  switch (current) {
    case HealthStatus::Exposed:
      if (bernoulli(rng, params.p_severe)) return HealthStatus::Severe;
      if (asymptomatic && bernoulli(rng, params.p_asymptomatic)) return HealthStatus::Asymptomatic;
      return HealthStatus::Mild;
    case HealthStatus::Mild:
      return HealthStatus::Recovered;
    case HealthStatus::Asymptomatic:
      return HealthStatus::RecoveredAsymptomatic;
    case HealthStatus::Severe:
      return HealthStatus::Hospitalized;
    case HealthStatus::Hospitalized:
      return bernoulli(rng, params.p_death) ? HealthStatus::Dead : HealthStatus::Recovered;
    default:
      return current;
  }
}

}  // namespace

double ModelParams::contact_rate_at(int location) const {
  if (contact_rate.size() == 1) return contact_rate.front();
  return contact_rate.at(static_cast<std::size_t>(location));
}

const GammaShape& ModelParams::residence(HealthStatus s) const {
  switch (s) {
    case HealthStatus::Exposed:
      return exposed;
    case HealthStatus::Mild:
    case HealthStatus::Asymptomatic:
      return mild;
    case HealthStatus::Severe:
      return severe;
    case HealthStatus::Hospitalized:
      return hospitalized;
    default:
      throw ContractViolation("class " + std::string(status_label(s)) + " has no residence time");
  }
}

void ModelParams::validate(int n_locations) const {
  if (n_locations <= 0) throw ConfigError("n_locations must be positive");
  if (contact_rate.empty() ||
      (contact_rate.size() != 1 && contact_rate.size() != static_cast<std::size_t>(n_locations))) {
    throw ConfigError("lambda must have 1 or " + std::to_string(n_locations) + " entries, got " +
                      std::to_string(contact_rate.size()));
  }
  for (double rate : contact_rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("lambda must be non-negative and finite");
  }
  require_probability(p_infect_domestic, "beta_d");
  require_probability(p_infect_casual, "beta_c");
  require_probability(p_death, "q_D");
  require_probability(p_severe, "q_S");
  require_probability(p_casual, "q_C");
  require_probability(p_asymptomatic, "q_A");
  require_gamma(exposed, "E");
  require_gamma(mild, "I_M");
  require_gamma(severe, "I_S");
  require_gamma(hospitalized, "H");

  double total = 0.0;
  for (double p : house_sizes) {
    require_probability(p, "p_H entry");
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) throw ConfigError("p_H must sum to 1");

  if (contact_law == ContactLaw::Geometric && !(geometric_p > 0.0 && geometric_p <= 1.0)) {
    throw ConfigError("geometric contact parameter must lie in (0, 1]");
  }

  if (contact_matrix.size() == 0) return;
  if (contact_matrix.rows() != n_locations || contact_matrix.cols() != n_locations) {
    throw ConfigError("contact_matrix must be " + std::to_string(n_locations) + "x" +
                      std::to_string(n_locations));
  }
  if ((contact_matrix.array() < 0.0).any()) throw ConfigError("contact_matrix entries must be non-negative");
  for (int j = 0; j < n_locations; ++j) {
    if (std::abs(contact_matrix.col(j).sum() - 1.0) > kSumTolerance) {
      throw ConfigError("contact_matrix column " + std::to_string(j) + " must sum to 1");
    }
  }
}

std::vector<int> AgentPopulation::location_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(n_locations), 0);
  for (const auto& a : agents) ++sizes[static_cast<std::size_t>(a.location)];
  return sizes;
}

bool AgentPopulation::same_layout(const AgentPopulation& other) const {
  if (agents.size() != other.agents.size() || houses.size() != other.houses.size() ||
      n_locations != other.n_locations) {
    return false;
  }
  for (std::size_t k = 0; k < agents.size(); ++k) {
    if (agents[k].house != other.agents[k].house || agents[k].location != other.agents[k].location) {
      return false;
    }
  }
  return true;
}

AgentPopulation init_population(int n_agents, int n_locations, const HouseSizeDistribution& house_sizes,
                                std::span<const double> location_weights, Rng& rng, bool asymptomatic) {
  if (n_agents <= 0) throw ConfigError("population needs at least one agent");
  if (n_locations <= 0) throw ConfigError("population needs at least one location");
  const double size_total = std::accumulate(house_sizes.begin(), house_sizes.end(), 0.0);
  if (std::abs(size_total - 1.0) > kSumTolerance) throw ConfigError("p_H must sum to 1");
  if (location_weights.size() != static_cast<std::size_t>(n_locations)) {
    throw ConfigError("location_weights must have one entry per location");
  }
  const double weight_total = std::accumulate(location_weights.begin(), location_weights.end(), 0.0);
  if (std::abs(weight_total - 1.0) > kSumTolerance) throw ConfigError("location_weights must sum to 1");

  std::discrete_distribution<int> draw_size(house_sizes.begin(), house_sizes.end());
  std::discrete_distribution<int> draw_location(location_weights.begin(), location_weights.end());

  AgentPopulation pop;
  pop.n_locations = n_locations;
  pop.asymptomatic = asymptomatic;
  pop.agents.reserve(static_cast<std::size_t>(n_agents));

  int placed = 0;
  while (placed < n_agents) {
    const int size = std::min(draw_size(rng) + 1, n_agents - placed);
    const int location = draw_location(rng);
    House house;
    house.id = static_cast<std::int32_t>(pop.houses.size());
    house.location = location;
    for (int m = 0; m < size; ++m) {
      Agent agent;
      agent.id = placed;
      agent.house = house.id;
      agent.location = location;
      house.members.push_back(agent.id);
      pop.agents.push_back(agent);
      ++placed;
    }
    pop.houses.push_back(std::move(house));
  }
  return pop;
}

void seed_infections(AgentPopulation& pop, std::span<const int> exposed_per_location, const ModelParams& params,
                     Rng& rng) {
  if (exposed_per_location.size() != static_cast<std::size_t>(pop.n_locations)) {
    throw ConfigError("seed counts must have one entry per location");
  }
  std::vector<std::vector<std::int32_t>> susceptible(static_cast<std::size_t>(pop.n_locations));
  for (const auto& a : pop.agents) {
    if (a.status == HealthStatus::Susceptible) susceptible[static_cast<std::size_t>(a.location)].push_back(a.id);
  }
  for (int loc = 0; loc < pop.n_locations; ++loc) {
    const int wanted = exposed_per_location[static_cast<std::size_t>(loc)];
    auto& pool = susceptible[static_cast<std::size_t>(loc)];
    if (wanted < 0 || static_cast<std::size_t>(wanted) > pool.size()) {
      throw ConfigError("location " + std::to_string(loc) + " has " + std::to_string(pool.size()) +
                        " susceptible agents, cannot seed " + std::to_string(wanted));
    }
    // Partial Fisher-Yates: the first `wanted` entries become a uniform sample.
    for (int i = 0; i < wanted; ++i) {
      const auto j = static_cast<std::size_t>(i) + uniform_index<std::size_t>(rng, pool.size() - static_cast<std::size_t>(i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
      enter_status(pop.agents[static_cast<std::size_t>(pool[static_cast<std::size_t>(i)])], HealthStatus::Exposed,
                   params, rng);
    }
  }
}

double sample_duration(HealthStatus status, const ModelParams& params, Rng& rng) {
  const GammaShape& g = params.residence(status);
  return std::gamma_distribution<double>(g.shape, g.scale)(rng);
}

int sample_num_contacts(const ModelParams& params, int location, Rng& rng) {
  const int n_locations = std::max<int>(location + 1, static_cast<int>(params.contact_rate.size()));
  ContactCounter counter(params, n_locations);
  return counter(location, rng);
}

DayStats step_day(AgentPopulation& pop, const ModelParams& params, Rng& rng) {
  DayStats stats;
  const int n_locations = pop.n_locations;
  const bool multi_location = n_locations > 1 && params.contact_matrix.size() > 0;

  std::vector<std::vector<std::int32_t>> reachable(static_cast<std::size_t>(n_locations));
  for (const auto& a : pop.agents) {
    if (can_contact(a.status)) reachable[static_cast<std::size_t>(a.location)].push_back(a.id);
  }

  std::vector<std::discrete_distribution<int>> destination;
  if (multi_location) {
    destination.reserve(static_cast<std::size_t>(n_locations));
    for (int j = 0; j < n_locations; ++j) {
      const auto column = params.contact_matrix.col(j);
      destination.emplace_back(column.data(), column.data() + n_locations);
    }
  }

  ContactCounter counter(params, n_locations);

  auto pick_domestic = [&](const Agent& a) -> std::int32_t {
    std::array<std::int32_t, 64> candidates{};
    std::size_t n = 0;
    for (std::int32_t m : pop.houses[static_cast<std::size_t>(a.house)].members) {
      if (m != a.id && can_contact(pop.agents[static_cast<std::size_t>(m)].status) && n < candidates.size()) {
        candidates[n++] = m;
      }
    }
    if (n == 0) return -1;
    return candidates[uniform_index<std::size_t>(rng, n)];
  };

  auto pick_casual = [&](const Agent& a) -> std::int32_t {
    const int loc = multi_location ? destination[static_cast<std::size_t>(a.location)](rng) : a.location;
    const auto& pool = reachable[static_cast<std::size_t>(loc)];
    if (pool.empty() || (pool.size() == 1 && pool.front() == a.id)) return -1;
    for (;;) {
      const std::int32_t candidate = pool[uniform_index<std::size_t>(rng, pool.size())];
      if (candidate != a.id) return candidate;
    }
  };

  auto expose = [&](Agent& target, double beta) {
    ++target.risky_contacts;
    if (bernoulli(rng, beta)) {
      enter_status(target, HealthStatus::Exposed, params, rng);
      ++stats.new_infections;
    }
  };

  // Contact phase. Only susceptible or infectious initiators can change anything.
  for (auto& a : pop.agents) {
    if (a.status != HealthStatus::Susceptible && !is_infectious(a.status)) continue;
    const int n_contacts = counter(a.location, rng);
    stats.contacts += n_contacts;
    for (int c = 0; c < n_contacts; ++c) {
      if (a.status != HealthStatus::Susceptible && !is_infectious(a.status)) break;
      const bool casual = bernoulli(rng, params.p_casual);
      const std::int32_t partner_id = casual ? pick_casual(a) : pick_domestic(a);
      if (partner_id < 0) continue;
      Agent& b = pop.agents[static_cast<std::size_t>(partner_id)];
      const double beta = casual ? params.p_infect_casual : params.p_infect_domestic;
      if (a.status == HealthStatus::Susceptible && is_infectious(b.status)) {
        expose(a, beta);
      } else if (b.status == HealthStatus::Susceptible && is_infectious(a.status)) {
        expose(b, beta);
      }
    }
  }

  // Progression phase.
  for (auto& a : pop.agents) {
    ++a.days_in_status;
    if (!has_duration(a.status)) continue;
    a.remaining_days -= 1.0;
    if (a.remaining_days <= 0.0) {
      enter_status(a, next_status(a.status, params, pop.asymptomatic, rng), params, rng);
    }
  }
  return stats;
}

}  // namespace abmda
