// SPDX-License-Identifier: Apache-2.0
#include "abmda/observations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "abmda/error.hpp"

namespace abmda {

std::string_view obs_kind_label(ObsKind kind) noexcept {
  switch (kind) {
    case ObsKind::Confirmed:
      return "confirmed";
    case ObsKind::Deaths:
      return "deaths";
    case ObsKind::Positivity:
      return "positivity";
  }
  return "unknown";
}

void ObservationBatch::add(ObsKind kind, int location, double value) {
  kinds.push_back(kind);
  locations.push_back(location);
  values.push_back(value);
}

double kappa_per_location(double coeff, int n_agents, int n_locations) {
  if (n_locations <= 0) throw ConfigError("kappa scaling needs at least one location");
  return coeff * static_cast<double>(n_agents) / static_cast<double>(n_locations);
}

bool counts_as_confirmed(HealthStatus s) noexcept {
  switch (s) {
    case HealthStatus::Mild:
    case HealthStatus::Severe:
    case HealthStatus::Hospitalized:
    case HealthStatus::Recovered:
    case HealthStatus::Dead:
      return true;
    default:
      return false;
  }
}

Eigen::RowVectorXd observation_row(ObsKind kind, int location, int n_locations, bool asymptomatic, int n_agents,
                                   int n_params) {
  const int n_statuses = status_count(asymptomatic);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n_locations * n_statuses + n_params);
  switch (kind) {
    case ObsKind::Confirmed:
      for (int s = 0; s < n_statuses; ++s) {
        if (counts_as_confirmed(status_at(s))) row(location * n_statuses + s) = 1.0;
      }
      break;
    case ObsKind::Deaths:
      row(location * n_statuses + index_of(HealthStatus::Dead)) = 1.0;
      break;
    case ObsKind::Positivity: {
      if (n_agents <= 0) throw ContractViolation("positivity needs a positive population size");
      const double weight = 1.0 / static_cast<double>(n_agents);
      for (int loc = 0; loc < n_locations; ++loc) {
        for (int s = 0; s < n_statuses; ++s) {
          if (is_active_infection(status_at(s))) row(loc * n_statuses + s) = weight;
        }
      }
      break;
    }
  }
  return row;
}

Eigen::MatrixXd obs_matrix(int n_locations, bool asymptomatic, bool include_positivity, int n_agents,
                           int n_params) {
  const int n_rows = 2 * n_locations + (include_positivity ? 1 : 0);
  const int n_cols = n_locations * status_count(asymptomatic) + n_params;
  Eigen::MatrixXd h(n_rows, n_cols);
  for (int loc = 0; loc < n_locations; ++loc) {
    h.row(loc) = observation_row(ObsKind::Confirmed, loc, n_locations, asymptomatic, n_agents, n_params);
    h.row(n_locations + loc) = observation_row(ObsKind::Deaths, loc, n_locations, asymptomatic, n_agents, n_params);
  }
  if (include_positivity) {
    h.row(n_rows - 1) = observation_row(ObsKind::Positivity, -1, n_locations, asymptomatic, n_agents, n_params);
  }
  return h;
}

Eigen::MatrixXd observation_operator(const ObservationBatch& batch, int n_locations, bool asymptomatic,
                                     int n_agents, int n_params) {
  Eigen::MatrixXd h(static_cast<Eigen::Index>(batch.size()), n_locations * status_count(asymptomatic) + n_params);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    h.row(static_cast<Eigen::Index>(i)) =
        observation_row(batch.kinds[i], batch.locations[i], n_locations, asymptomatic, n_agents, n_params);
  }
  return h;
}

Eigen::VectorXd error_covariance(std::span<const double> values, std::span<const ObsKind> kinds,
                                 const ObsErrorSpec& spec, int n_tested) {
  if (!(spec.kappa_confirmed > 0.0 && spec.kappa_deaths > 0.0)) {
    throw ConfigError("kappa_C and kappa_D must be positive");
  }
  if (!(spec.floor > 0.0)) throw ConfigError("observation variance floor must be positive");
  if (values.size() != kinds.size()) throw ContractViolation("values and kinds must have the same length");

  Eigen::VectorXd r(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double y = values[i];
    double variance = 0.0;
    switch (kinds[i]) {
      case ObsKind::Confirmed:
        variance = std::max(spec.kappa_confirmed * y, spec.floor);
        break;
      case ObsKind::Deaths:
        variance = std::max(spec.kappa_deaths * y, spec.floor);
        break;
      case ObsKind::Positivity: {
        if (n_tested <= 0) throw ContractViolation("positivity variance needs the number of tests");
        const double n = static_cast<double>(n_tested);
        const double p = std::clamp(y, 0.0, 1.0);
        const double floor = spec.positivity_floor > 0.0 ? spec.positivity_floor : 1.0 / (n * n);
        variance = std::max(p * (1.0 - p) / n, floor);
        break;
      }
    }
    r(static_cast<Eigen::Index>(i)) = variance;
  }
  return r;
}

std::vector<ObservationBatch> synthesize_observations(std::span<const CountMatrix> truth, int first_day,
                                                      const ObsErrorSpec& spec, Rng& rng) {
  std::vector<ObservationBatch> out;
  out.reserve(truth.size());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const CountMatrix& counts = truth[t];
    const int n_locations = static_cast<int>(counts.rows());
    ObservationBatch batch;
    batch.day = first_day + static_cast<int>(t);
    for (int loc = 0; loc < n_locations; ++loc) {
      double confirmed = 0.0;
      for (int s = 0; s < counts.cols(); ++s) {
        if (counts_as_confirmed(status_at(s))) confirmed += counts(loc, s);
      }
      batch.add(ObsKind::Confirmed, loc, confirmed);
    }
    for (int loc = 0; loc < n_locations; ++loc) {
      batch.add(ObsKind::Deaths, loc, counts(loc, index_of(HealthStatus::Dead)));
    }
    const Eigen::VectorXd r = error_covariance(batch.values, batch.kinds, spec);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double noisy = batch.values[i] + std::sqrt(r(static_cast<Eigen::Index>(i))) * gauss(rng);
      batch.values[i] = std::max(0.0, noisy);
    }
    out.push_back(std::move(batch));
  }
  return out;
}

TestResult simulate_random_testing(const AgentPopulation& pop, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ContractViolation("testing fraction must lie in (0, 1]");
  const auto n = pop.agents.size();
  const auto n_tested = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (n_tested == 0) throw ContractViolation("testing fraction selects no agents");

  TestResult result;
  result.tested = static_cast<int>(n_tested);
  if (n_tested == n) {
    for (const auto& a : pop.agents) result.positives += is_active_infection(a.status) ? 1 : 0;
    return result;
  }
  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < n_tested; ++i) {
    std::swap(order[i], order[i + uniform_index<std::size_t>(rng, n - i)]);
    result.positives += is_active_infection(pop.agents[static_cast<std::size_t>(order[i])].status) ? 1 : 0;
  }
  return result;
}

}  // namespace abmda
