// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "abmda/macro_map.hpp"

namespace abmda {

enum class ObsKind { Confirmed, Deaths, Positivity };

std::string_view obs_kind_label(ObsKind kind) noexcept;

/// One day of observations. Row i observes `kinds[i]` in `locations[i]`
/// (-1 for city-wide quantities such as positivity).
struct ObservationBatch {
  int day = 0;
  std::vector<double> values;
  std::vector<ObsKind> kinds;
  std::vector<int> locations;
  /// Agents tested for the positivity row; 0 when there is none.
  int n_tested = 0;

  std::size_t size() const noexcept { return values.size(); }
  void add(ObsKind kind, int location, double value);
};

/// Proportional observation-error model: variance kappa * y for counts,
/// binomial sampling variance for positivity, both floored.
struct ObsErrorSpec {
  double kappa_confirmed = 1.0;
  double kappa_deaths = 1.0;
  double floor = 1.0;
  /// Floor for positivity variance; 0 selects 1 / n_tested^2.
  double positivity_floor = 0.0;
};

/// Coefficient scaled by agents per location (kappa = coeff * N_agents / N_locations).
double kappa_per_location(double coeff, int n_agents, int n_locations);

/// Cumulative confirmed cases: every class that has shown symptoms
/// (I_M, I_S, H, R, D). Asymptomatic classes are never reported.
bool counts_as_confirmed(HealthStatus s) noexcept;

/// Row of the linear observation operator acting on the flattened augmented
/// state (location-major counts, then `n_params` parameters).
Eigen::RowVectorXd observation_row(ObsKind kind, int location, int n_locations, bool asymptomatic, int n_agents,
                                   int n_params);

/// Standard operator: confirmed per location, deaths per location and
/// optionally the city-wide positivity (I_M + I_S + I_A + H) / n_agents.
Eigen::MatrixXd obs_matrix(int n_locations, bool asymptomatic, bool include_positivity, int n_agents,
                           int n_params = 0);

/// Operator matching the rows actually present in `batch`.
Eigen::MatrixXd observation_operator(const ObservationBatch& batch, int n_locations, bool asymptomatic,
                                     int n_agents, int n_params);

/// Diagonal of the observation-error covariance for the given values.
Eigen::VectorXd error_covariance(std::span<const double> values, std::span<const ObsKind> kinds,
                                 const ObsErrorSpec& spec, int n_tested = 0);

/// Noisy confirmed/deaths observations from a truth trajectory. Entry t of
/// `truth` becomes the batch for day `first_day + t`. Negative draws are
/// clamped to zero.
std::vector<ObservationBatch> synthesize_observations(std::span<const CountMatrix> truth, int first_day,
                                                      const ObsErrorSpec& spec, Rng& rng);

struct TestResult {
  int positives = 0;
  int tested = 0;

  double positivity() const noexcept { return tested > 0 ? static_cast<double>(positives) / tested : 0.0; }
};

/// Tests floor(fraction * N) agents drawn without replacement; a test is
/// positive for I_M, I_S, I_A and H.
TestResult simulate_random_testing(const AgentPopulation& pop, double fraction, Rng& rng);

}  // namespace abmda
