// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abmda/macro_map.hpp"
#include "abmda/observations.hpp"

namespace abmda {

/// An unknown model parameter carried in the augmented state. Its initial
/// value is uniform on [prior_low, prior_high]; it then follows a Gaussian
/// random walk with `walk_std` per day and is clamped to [lower, upper].
struct ParamSpec {
  std::string name;
  double prior_low = 0.0;
  double prior_high = 0.0;
  double walk_std = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  void validate() const;
};

/// Model parameters addressable by augmentation: "lambda" (all locations),
/// "lambda_<i>" (one location), "beta_d", "beta_c", "q_S", "q_D", "q_C", "q_A".
void set_model_parameter(ModelParams& params, const std::string& name, double value);
double get_model_parameter(const ModelParams& params, const std::string& name);

struct Member {
  AgentPopulation population;
  MacroState macro;
  Rng rng;
};

struct Ensemble {
  std::vector<Member> members;
  std::vector<ParamSpec> specs;
  int day = 0;

  std::size_t size() const noexcept { return members.size(); }
  int n_locations() const { return members.front().population.n_locations; }
  int n_statuses() const { return members.front().population.n_statuses(); }
  /// Dimension of the augmented state.
  int state_size() const { return n_locations() * n_statuses() + static_cast<int>(specs.size()); }
};

/// How each member's agent population is generated.
struct PopulationTemplate {
  int n_agents = 0;
  int n_locations = 1;
  HouseSizeDistribution house_sizes{0.36, 0.27, 0.16, 0.13, 0.08};
  std::vector<double> location_weights;
  std::vector<int> seed_exposed;
  bool asymptomatic = false;
};

/// Builds and seeds a population from the template.
AgentPopulation make_population(const PopulationTemplate& tmpl, const ModelParams& params, Rng& rng);

/// Independent members: fresh house layout and seeding per member, parameters
/// drawn from their priors. Member j uses the stream derive_seed(seed, j).
Ensemble init_ensemble(int n_members, const PopulationTemplate& tmpl, const ModelParams& base,
                       std::vector<ParamSpec> specs, std::uint64_t seed);

/// Every member starts from a copy of `shared`; only parameters differ.
Ensemble init_ensemble_shared(int n_members, const AgentPopulation& shared, std::vector<ParamSpec> specs,
                              std::uint64_t seed);

/// Location-major counts followed by the parameters.
Eigen::VectorXd flatten(const MacroState& macro);
MacroState unflatten(const Eigen::VectorXd& state, int n_locations, int n_statuses,
                     std::vector<std::string> param_names);

/// Column j is flatten(members[j].macro).
Eigen::MatrixXd ensemble_matrix(const Ensemble& ens);

/// Random-walks and clamps each member's parameters, steps its population one
/// day with the parameters overlaid on `base`, and refreshes its macro-state.
void forecast_step(Ensemble& ens, const ModelParams& base, int threads = 1);

struct AnalysisOptions {
  /// Multiplicative forecast covariance inflation; 1 disables it.
  double inflation = 1.0;
  /// Per-component clamping bounds; empty means unbounded.
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct AnalysisResult {
  Eigen::MatrixXd gain;
  Eigen::VectorXd forecast_mean;
  /// y - H * forecast_mean.
  Eigen::VectorXd innovation;
  /// Column j is the observation perturbation drawn for member j.
  Eigen::MatrixXd perturbations;
};

/// Perturbed-observation EnKF update of the columns of `states` in place.
/// Member j draws its observation perturbation from rngs[j].
AnalysisResult analysis_update(Eigen::MatrixXd& states, const Eigen::VectorXd& y, const Eigen::MatrixXd& obs_op,
                               const Eigen::VectorXd& obs_variance, std::span<Rng> rngs,
                               const AnalysisOptions& options = {});

struct CycleConfig {
  AdjustmentMethod method = AdjustmentMethod::Randomized;
  ObsErrorSpec errors;
  double inflation = 1.0;
  int threads = 1;
};

struct CycleReport {
  Eigen::VectorXd observed;
  Eigen::VectorXd forecast_obs_mean;
  Eigen::VectorXd innovation;
  std::vector<int> relabeled;
};

/// One full analysis: aggregate, EnKF update, integerize and adjust every
/// member's agents so that aggregate(population) equals the analysis counts.
/// With AdjustmentMethod::None only the parameters are updated.
CycleReport assimilation_cycle(Ensemble& ens, const ObservationBatch& batch, const ModelParams& base,
                               const CycleConfig& config);

}  // namespace abmda
