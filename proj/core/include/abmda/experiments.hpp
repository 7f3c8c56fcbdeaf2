// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "abmda/dataset.hpp"
#include "abmda/enkf.hpp"

namespace abmda {

enum class Scenario { VaryingLambda, Microscale, Asymptomatic, ModelError, RealData };

std::string_view scenario_label(Scenario s) noexcept;
std::optional<Scenario> parse_scenario(std::string_view label) noexcept;
std::string_view method_label(AdjustmentMethod m) noexcept;
std::optional<AdjustmentMethod> parse_method(std::string_view label) noexcept;

/// Linear truth contact-rate schedule: lambda(t) = start + (end - start) t / T.
struct LambdaSchedule {
  double start = 0.9;
  double end = 0.3;

  double at(int day, int total_days) const;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::VaryingLambda;
  int n_agents = 30000;
  int n_locations = 4;
  int n_members = 100;
  /// Simulated days after day 0. For real data: taken from the dataset.
  int days = 150;
  /// Observation-error coefficients; the variances use kappa = coeff * N / L.
  double kappa_confirmed_coeff = 1e-5;
  double kappa_deaths_coeff = 1e-6;
  double obs_floor = 1.0;
  AdjustmentMethod method = AdjustmentMethod::Randomized;
  /// Also run a free-running ensemble (no analysis) from the same seeds.
  bool control = false;
  double inflation = 1.0;
  int threads = 1;

  std::uint64_t seed = 1;

  /// Model used by the ensemble.
  ModelParams model;
  /// Model that generates the synthetic truth.
  ModelParams truth;
  std::optional<LambdaSchedule> lambda_schedule;

  std::vector<int> seed_exposed;
  std::vector<double> location_weights;
  /// Members start from a copy of the truth's initial population.
  bool shared_initial = false;
  /// Share of agents tested daily for the positivity observation; 0 disables it.
  double testing_fraction = 0.0;

  std::vector<ParamSpec> params;

  std::string data_reports;
  std::string data_census;
  double data_scale = 10.0;

  std::uint64_t truth_seed() const noexcept { return derive_seed(seed, 1); }
  std::uint64_t ensemble_seed() const noexcept { return derive_seed(seed, 2); }
  std::uint64_t observation_seed() const noexcept { return derive_seed(seed, 3); }
  std::uint64_t control_seed() const noexcept { return ensemble_seed(); }
  bool asymptomatic() const noexcept { return scenario == Scenario::Asymptomatic; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct MatchReport {
  double agent_id = 0.0;
  double house_id = 0.0;
  double household_type = 0.0;
  double loc_household_type = 0.0;
};

/// Proportion of agents whose status agrees with the truth under four
/// groupings. Both populations must share the agent/house layout.
MatchReport matching_metrics(const AgentPopulation& truth, const AgentPopulation& estimate);

/// Share of currently infected agents (E, I_M, I_S, I_A, H) living in houses
/// of size 1..5. Empty when nobody is infected.
std::optional<std::array<double, kMaxHouseSize>> infections_by_house_size(const AgentPopulation& pop);

/// Share of all agents living in houses of size 1..5.
std::array<double, kMaxHouseSize> residents_by_house_size(const AgentPopulation& pop);

/// Half of the casual contacts stay home; the rest go to the other locations
/// in proportion to their weight. A single location gets the identity.
Eigen::MatrixXd build_density_contact_matrix(std::span<const double> weights);

struct TruthRun {
  /// Entry t is the state at the end of day t (entry 0 is the initial state).
  std::vector<CountMatrix> counts;
  std::vector<AgentPopulation> populations;
  /// Contact rate in force on each day (per location).
  std::vector<std::vector<double>> contact_rate;
  /// Random-testing results per day (entry 0 unused); empty without testing.
  std::vector<TestResult> tests;
  std::vector<std::optional<std::array<double, kMaxHouseSize>>> house_infections;
  std::array<double, kMaxHouseSize> resident_share{};
};

/// Simulates the truth for config.days days from config.truth_seed().
TruthRun run_truth(const ExperimentConfig& config, bool keep_populations = false);

struct InnovationRecord {
  int day = 0;
  int index = 0;
  ObsKind kind = ObsKind::Confirmed;
  int location = -1;
  double observed = 0.0;
  double forecast = 0.0;
  double innovation = 0.0;
};

struct MatchRecord {
  int day = 0;
  std::string group;
  MatchReport mean;
  MatchReport std;
};

struct HouseInfectionRecord {
  int day = 0;
  std::string source;
  std::array<double, kMaxHouseSize> mean{};
  std::array<double, kMaxHouseSize> std{};
  /// Members with no infected agent are left out of the statistics.
  int n_defined = 0;
};

/// Per-day ensemble summaries. Index t of every vector refers to `days[t]`.
struct EnsembleSeries {
  std::vector<RealMatrix> mean;
  std::vector<RealMatrix> std;
  std::vector<Eigen::VectorXd> param_mean;
  std::vector<Eigen::VectorXd> param_std;
  /// New confirmed cases per location: member-wise day-over-day difference
  /// of cumulative confirmed, clamped at 0.
  std::vector<Eigen::VectorXd> incidence_mean;
  std::vector<Eigen::VectorXd> incidence_std;
};

struct RelabelRecord {
  int day = 0;
  int member = 0;
  int relabeled = 0;
};

struct RunArtifacts {
  std::string scenario;
  std::string method;
  int n_locations = 0;
  bool asymptomatic = false;
  std::vector<std::string> location_names;
  std::vector<std::string> param_names;
  /// Simulation day of every record; dates[t] is set for real data.
  std::vector<int> days;
  std::vector<std::string> dates;
  /// Days without observations (forecast only).
  std::vector<int> gap_days;

  EnsembleSeries ensemble;
  std::optional<EnsembleSeries> control;

  /// Synthetic runs only: truth counts and parameters for every record day.
  std::vector<CountMatrix> truth;
  std::vector<Eigen::VectorXd> param_truth;

  /// Observed cumulative confirmed per location converted to daily new cases
  /// (NaN where undefined).
  std::vector<Eigen::VectorXd> observed_incidence;
  std::vector<ObservationBatch> observations;
  std::vector<InnovationRecord> innovations;
  std::vector<RelabelRecord> relabels;
  std::vector<MatchRecord> matches;
  std::vector<HouseInfectionRecord> house_infections;
  std::array<double, kMaxHouseSize> resident_share{};

  /// Resolved configuration as JSON text.
  std::string config_echo;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
};

struct TwinOptions {
  /// Called after every recorded day with the truth population (null when
  /// not tracked) and the ensemble after analysis.
  std::function<void(int day, const AgentPopulation* truth, const Ensemble& ens)> on_day;
  /// Log one line per day to stderr.
  bool verbose = false;
};

/// Truth, synthetic observations and the filtered ensemble (and optionally a
/// free-running control ensemble).
RunArtifacts run_twin(const ExperimentConfig& config, const TwinOptions& options = {});

/// Agents used for a real-data run: total census population / scale, rounded.
int realdata_agent_count(const DailyReportDataset& dataset, double scale);

/// Assimilates the scaled cumulative reports of `dataset`. Agents are split
/// over locations in proportion to the census populations.
RunArtifacts run_realdata(const ExperimentConfig& config, const DailyReportDataset& dataset,
                          const TwinOptions& options = {});

/// Observed daily new cases per location: day-over-day difference of the
/// scaled cumulative confirmed series.
std::vector<Eigen::VectorXd> observed_daily_cases(const DailyReportDataset& dataset, double scale);

}  // namespace abmda
