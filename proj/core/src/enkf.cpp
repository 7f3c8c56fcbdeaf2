// SPDX-License-Identifier: Apache-2.0
#include "abmda/enkf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "abmda/error.hpp"
#include "abmda/parallel.hpp"

namespace abmda {

namespace {

// Index of a "lambda_<i>" name, or -1.
int location_lambda_index(const std::string& name) {
  constexpr std::string_view prefix = "lambda_";
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return -1;
  int index = -1;
  const char* first = name.data() + prefix.size();
  const char* last = name.data() + name.size();
  const auto [ptr, ec] = std::from_chars(first, last, index);
  if (ec != std::errc{} || ptr != last || index < 0) return -1;
  return index;
}

void expand_contact_rate(ModelParams& params, int n_locations) {
  if (params.contact_rate.size() == 1 && n_locations > 1) {
    params.contact_rate.assign(static_cast<std::size_t>(n_locations), params.contact_rate.front());
  }
}

double clamp_to(double value, double lower, double upper) { return std::min(std::max(value, lower), upper); }

}  // namespace

void ParamSpec::validate() const {
  if (name.empty()) throw ConfigError("parameter spec needs a name");
  if (!(prior_low <= prior_high)) throw ConfigError("parameter " + name + ": prior_low exceeds prior_high");
  if (!(lower <= upper)) throw ConfigError("parameter " + name + ": lower bound exceeds upper bound");
  if (prior_low < lower || prior_high > upper) {
    throw ConfigError("parameter " + name + ": prior range must lie within the bounds");
  }
  if (!(walk_std >= 0.0)) throw ConfigError("parameter " + name + ": walk_std must be non-negative");
}

void set_model_parameter(ModelParams& params, const std::string& name, double value) {
  if (name == "lambda") {
    std::fill(params.contact_rate.begin(), params.contact_rate.end(), value);
  } else if (const int index = location_lambda_index(name); index >= 0) {
    if (static_cast<std::size_t>(index) >= params.contact_rate.size()) {
      params.contact_rate.resize(static_cast<std::size_t>(index) + 1, params.contact_rate.front());
    }
    params.contact_rate[static_cast<std::size_t>(index)] = value;
  } else if (name == "beta_d") {
    params.p_infect_domestic = value;
  } else if (name == "beta_c") {
    params.p_infect_casual = value;
  } else if (name == "q_S") {
    params.p_severe = value;
  } else if (name == "q_D") {
    params.p_death = value;
  } else if (name == "q_C") {
    params.p_casual = value;
  } else if (name == "q_A") {
    params.p_asymptomatic = value;
  } else {
    throw ConfigError("unknown model parameter '" + name + "'");
  }
}

double get_model_parameter(const ModelParams& params, const std::string& name) {
  if (name == "lambda") return params.contact_rate_at(0);
  if (const int index = location_lambda_index(name); index >= 0) return params.contact_rate_at(index);
  if (name == "beta_d") return params.p_infect_domestic;
  if (name == "beta_c") return params.p_infect_casual;
  if (name == "q_S") return params.p_severe;
  if (name == "q_D") return params.p_death;
  if (name == "q_C") return params.p_casual;
  if (name == "q_A") return params.p_asymptomatic;
  throw ConfigError("unknown model parameter '" + name + "'");
}

AgentPopulation make_population(const PopulationTemplate& tmpl, const ModelParams& params, Rng& rng) {
  std::vector<double> weights = tmpl.location_weights;
  if (weights.empty()) {
    weights.assign(static_cast<std::size_t>(tmpl.n_locations), 1.0 / tmpl.n_locations);
  } else {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw ConfigError("location weights must have a positive total");
    for (double& w : weights) w /= total;
  }
  AgentPopulation pop =
      init_population(tmpl.n_agents, tmpl.n_locations, tmpl.house_sizes, weights, rng, tmpl.asymptomatic);
  if (!tmpl.seed_exposed.empty()) seed_infections(pop, tmpl.seed_exposed, params, rng);
  return pop;
}

namespace {

MacroState initial_macro(const AgentPopulation& pop, const std::vector<ParamSpec>& specs, Rng& rng) {
  MacroState macro;
  macro.counts = aggregate(pop).cast<double>();
  macro.params.resize(static_cast<Eigen::Index>(specs.size()));
  for (std::size_t k = 0; k < specs.size(); ++k) {
    macro.param_names.push_back(specs[k].name);
    const auto& spec = specs[k];
    macro.params(static_cast<Eigen::Index>(k)) =
        spec.prior_low == spec.prior_high
            ? spec.prior_low
            : std::uniform_real_distribution<double>(spec.prior_low, spec.prior_high)(rng);
  }
  return macro;
}

void validate_specs(int n_members, const std::vector<ParamSpec>& specs) {
  if (n_members < 2) throw ConfigError("an ensemble needs at least 2 members");
  for (const auto& spec : specs) spec.validate();
}

}  // namespace

Ensemble init_ensemble(int n_members, const PopulationTemplate& tmpl, const ModelParams& base,
                       std::vector<ParamSpec> specs, std::uint64_t seed) {
  validate_specs(n_members, specs);
  Ensemble ens;
  ens.specs = std::move(specs);
  ens.members.reserve(static_cast<std::size_t>(n_members));
  for (int j = 0; j < n_members; ++j) {
    Member member{{}, {}, Rng(derive_seed(seed, static_cast<std::uint64_t>(j)))};
    member.population = make_population(tmpl, base, member.rng);
    member.macro = initial_macro(member.population, ens.specs, member.rng);
    ens.members.push_back(std::move(member));
  }
  return ens;
}

Ensemble init_ensemble_shared(int n_members, const AgentPopulation& shared, std::vector<ParamSpec> specs,
                              std::uint64_t seed) {
  validate_specs(n_members, specs);
  Ensemble ens;
  ens.specs = std::move(specs);
  ens.members.reserve(static_cast<std::size_t>(n_members));
  for (int j = 0; j < n_members; ++j) {
    Member member{shared, {}, Rng(derive_seed(seed, static_cast<std::uint64_t>(j)))};
    member.macro = initial_macro(member.population, ens.specs, member.rng);
    ens.members.push_back(std::move(member));
  }
  return ens;
}

Eigen::VectorXd flatten(const MacroState& macro) {
  const Eigen::Index n_counts = macro.counts.size();
  Eigen::VectorXd state(n_counts + macro.params.size());
  // RealMatrix is row-major, so its storage is already location-major.
  state.head(n_counts) = Eigen::Map<const Eigen::VectorXd>(macro.counts.data(), n_counts);
  state.tail(macro.params.size()) = macro.params;
  return state;
}

MacroState unflatten(const Eigen::VectorXd& state, int n_locations, int n_statuses,
                     std::vector<std::string> param_names) {
  const Eigen::Index n_counts = static_cast<Eigen::Index>(n_locations) * n_statuses;
  if (state.size() != n_counts + static_cast<Eigen::Index>(param_names.size())) {
    throw ContractViolation("state vector has the wrong dimension");
  }
  MacroState macro;
  macro.counts = Eigen::Map<const RealMatrix>(state.data(), n_locations, n_statuses);
  macro.params = state.tail(static_cast<Eigen::Index>(param_names.size()));
  macro.param_names = std::move(param_names);
  return macro;
}

Eigen::MatrixXd ensemble_matrix(const Ensemble& ens) {
  Eigen::MatrixXd states(ens.state_size(), static_cast<Eigen::Index>(ens.size()));
  for (std::size_t j = 0; j < ens.size(); ++j) states.col(static_cast<Eigen::Index>(j)) = flatten(ens.members[j].macro);
  return states;
}

void forecast_step(Ensemble& ens, const ModelParams& base, int threads) {
  parallel_for(ens.size(), threads, [&](std::size_t j) {
    Member& member = ens.members[j];
    ModelParams local = base;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < ens.specs.size(); ++k) {
      const ParamSpec& spec = ens.specs[k];
      double& value = member.macro.params(static_cast<Eigen::Index>(k));
      if (spec.walk_std > 0.0) value += spec.walk_std * gauss(member.rng);
      value = clamp_to(value, spec.lower, spec.upper);
      set_model_parameter(local, spec.name, value);
    }
    expand_contact_rate(local, member.population.n_locations);
    step_day(member.population, local, member.rng);
    member.macro.counts = aggregate(member.population).cast<double>();
  });
  ++ens.day;
}

AnalysisResult analysis_update(Eigen::MatrixXd& states, const Eigen::VectorXd& y, const Eigen::MatrixXd& obs_op,
                               const Eigen::VectorXd& obs_variance, std::span<Rng> rngs,
                               const AnalysisOptions& options) {
  const Eigen::Index n_members = states.cols();
  const Eigen::Index n_obs = y.size();
  if (n_members < 2) throw ContractViolation("analysis needs at least 2 members");
  if (obs_op.rows() != n_obs || obs_op.cols() != states.rows() || obs_variance.size() != n_obs) {
    throw ContractViolation("observation operator, values and variances have inconsistent sizes");
  }
  if (rngs.size() != static_cast<std::size_t>(n_members)) {
    throw ContractViolation("analysis needs one random stream per member");
  }
  if ((obs_variance.array() <= 0.0).any()) throw ContractViolation("observation variances must be positive");

  AnalysisResult result;
  result.forecast_mean = states.rowwise().mean();
  Eigen::MatrixXd anomalies = states.colwise() - result.forecast_mean;
  if (options.inflation != 1.0) {
    anomalies *= std::sqrt(options.inflation);
    states = anomalies.colwise() + result.forecast_mean;
  }

  const double norm = 1.0 / static_cast<double>(n_members - 1);
  const Eigen::MatrixXd obs_anomalies = obs_op * anomalies;
  Eigen::MatrixXd innovation_cov = norm * obs_anomalies * obs_anomalies.transpose();
  innovation_cov.diagonal() += obs_variance;
  const Eigen::MatrixXd cross_cov = norm * anomalies * obs_anomalies.transpose();

  const Eigen::LLT<Eigen::MatrixXd> chol(innovation_cov);
  if (chol.info() != Eigen::Success) throw NumericalError("innovation covariance is not positive definite");
  result.gain = chol.solve(cross_cov.transpose()).transpose();

  result.perturbations.resize(n_obs, n_members);
  const Eigen::VectorXd obs_std = obs_variance.cwiseSqrt();
  for (Eigen::Index j = 0; j < n_members; ++j) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < n_obs; ++i) result.perturbations(i, j) = obs_std(i) * gauss(rngs[static_cast<std::size_t>(j)]);
  }
  result.innovation = y - obs_op * result.forecast_mean;

  const Eigen::MatrixXd member_innovations =
      (result.perturbations.colwise() + y) - obs_op * states;
  states += result.gain * member_innovations;

  if (!states.allFinite()) throw NumericalError("analysis produced non-finite values");

  const bool has_lower = options.lower.size() == states.rows();
  const bool has_upper = options.upper.size() == states.rows();
  if (has_lower || has_upper) {
    for (Eigen::Index j = 0; j < n_members; ++j) {
      if (has_lower) states.col(j) = states.col(j).cwiseMax(options.lower);
      if (has_upper) states.col(j) = states.col(j).cwiseMin(options.upper);
    }
  }
  return result;
}

CycleReport assimilation_cycle(Ensemble& ens, const ObservationBatch& batch, const ModelParams& base,
                               const CycleConfig& config) {
  if (ens.members.empty()) throw ContractViolation("cannot assimilate into an empty ensemble");
  if (batch.day != ens.day) {
    throw ContractViolation("observation day " + std::to_string(batch.day) + " does not match ensemble day " +
                            std::to_string(ens.day));
  }
  const int n_locations = ens.n_locations();
  const int n_statuses = ens.n_statuses();
  const int n_params = static_cast<int>(ens.specs.size());
  const bool asymptomatic = ens.members.front().population.asymptomatic;
  const int n_agents = static_cast<int>(ens.members.front().population.size());

  Eigen::MatrixXd states = ensemble_matrix(ens);
  const Eigen::MatrixXd obs_op = observation_operator(batch, n_locations, asymptomatic, n_agents, n_params);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(batch.values.data(), static_cast<Eigen::Index>(batch.size()));
  const Eigen::VectorXd r = error_covariance(batch.values, batch.kinds, config.errors, batch.n_tested);

  AnalysisOptions options;
  options.inflation = config.inflation;
  const Eigen::Index n_counts = static_cast<Eigen::Index>(n_locations) * n_statuses;
  options.lower = Eigen::VectorXd::Constant(states.rows(), -std::numeric_limits<double>::infinity());
  options.upper = Eigen::VectorXd::Constant(states.rows(), std::numeric_limits<double>::infinity());
  for (int k = 0; k < n_params; ++k) {
    options.lower(n_counts + k) = ens.specs[static_cast<std::size_t>(k)].lower;
    options.upper(n_counts + k) = ens.specs[static_cast<std::size_t>(k)].upper;
  }

  std::vector<Rng> rngs;
  rngs.reserve(ens.size());
  for (const auto& m : ens.members) rngs.push_back(m.rng);
  const AnalysisResult analysis = analysis_update(states, y, obs_op, r, rngs, options);
  for (std::size_t j = 0; j < ens.size(); ++j) ens.members[j].rng = rngs[j];

  CycleReport report;
  report.observed = y;
  report.forecast_obs_mean = obs_op * analysis.forecast_mean;
  report.innovation = analysis.innovation;
  report.relabeled.assign(ens.size(), 0);

  parallel_for(ens.size(), config.threads, [&](std::size_t j) {
    Member& member = ens.members[j];
    MacroState analysed =
        unflatten(states.col(static_cast<Eigen::Index>(j)), n_locations, n_statuses, member.macro.param_names);
    const auto sizes = member.population.location_sizes();
    const CountMatrix target = integerize_rows(analysed.counts, sizes);
    const AdjustmentReport adjusted =
        adjust_population(member.population, target, config.method, base, member.rng);
    report.relabeled[j] = adjusted.total_relabeled();
    // Without adjustment the agents keep their forecast counts; only the
    // parameters take the analysis values.
    member.macro.counts = config.method == AdjustmentMethod::None ? aggregate(member.population).cast<double>()
                                                                   : target.cast<double>();
    member.macro.params = analysed.params;
  });
  return report;
}

}  // namespace abmda
