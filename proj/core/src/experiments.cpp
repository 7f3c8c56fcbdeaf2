// SPDX-License-Identifier: Apache-2.0
#include "abmda/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "abmda/error.hpp"

namespace abmda {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_infected(HealthStatus s) noexcept { return s == HealthStatus::Exposed || is_active_infection(s); }

int house_size_of(const AgentPopulation& pop, const Agent& a) {
  return static_cast<int>(pop.houses[static_cast<std::size_t>(a.house)].members.size());
}

// Sum over groups of the status-histogram overlap.
template <typename KeyFn>
double grouped_overlap(const AgentPopulation& truth, const AgentPopulation& est, std::size_t n_groups, KeyFn key) {
  const auto n_status = static_cast<std::size_t>(kExtendedStatusCount);
  std::vector<int> hist_true(n_groups * n_status, 0);
  std::vector<int> hist_est(n_groups * n_status, 0);
  for (std::size_t k = 0; k < truth.agents.size(); ++k) {
    const std::size_t g = key(truth.agents[k]) * n_status;
    ++hist_true[g + static_cast<std::size_t>(index_of(truth.agents[k].status))];
    ++hist_est[g + static_cast<std::size_t>(index_of(est.agents[k].status))];
  }
  long overlap = 0;
  for (std::size_t i = 0; i < hist_true.size(); ++i) overlap += std::min(hist_true[i], hist_est[i]);
  return static_cast<double>(overlap) / static_cast<double>(truth.agents.size());
}

ObsErrorSpec error_spec(const ExperimentConfig& config, int n_agents, int n_locations) {
  ObsErrorSpec spec;
  spec.kappa_confirmed = kappa_per_location(config.kappa_confirmed_coeff, n_agents, n_locations);
  spec.kappa_deaths = kappa_per_location(config.kappa_deaths_coeff, n_agents, n_locations);
  spec.floor = config.obs_floor;
  return spec;
}

ModelParams with_locations(ModelParams params, int n_locations) {
  if (params.contact_rate.size() == 1 && n_locations > 1) {
    params.contact_rate.assign(static_cast<std::size_t>(n_locations), params.contact_rate.front());
  }
  return params;
}

std::vector<int> default_seeds(const ExperimentConfig& config) {
  if (!config.seed_exposed.empty()) return config.seed_exposed;
  return std::vector<int>(static_cast<std::size_t>(config.n_locations), 5);
}

double confirmed_in(const RealMatrix& counts, int loc) {
  double total = 0.0;
  for (int s = 0; s < counts.cols(); ++s) {
    if (counts_as_confirmed(status_at(s))) total += counts(loc, s);
  }
  return total;
}

// Accumulates per-day ensemble statistics.
class SeriesRecorder {
 public:
  explicit SeriesRecorder(const Ensemble& ens) { previous_ = confirmed_matrix(ens); }

  void record(const Ensemble& ens, EnsembleSeries& out) {
    const auto n = static_cast<double>(ens.size());
    const RealMatrix& first = ens.members.front().macro.counts;
    RealMatrix sum = RealMatrix::Zero(first.rows(), first.cols());
    RealMatrix sq = sum;
    const Eigen::Index n_params = ens.members.front().macro.params.size();
    Eigen::VectorXd psum = Eigen::VectorXd::Zero(n_params);
    Eigen::VectorXd psq = psum;
    for (const auto& m : ens.members) {
      sum += m.macro.counts;
      sq += m.macro.counts.cwiseProduct(m.macro.counts);
      psum += m.macro.params;
      psq += m.macro.params.cwiseProduct(m.macro.params);
    }
    out.mean.push_back(sum / n);
    out.std.push_back(sample_std(sum, sq, n));
    out.param_mean.push_back(psum / n);
    out.param_std.push_back(sample_std(psum, psq, n));

    const Eigen::MatrixXd confirmed = confirmed_matrix(ens);
    const Eigen::MatrixXd fresh = (confirmed - previous_).cwiseMax(0.0);
    const Eigen::VectorXd isum = fresh.colwise().sum().transpose();
    const Eigen::VectorXd isq = fresh.cwiseProduct(fresh).colwise().sum().transpose();
    out.incidence_mean.push_back(isum / n);
    out.incidence_std.push_back(sample_std(isum, isq, n));
    previous_ = confirmed;
  }

 private:
  // Members x locations.
  static Eigen::MatrixXd confirmed_matrix(const Ensemble& ens) {
    const int n_loc = ens.n_locations();
    Eigen::MatrixXd c(static_cast<Eigen::Index>(ens.size()), n_loc);
    for (std::size_t j = 0; j < ens.size(); ++j) {
      for (int loc = 0; loc < n_loc; ++loc) {
        c(static_cast<Eigen::Index>(j), loc) = confirmed_in(ens.members[j].macro.counts, loc);
      }
    }
    return c;
  }

  template <typename M>
  static M sample_std(const M& sum, const M& sq, double n) {
    // Clamp tiny negative round-off before the square root.
    M var = ((sq - sum.cwiseProduct(sum) / n) / (n - 1.0)).cwiseMax(0.0);
    return var.cwiseSqrt();
  }

  Eigen::MatrixXd previous_;
};

HouseInfectionRecord house_record(int day, std::string source, const Ensemble& ens) {
  HouseInfectionRecord rec;
  rec.day = day;
  rec.source = std::move(source);
  std::array<double, kMaxHouseSize> sum{};
  std::array<double, kMaxHouseSize> sq{};
  for (const auto& m : ens.members) {
    const auto shares = infections_by_house_size(m.population);
    if (!shares) continue;
    ++rec.n_defined;
    for (int k = 0; k < kMaxHouseSize; ++k) {
      sum[k] += (*shares)[k];
      sq[k] += (*shares)[k] * (*shares)[k];
    }
  }
  for (int k = 0; k < kMaxHouseSize; ++k) {
    if (rec.n_defined == 0) {
      rec.mean[k] = rec.std[k] = kNaN;
      continue;
    }
    const double n = rec.n_defined;
    rec.mean[k] = sum[k] / n;
    rec.std[k] = n > 1 ? std::sqrt(std::max(0.0, (sq[k] - sum[k] * sum[k] / n) / (n - 1.0))) : 0.0;
  }
  return rec;
}

HouseInfectionRecord truth_house_record(int day, const std::optional<std::array<double, kMaxHouseSize>>& shares) {
  HouseInfectionRecord rec;
  rec.day = day;
  rec.source = "truth";
  rec.n_defined = shares ? 1 : 0;
  for (int k = 0; k < kMaxHouseSize; ++k) {
    rec.mean[k] = shares ? (*shares)[k] : kNaN;
    rec.std[k] = 0.0;
  }
  return rec;
}

MatchRecord match_record(int day, std::string group, const AgentPopulation& truth, const Ensemble& ens) {
  std::array<double, 4> sum{};
  std::array<double, 4> sq{};
  for (const auto& m : ens.members) {
    const MatchReport r = matching_metrics(truth, m.population);
    const std::array<double, 4> v{r.agent_id, r.house_id, r.household_type, r.loc_household_type};
    for (int k = 0; k < 4; ++k) {
      sum[k] += v[k];
      sq[k] += v[k] * v[k];
    }
  }
  const double n = static_cast<double>(ens.size());
  std::array<double, 4> mean{};
  std::array<double, 4> sd{};
  for (int k = 0; k < 4; ++k) {
    mean[k] = sum[k] / n;
    sd[k] = std::sqrt(std::max(0.0, (sq[k] - sum[k] * sum[k] / n) / (n - 1.0)));
  }
  return {day, std::move(group), {mean[0], mean[1], mean[2], mean[3]}, {sd[0], sd[1], sd[2], sd[3]}};
}

Eigen::VectorXd truth_parameters(const ExperimentConfig& config, const std::vector<double>& rate) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(config.params.size()));
  ModelParams truth = config.truth;
  truth.contact_rate = rate;
  for (std::size_t k = 0; k < config.params.size(); ++k) {
    const std::string& name = config.params[k].name;
    const bool contact_param = name.rfind("lambda", 0) == 0;
    // A geometric truth has no Poisson rate to compare against.
    v(static_cast<Eigen::Index>(k)) =
        contact_param && truth.contact_law != ContactLaw::Poisson ? kNaN : get_model_parameter(truth, name);
  }
  return v;
}

void record_innovations(RunArtifacts& art, const ObservationBatch& batch, const CycleReport& report) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    art.innovations.push_back({batch.day, static_cast<int>(i), batch.kinds[i], batch.locations[i],
                               report.observed(e), report.forecast_obs_mean(e), report.innovation(e)});
  }
}

void record_relabels(RunArtifacts& art, int day, const CycleReport& report) {
  for (std::size_t j = 0; j < report.relabeled.size(); ++j) {
    art.relabels.push_back({day, static_cast<int>(j), report.relabeled[j]});
  }
}

void log_day(const RunArtifacts& art, int day) {
  const RealMatrix& mean = art.ensemble.mean.back();
  std::cerr << "day " << day << " E=" << mean.col(index_of(HealthStatus::Exposed)).sum()
            << " I_M=" << mean.col(index_of(HealthStatus::Mild)).sum()
            << " D=" << mean.col(index_of(HealthStatus::Dead)).sum();
  const Eigen::VectorXd& p = art.ensemble.param_mean.back();
  for (Eigen::Index k = 0; k < p.size(); ++k) std::cerr << ' ' << art.param_names[static_cast<std::size_t>(k)] << '=' << p(k);
  std::cerr << '\n';
}

CycleConfig cycle_config(const ExperimentConfig& config, const ObsErrorSpec& errors) {
  CycleConfig cc;
  cc.method = config.method;
  cc.errors = errors;
  cc.inflation = config.inflation;
  cc.threads = config.threads;
  return cc;
}

}  // namespace

std::string_view scenario_label(Scenario s) noexcept {
  switch (s) {
    case Scenario::VaryingLambda:
      return "varying_lambda";
    case Scenario::Microscale:
      return "microscale";
    case Scenario::Asymptomatic:
      return "asymptomatic";
    case Scenario::ModelError:
      return "model_error";
    case Scenario::RealData:
      return "realdata";
  }
  return "unknown";
}

std::optional<Scenario> parse_scenario(std::string_view label) noexcept {
  for (Scenario s : {Scenario::VaryingLambda, Scenario::Microscale, Scenario::Asymptomatic, Scenario::ModelError,
                     Scenario::RealData}) {
    if (scenario_label(s) == label) return s;
  }
  return std::nullopt;
}

std::string_view method_label(AdjustmentMethod m) noexcept {
  switch (m) {
    case AdjustmentMethod::Randomized:
      return "randomized";
    case AdjustmentMethod::Cascade:
      return "cascade";
    case AdjustmentMethod::None:
      return "none";
  }
  return "unknown";
}

std::optional<AdjustmentMethod> parse_method(std::string_view label) noexcept {
  for (AdjustmentMethod m : {AdjustmentMethod::Randomized, AdjustmentMethod::Cascade, AdjustmentMethod::None}) {
    if (method_label(m) == label) return m;
  }
  return std::nullopt;
}

double LambdaSchedule::at(int day, int total_days) const {
  if (total_days <= 0 || day <= 0) return start;
  if (day >= total_days) return end;
  return start + (end - start) * static_cast<double>(day) / static_cast<double>(total_days);
}

void ExperimentConfig::validate() const {
  const bool realdata = scenario == Scenario::RealData;
  if (!realdata && n_agents <= 0) throw ConfigError("n_agents must be positive");
  if (n_locations <= 0) throw ConfigError("n_locations must be positive");
  if (n_members < 2) throw ConfigError("n_members must be at least 2");
  if (!realdata && days <= 0) throw ConfigError("days must be positive");
  if (!(kappa_confirmed_coeff > 0.0)) throw ConfigError("kappa_c must be > 0");
  if (!(kappa_deaths_coeff > 0.0)) throw ConfigError("kappa_d must be > 0");
  if (!(obs_floor > 0.0)) throw ConfigError("obs_floor must be > 0");
  if (!(inflation >= 1.0)) throw ConfigError("inflation must be >= 1");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (!(testing_fraction >= 0.0 && testing_fraction <= 1.0)) throw ConfigError("testing_fraction must lie in [0, 1]");
  if (testing_fraction > 0.0 && !asymptomatic()) {
    throw ConfigError("testing_fraction is only used by the asymptomatic scenario");
  }
  if (!seed_exposed.empty() && static_cast<int>(seed_exposed.size()) != n_locations) {
    throw ConfigError("seed_exposed must have one entry per location (" + std::to_string(n_locations) + ")");
  }
  for (int s : seed_exposed) {
    if (s < 0) throw ConfigError("seed_exposed entries must be >= 0");
  }
  if (!location_weights.empty()) {
    if (static_cast<int>(location_weights.size()) != n_locations) {
      throw ConfigError("location_weights must have one entry per location (" + std::to_string(n_locations) + ")");
    }
    for (double w : location_weights) {
      if (!(w > 0.0)) throw ConfigError("location_weights entries must be > 0");
    }
  }
  if (realdata) {
    if (data_reports.empty()) throw ConfigError("realdata requires data.reports");
    if (data_census.empty()) throw ConfigError("realdata requires data.census");
    if (!(data_scale > 0.0)) throw ConfigError("data.scale must be > 0");
  }
  try {
    if (!realdata) truth.validate(n_locations);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("truth.") + e.what());
  }
  try {
    // The real-data contact matrix is only known after loading the census.
    if (!(realdata && model.contact_matrix.size() == 0)) model.validate(n_locations);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model.") + e.what());
  }
  if (lambda_schedule) {
    for (double v : {lambda_schedule->start, lambda_schedule->end}) {
      if (!(v >= 0.0)) throw ConfigError("truth.lambda_schedule values must be >= 0");
    }
  }
  for (const auto& spec : params) {
    spec.validate();
    try {
      ModelParams probe = with_locations(model, n_locations);
      (void)get_model_parameter(probe, spec.name);
    } catch (const std::exception&) {
      throw ConfigError("params: unknown or out-of-range parameter '" + spec.name + "'");
    }
    if (spec.name == "q_A" && !asymptomatic()) throw ConfigError("params: q_A needs the asymptomatic scenario");
  }
}

MatchReport matching_metrics(const AgentPopulation& truth, const AgentPopulation& est) {
  if (!truth.same_layout(est)) throw ContractViolation("matching metrics need populations with the same layout");
  if (truth.agents.empty()) throw ContractViolation("matching metrics need a non-empty population");
  const double n = static_cast<double>(truth.agents.size());

  MatchReport r;
  long same = 0;
  for (std::size_t k = 0; k < truth.agents.size(); ++k) same += truth.agents[k].status == est.agents[k].status;
  r.agent_id = static_cast<double>(same) / n;

  r.house_id = grouped_overlap(truth, est, truth.houses.size(),
                               [](const Agent& a) { return static_cast<std::size_t>(a.house); });
  r.household_type = grouped_overlap(truth, est, kMaxHouseSize, [&](const Agent& a) {
    return static_cast<std::size_t>(house_size_of(truth, a) - 1);
  });
  r.loc_household_type = grouped_overlap(
      truth, est, static_cast<std::size_t>(truth.n_locations) * kMaxHouseSize, [&](const Agent& a) {
        return static_cast<std::size_t>(a.location) * kMaxHouseSize + static_cast<std::size_t>(house_size_of(truth, a) - 1);
      });
  return r;
}

std::optional<std::array<double, kMaxHouseSize>> infections_by_house_size(const AgentPopulation& pop) {
  std::array<double, kMaxHouseSize> counts{};
  double total = 0.0;
  for (const auto& a : pop.agents) {
    if (!is_infected(a.status)) continue;
    counts[static_cast<std::size_t>(house_size_of(pop, a) - 1)] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) return std::nullopt;
  for (double& c : counts) c /= total;
  return counts;
}

std::array<double, kMaxHouseSize> residents_by_house_size(const AgentPopulation& pop) {
  std::array<double, kMaxHouseSize> share{};
  if (pop.agents.empty()) return share;
  for (const auto& h : pop.houses) share[h.members.size() - 1] += static_cast<double>(h.members.size());
  for (double& s : share) s /= static_cast<double>(pop.agents.size());
  return share;
}

Eigen::MatrixXd build_density_contact_matrix(std::span<const double> weights) {
  const auto n = static_cast<Eigen::Index>(weights.size());
  if (n == 0) throw ConfigError("contact matrix needs at least one location");
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError("location populations must be positive");
  }
  if (n == 1) return Eigen::MatrixXd::Identity(1, 1);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double others = total - weights[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i) {
      c(i, j) = i == j ? 0.5 : 0.5 * weights[static_cast<std::size_t>(i)] / others;
    }
  }
  return c;
}

TruthRun run_truth(const ExperimentConfig& config, bool keep_populations) {
  config.validate();
  Rng rng(config.truth_seed());
  Rng test_rng(derive_seed(config.truth_seed(), 1));
  ModelParams truth = with_locations(config.truth, config.n_locations);

  PopulationTemplate tmpl;
  tmpl.n_agents = config.n_agents;
  tmpl.n_locations = config.n_locations;
  tmpl.house_sizes = truth.house_sizes;
  tmpl.location_weights = config.location_weights;
  tmpl.seed_exposed = default_seeds(config);
  tmpl.asymptomatic = config.asymptomatic();
  AgentPopulation pop = make_population(tmpl, truth, rng);

  TruthRun run;
  run.resident_share = residents_by_house_size(pop);
  run.counts.push_back(aggregate(pop));
  run.house_infections.push_back(infections_by_house_size(pop));
  if (keep_populations) run.populations.push_back(pop);
  const bool testing = config.testing_fraction > 0.0;
  if (testing) run.tests.emplace_back();

  for (int t = 0; t < config.days; ++t) {
    if (config.lambda_schedule) {
      std::fill(truth.contact_rate.begin(), truth.contact_rate.end(), config.lambda_schedule->at(t, config.days));
    }
    run.contact_rate.push_back(truth.contact_rate);
    step_day(pop, truth, rng);
    run.counts.push_back(aggregate(pop));
    run.house_infections.push_back(infections_by_house_size(pop));
    if (keep_populations) run.populations.push_back(pop);
    if (testing) run.tests.push_back(simulate_random_testing(pop, config.testing_fraction, test_rng));
  }
  if (config.lambda_schedule) {
    std::fill(truth.contact_rate.begin(), truth.contact_rate.end(),
              config.lambda_schedule->at(config.days, config.days));
  }
  run.contact_rate.push_back(truth.contact_rate);
  return run;
}

RunArtifacts run_twin(const ExperimentConfig& config, const TwinOptions& options) {
  if (config.scenario == Scenario::RealData) throw ConfigError("run_twin does not handle the realdata scenario");
  config.validate();
  const bool track = config.shared_initial;
  const TruthRun truth = run_truth(config, track);

  const ObsErrorSpec errors = error_spec(config, config.n_agents, config.n_locations);
  Rng obs_rng(config.observation_seed());
  std::vector<ObservationBatch> batches =
      synthesize_observations(std::span(truth.counts).subspan(1), 1, errors, obs_rng);
  if (config.testing_fraction > 0.0) {
    for (std::size_t t = 0; t < batches.size(); ++t) {
      const TestResult& test = truth.tests[t + 1];
      batches[t].add(ObsKind::Positivity, -1, test.positivity());
      batches[t].n_tested = test.tested;
    }
  }

  const ModelParams base = with_locations(config.model, config.n_locations);
  auto make_ensemble = [&](std::uint64_t seed) {
    if (config.shared_initial) return init_ensemble_shared(config.n_members, truth.populations.front(), config.params, seed);
    PopulationTemplate tmpl;
    tmpl.n_agents = config.n_agents;
    tmpl.n_locations = config.n_locations;
    tmpl.house_sizes = base.house_sizes;
    tmpl.location_weights = config.location_weights;
    tmpl.seed_exposed = default_seeds(config);
    tmpl.asymptomatic = config.asymptomatic();
    return init_ensemble(config.n_members, tmpl, base, config.params, seed);
  };

  Ensemble ens = make_ensemble(config.ensemble_seed());
  std::optional<Ensemble> control;
  if (config.control) control = make_ensemble(config.control_seed());

  RunArtifacts art;
  art.scenario = std::string(scenario_label(config.scenario));
  art.method = std::string(method_label(config.method));
  art.n_locations = config.n_locations;
  art.asymptomatic = config.asymptomatic();
  for (int loc = 0; loc < config.n_locations; ++loc) art.location_names.push_back(std::to_string(loc));
  for (const auto& spec : config.params) art.param_names.push_back(spec.name);
  art.resident_share = truth.resident_share;
  art.seeds = {{"seed", config.seed},
               {"truth", config.truth_seed()},
               {"ensemble", config.ensemble_seed()},
               {"observations", config.observation_seed()}};
  if (control) art.control.emplace();

  SeriesRecorder recorder(ens);
  std::optional<SeriesRecorder> control_recorder;
  if (control) control_recorder.emplace(*control);

  const std::string group(method_label(config.method));
  if (track) {
    art.matches.push_back(match_record(0, group, truth.populations.front(), ens));
    if (control) art.matches.push_back(match_record(0, "control", truth.populations.front(), *control));
    if (options.on_day) options.on_day(0, &truth.populations.front(), ens);
  }

  const CycleConfig cycle = cycle_config(config, errors);
  Eigen::VectorXd previous_observed = Eigen::VectorXd::Constant(config.n_locations, kNaN);
  for (int day = 1; day <= config.days; ++day) {
    const ObservationBatch& batch = batches[static_cast<std::size_t>(day - 1)];
    forecast_step(ens, base, config.threads);
    if (config.method != AdjustmentMethod::None) {
      const CycleReport report = assimilation_cycle(ens, batch, base, cycle);
      record_innovations(art, batch, report);
      record_relabels(art, day, report);
    }
    art.days.push_back(day);
    recorder.record(ens, art.ensemble);
    art.truth.push_back(truth.counts[static_cast<std::size_t>(day)]);
    art.param_truth.push_back(truth_parameters(config, truth.contact_rate[static_cast<std::size_t>(day)]));
    art.observations.push_back(batch);

    Eigen::VectorXd observed(config.n_locations);
    for (int loc = 0; loc < config.n_locations; ++loc) observed(loc) = batch.values[static_cast<std::size_t>(loc)];
    art.observed_incidence.push_back((observed - previous_observed).cwiseMax(0.0));
    if (day == 1) art.observed_incidence.back().setConstant(kNaN);
    previous_observed = observed;

    art.house_infections.push_back(truth_house_record(day, truth.house_infections[static_cast<std::size_t>(day)]));
    art.house_infections.push_back(house_record(day, group, ens));

    if (control) {
      forecast_step(*control, base, config.threads);
      control_recorder->record(*control, *art.control);
      art.house_infections.push_back(house_record(day, "control", *control));
    }
    if (track) {
      const AgentPopulation& truth_pop = truth.populations[static_cast<std::size_t>(day)];
      art.matches.push_back(match_record(day, group, truth_pop, ens));
      if (control) art.matches.push_back(match_record(day, "control", truth_pop, *control));
    }
    if (options.on_day) options.on_day(day, track ? &truth.populations[static_cast<std::size_t>(day)] : nullptr, ens);
    if (options.verbose) log_day(art, day);
  }
  return art;
}

int realdata_agent_count(const DailyReportDataset& dataset, double scale) {
  if (!(scale > 0.0)) throw ConfigError("data.scale must be > 0");
  double total = 0.0;
  for (const auto& loc : dataset.locations) total += loc.population;
  const auto n = static_cast<long long>(std::llround(total / scale));
  if (n <= 0 || n > std::numeric_limits<int>::max()) throw ConfigError("data.scale gives an unusable number of agents");
  return static_cast<int>(n);
}

std::vector<Eigen::VectorXd> observed_daily_cases(const DailyReportDataset& dataset, double scale) {
  std::vector<Eigen::VectorXd> out;
  const int n_loc = dataset.n_locations();
  for (int t = 0; t < dataset.n_days(); ++t) {
    Eigen::VectorXd v(n_loc);
    for (int loc = 0; loc < n_loc; ++loc) {
      v(loc) = t == 0 ? kNaN
                      : std::round(dataset.cum_confirmed(t, loc) / scale) -
                            std::round(dataset.cum_confirmed(t - 1, loc) / scale);
    }
    out.push_back(v);
  }
  return out;
}

RunArtifacts run_realdata(const ExperimentConfig& config, const DailyReportDataset& dataset,
                          const TwinOptions& options) {
  if (config.scenario != Scenario::RealData) throw ConfigError("run_realdata needs the realdata scenario");
  const int n_loc = dataset.n_locations();
  if (n_loc == 0 || dataset.n_days() == 0) throw DataError("dataset is empty");
  if (n_loc != config.n_locations) {
    throw ConfigError("n_locations (" + std::to_string(config.n_locations) + ") does not match the dataset (" +
                      std::to_string(n_loc) + ")");
  }
  config.validate();
  const double scale = config.data_scale;
  const int n_agents = realdata_agent_count(dataset, scale);

  std::vector<double> weights;
  for (const auto& loc : dataset.locations) weights.push_back(loc.population);
  ModelParams base = with_locations(config.model, n_loc);
  if (base.contact_matrix.size() == 0) base.contact_matrix = build_density_contact_matrix(weights);
  base.validate(n_loc);

  std::vector<int> seeds = config.seed_exposed;
  if (seeds.empty()) {
    for (int loc = 0; loc < n_loc; ++loc) {
      seeds.push_back(std::max(1, static_cast<int>(std::lround(dataset.cum_confirmed(0, loc) / scale))));
    }
  }
  PopulationTemplate tmpl;
  tmpl.n_agents = n_agents;
  tmpl.n_locations = n_loc;
  tmpl.house_sizes = base.house_sizes;
  tmpl.location_weights = weights;
  tmpl.seed_exposed = seeds;
  Ensemble ens = init_ensemble(config.n_members, tmpl, base, config.params, config.ensemble_seed());

  // Scaled observations keyed by day offset.
  std::vector<std::optional<ObservationBatch>> by_day(static_cast<std::size_t>(dataset.day_offsets.back()) + 1);
  for (int t = 0; t < dataset.n_days(); ++t) {
    ObservationBatch batch;
    batch.day = dataset.day_offsets[static_cast<std::size_t>(t)];
    for (int loc = 0; loc < n_loc; ++loc) batch.add(ObsKind::Confirmed, loc, std::round(dataset.cum_confirmed(t, loc) / scale));
    for (int loc = 0; loc < n_loc; ++loc) batch.add(ObsKind::Deaths, loc, std::round(dataset.cum_deaths(t, loc) / scale));
    by_day[static_cast<std::size_t>(batch.day)] = std::move(batch);
  }
  const auto observed_cases = observed_daily_cases(dataset, scale);

  RunArtifacts art;
  art.scenario = std::string(scenario_label(config.scenario));
  art.method = std::string(method_label(config.method));
  art.n_locations = n_loc;
  for (const auto& loc : dataset.locations) art.location_names.push_back(std::to_string(loc.id));
  for (const auto& spec : config.params) art.param_names.push_back(spec.name);
  art.resident_share = residents_by_house_size(ens.members.front().population);
  art.seeds = {{"seed", config.seed}, {"ensemble", config.ensemble_seed()}};

  const ObsErrorSpec errors = error_spec(config, n_agents, n_loc);
  const CycleConfig cycle = cycle_config(config, errors);
  SeriesRecorder recorder(ens);
  const std::string group(method_label(config.method));

  std::size_t row = 0;
  const int last_day = dataset.day_offsets.back();
  for (int day = 0; day <= last_day; ++day) {
    if (day > 0) forecast_step(ens, base, config.threads);
    const auto& batch = by_day[static_cast<std::size_t>(day)];
    Eigen::VectorXd observed_new = Eigen::VectorXd::Constant(n_loc, kNaN);
    if (batch) {
      if (config.method != AdjustmentMethod::None) {
        const CycleReport report = assimilation_cycle(ens, *batch, base, cycle);
        record_innovations(art, *batch, report);
        record_relabels(art, day, report);
      }
      art.observations.push_back(*batch);
      art.dates.push_back(dataset.dates[row]);
      observed_new = observed_cases[row];
      ++row;
    } else {
      art.gap_days.push_back(day);
      art.dates.emplace_back();
    }
    art.days.push_back(day);
    recorder.record(ens, art.ensemble);
    art.observed_incidence.push_back(observed_new);
    art.house_infections.push_back(house_record(day, group, ens));
    if (options.on_day) options.on_day(day, nullptr, ens);
    if (options.verbose) log_day(art, day);
  }
  return art;
}

}  // namespace abmda
