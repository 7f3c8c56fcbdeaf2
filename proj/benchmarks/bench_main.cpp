// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "abmda/enkf.hpp"
#include "abmda/epi_abm.hpp"
#include "abmda/macro_map.hpp"

using namespace abmda;

namespace {

AgentPopulation seeded_population(int n_agents, Rng& rng) {
  const ModelParams params;
  const std::vector<double> weights{0.25, 0.25, 0.25, 0.25};
  AgentPopulation pop = init_population(n_agents, 4, params.house_sizes, weights, rng);
  const std::vector<int> seeds{n_agents / 100, n_agents / 100, n_agents / 100, n_agents / 100};
  seed_infections(pop, seeds, params, rng);
  return pop;
}

void BM_StepDay(benchmark::State& state) {
  Rng rng(1);
  ModelParams params;
  params.contact_rate = {0.8};
  AgentPopulation pop = seeded_population(static_cast<int>(state.range(0)), rng);
  const AgentPopulation start = pop;
  int day = 0;
  for (auto _ : state) {
    if (++day % 60 == 0) {
      state.PauseTiming();
      pop = start;
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(step_day(pop, params, rng));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StepDay)->Arg(10'000)->Arg(30'000);

void BM_AnalysisUpdate(benchmark::State& state) {
  const auto n_members = static_cast<int>(state.range(0));
  const int n_state = 15 * 7 + 1;
  const int n_obs = 30;
  Rng rng(2);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd base(n_state, n_members);
  for (Eigen::Index i = 0; i < base.size(); ++i) base.data()[i] = 100.0 + 10.0 * gauss(rng);
  Eigen::MatrixXd obs_op = Eigen::MatrixXd::Zero(n_obs, n_state);
  for (int i = 0; i < n_obs; ++i) obs_op(i, (i * 7) % n_state) = 1.0;
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(n_obs, 100.0);
  const Eigen::VectorXd variance = Eigen::VectorXd::Constant(n_obs, 4.0);
  std::vector<Rng> rngs;
  for (int j = 0; j < n_members; ++j) rngs.emplace_back(derive_seed(3, j));
  for (auto _ : state) {
    Eigen::MatrixXd states = base;
    benchmark::DoNotOptimize(analysis_update(states, y, obs_op, variance, rngs));
  }
}
BENCHMARK(BM_AnalysisUpdate)->Arg(50)->Arg(100)->Arg(400);

// Shifts roughly 1% of every location between neighbouring classes.
CountMatrix shifted_target(const AgentPopulation& pop) {
  CountMatrix t = aggregate(pop);
  for (Eigen::Index l = 0; l < t.rows(); ++l) {
    const int move = std::min(t(l, 0), static_cast<int>(t.row(l).sum() / 100));
    t(l, 0) -= move;
    t(l, 1) += move;
  }
  return t;
}

void BM_Adjustment(benchmark::State& state, AdjustmentMethod method) {
  Rng rng(4);
  const AgentPopulation start = seeded_population(static_cast<int>(state.range(0)), rng);
  const CountMatrix target = shifted_target(start);
  const ModelParams params;
  for (auto _ : state) {
    state.PauseTiming();
    AgentPopulation pop = start;
    state.ResumeTiming();
    benchmark::DoNotOptimize(adjust_population(pop, target, method, params, rng));
  }
}
BENCHMARK_CAPTURE(BM_Adjustment, randomized, AdjustmentMethod::Randomized)->Arg(10'000)->Arg(30'000);
BENCHMARK_CAPTURE(BM_Adjustment, cascade, AdjustmentMethod::Cascade)->Arg(10'000)->Arg(30'000);

}  // namespace

BENCHMARK_MAIN();
