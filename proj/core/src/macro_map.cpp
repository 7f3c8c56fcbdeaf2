// SPDX-License-Identifier: Apache-2.0
#include "abmda/macro_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "abmda/error.hpp"

namespace abmda {

namespace {

using Bucket = std::vector<std::int32_t>;

void validate_target(const AgentPopulation& pop, const CountMatrix& target, const std::vector<int>& sizes) {
  if (target.rows() != pop.n_locations || target.cols() != pop.n_statuses()) {
    throw ContractViolation("target must be " + std::to_string(pop.n_locations) + "x" +
                            std::to_string(pop.n_statuses()));
  }
  if ((target.array() < 0).any()) throw ContractViolation("target counts must be non-negative");
  for (int loc = 0; loc < pop.n_locations; ++loc) {
    if (target.row(loc).sum() != sizes[static_cast<std::size_t>(loc)]) {
      throw ContractViolation("target row " + std::to_string(loc) + " sums to " +
                              std::to_string(target.row(loc).sum()) + " but the location has " +
                              std::to_string(sizes[static_cast<std::size_t>(loc)]) + " agents");
    }
  }
}

// Agents grouped by (location, class): bucket index loc * n_statuses + status.
std::vector<Bucket> bucket_agents(const AgentPopulation& pop) {
  const int n_statuses = pop.n_statuses();
  std::vector<Bucket> buckets(static_cast<std::size_t>(pop.n_locations * n_statuses));
  for (const auto& a : pop.agents) {
    buckets[static_cast<std::size_t>(a.location * n_statuses + index_of(a.status))].push_back(a.id);
  }
  return buckets;
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index<std::size_t>(rng, i)]);
  }
}

// Remaining-time counters of the agents that were in a class before the call.
class IncumbentCounters {
 public:
  IncumbentCounters(const AgentPopulation& pop, const std::vector<Bucket>& buckets, int location)
      : counters_(static_cast<std::size_t>(pop.n_statuses())) {
    const int n_statuses = pop.n_statuses();
    for (int s = 0; s < n_statuses; ++s) {
      if (!has_duration(status_at(s))) continue;
      for (std::int32_t id : buckets[static_cast<std::size_t>(location * n_statuses + s)]) {
        counters_[static_cast<std::size_t>(s)].push_back(pop.agents[static_cast<std::size_t>(id)].remaining_days);
      }
    }
  }

  double draw(HealthStatus s, const ModelParams& params, Rng& rng) const {
    const auto& pool = counters_[static_cast<std::size_t>(index_of(s))];
    if (pool.empty()) return sample_duration(s, params, rng);
    return pool[uniform_index<std::size_t>(rng, pool.size())];
  }

 private:
  std::vector<std::vector<double>> counters_;
};

void relabel(Agent& agent, HealthStatus to, const IncumbentCounters& counters, const ModelParams& params, Rng& rng,
             AdjustmentReport& report) {
  report.moves.push_back({agent.id, agent.status, to});
  agent.status = to;
  agent.days_in_status = 0;
  agent.remaining_days = has_duration(to) ? counters.draw(to, params, rng) : 0.0;
  if (to == HealthStatus::Susceptible) agent.risky_contacts = 0;
}

void count_distinct(const AgentPopulation& pop, AdjustmentReport& report) {
  std::vector<char> seen(pop.agents.size(), 0);
  report.relabeled_per_location.assign(static_cast<std::size_t>(pop.n_locations), 0);
  for (const auto& m : report.moves) {
    auto& flag = seen[static_cast<std::size_t>(m.agent)];
    if (flag) continue;
    flag = 1;
    ++report.relabeled_per_location[static_cast<std::size_t>(pop.agents[static_cast<std::size_t>(m.agent)].location)];
  }
}

}  // namespace

int AdjustmentReport::total_relabeled() const {
  return std::accumulate(relabeled_per_location.begin(), relabeled_per_location.end(), 0);
}

CountMatrix aggregate(const AgentPopulation& pop) {
  CountMatrix counts = CountMatrix::Zero(pop.n_locations, pop.n_statuses());
  for (const auto& a : pop.agents) ++counts(a.location, index_of(a.status));
  return counts;
}

std::vector<int> integerize(std::span<const double> values, int total) {
  if (total < 0) throw ContractViolation("integerize needs a non-negative total");
  if (values.empty()) {
    if (total != 0) throw ContractViolation("cannot distribute units over an empty vector");
    return {};
  }
  const std::size_t n = values.size();
  std::vector<long long> out(n);
  std::vector<double> fraction(n);
  long long assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(values[i])) throw NumericalError("integerize received a non-finite count");
    const double x = std::max(0.0, values[i]);
    const double whole = std::floor(x);
    out[i] = static_cast<long long>(whole);
    fraction[i] = x - whole;
    assigned += out[i];
  }

  auto largest = [&out]() {
    return static_cast<std::size_t>(std::distance(out.begin(), std::max_element(out.begin(), out.end())));
  };

  long long missing = total - assigned;
  if (missing > 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&fraction](std::size_t a, std::size_t b) { return fraction[a] > fraction[b]; });
    for (std::size_t i : order) {
      if (missing == 0 || fraction[i] <= 0.0) break;
      ++out[i];
      --missing;
    }
    for (; missing > 0; --missing) ++out[largest()];
  }
  for (; missing < 0; ++missing) --out[largest()];

  return {out.begin(), out.end()};
}

CountMatrix integerize_rows(const RealMatrix& counts, std::span<const int> sizes) {
  if (static_cast<std::size_t>(counts.rows()) != sizes.size()) {
    throw ContractViolation("integerize_rows needs one size per row");
  }
  CountMatrix out(counts.rows(), counts.cols());
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    const auto row = integerize(std::span<const double>(counts.row(r).data(), static_cast<std::size_t>(counts.cols())),
                                sizes[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < counts.cols(); ++c) out(r, c) = row[static_cast<std::size_t>(c)];
  }
  return out;
}

AdjustmentReport randomized_redistribution(AgentPopulation& pop, const CountMatrix& target,
                                           const ModelParams& params, Rng& rng) {
  const auto sizes = pop.location_sizes();
  validate_target(pop, target, sizes);
  const int n_statuses = pop.n_statuses();
  auto buckets = bucket_agents(pop);

  AdjustmentReport report;
  for (int loc = 0; loc < pop.n_locations; ++loc) {
    auto bucket = [&](int s) -> Bucket& { return buckets[static_cast<std::size_t>(loc * n_statuses + s)]; };
    bool balanced = true;
    for (int s = 0; s < n_statuses && balanced; ++s) {
      balanced = static_cast<int>(bucket(s).size()) == target(loc, s);
    }
    if (balanced) continue;

    const IncumbentCounters counters(pop, buckets, loc);

    Bucket pool;
    for (int s = 0; s < n_statuses; ++s) {
      auto& members = bucket(s);
      const int surplus = static_cast<int>(members.size()) - target(loc, s);
      for (int i = 0; i < surplus; ++i) {
        const auto j = static_cast<std::size_t>(i) +
                       uniform_index<std::size_t>(rng, members.size() - static_cast<std::size_t>(i));
        std::swap(members[static_cast<std::size_t>(i)], members[j]);
        pool.push_back(members[static_cast<std::size_t>(i)]);
      }
    }
    shuffle_in_place(pool, rng);

    std::size_t next = 0;
    for (int s = 0; s < n_statuses; ++s) {
      const int deficit = target(loc, s) - static_cast<int>(bucket(s).size());
      for (int i = 0; i < deficit; ++i) {
        relabel(pop.agents[static_cast<std::size_t>(pool[next++])], status_at(s), counters, params, rng, report);
      }
    }
  }
  count_distinct(pop, report);
  return report;
}

std::array<int, kProgressionArcs.size()> cascade_arc_flows(std::span<const int> current, std::span<const int> target) {
  if (current.size() != target.size() ||
      (current.size() != kBaseStatusCount && current.size() != kExtendedStatusCount)) {
    throw ContractViolation("cascade flows need matching 7- or 9-class vectors");
  }
  auto delta = [&](HealthStatus s) -> int {
    const auto i = static_cast<std::size_t>(index_of(s));
    return i < current.size() ? target[i] - current[i] : 0;
  };
  const int d_exposed = delta(HealthStatus::Exposed);
  const int d_mild = delta(HealthStatus::Mild);
  const int d_severe = delta(HealthStatus::Severe);
  const int d_hosp = delta(HealthStatus::Hospitalized);
  const int d_rec = delta(HealthStatus::Recovered);
  const int d_dead = delta(HealthStatus::Dead);
  const int d_asym = delta(HealthStatus::Asymptomatic);
  const int d_rec_asym = delta(HealthStatus::RecoveredAsymptomatic);

  // Arc order follows kProgressionArcs.
  std::array<int, kProgressionArcs.size()> flow{};
  flow[7] = d_dead;                 // H -> D
  flow[8] = d_rec_asym;             // I_A -> R_A
  flow[3] = d_asym + flow[8];       // E -> I_A
  // Free flow h on H -> R. Every arc of the cycle E-I_M-R-H-I_S-E is affine
  // in h with slope +-1, so the total |flow| is minimized at the median.
  std::array<int, 5> knots{d_rec, d_mild + d_rec, -(d_hosp + d_dead), -(d_severe + d_hosp + d_dead), 0};
  std::nth_element(knots.begin(), knots.begin() + 2, knots.end());
  const int h = knots[2];
  flow[6] = h;                      // H -> R
  flow[4] = d_rec - h;              // I_M -> R
  flow[1] = d_mild + flow[4];       // E -> I_M
  flow[5] = d_hosp + h + flow[7];   // I_S -> H
  flow[2] = d_severe + flow[5];     // E -> I_S
  flow[0] = d_exposed + flow[1] + flow[2] + flow[3];  // S -> E
  return flow;
}

AdjustmentReport backward_cascade_redistribution(AgentPopulation& pop, const CountMatrix& target,
                                                 const ModelParams& params, Rng& rng) {
  const auto sizes = pop.location_sizes();
  validate_target(pop, target, sizes);
  const int n_statuses = pop.n_statuses();
  auto buckets = bucket_agents(pop);

  struct Move {
    HealthStatus from;
    HealthStatus to;
    int amount;
    bool done = false;
  };

  AdjustmentReport report;
  std::vector<int> current(static_cast<std::size_t>(n_statuses));
  std::vector<int> wanted(static_cast<std::size_t>(n_statuses));
  for (int loc = 0; loc < pop.n_locations; ++loc) {
    auto bucket = [&](HealthStatus s) -> Bucket& {
      return buckets[static_cast<std::size_t>(loc * n_statuses + index_of(s))];
    };
    bool balanced = true;
    for (int s = 0; s < n_statuses; ++s) {
      current[static_cast<std::size_t>(s)] = static_cast<int>(bucket(status_at(s)).size());
      wanted[static_cast<std::size_t>(s)] = target(loc, s);
      balanced = balanced && current[static_cast<std::size_t>(s)] == wanted[static_cast<std::size_t>(s)];
    }
    if (balanced) continue;

    const auto flow = cascade_arc_flows(current, wanted);
    std::vector<Move> moves;
    for (std::size_t a = 0; a < flow.size(); ++a) {
      if (flow[a] > 0) moves.push_back({kProgressionArcs[a].from, kProgressionArcs[a].to, flow[a]});
      if (flow[a] < 0) moves.push_back({kProgressionArcs[a].to, kProgressionArcs[a].from, -flow[a]});
    }

    const IncumbentCounters counters(pop, buckets, loc);

    // Execute a move once its source class has received all of its inflow.
    for (std::size_t executed = 0; executed < moves.size(); ++executed) {
      auto ready = std::find_if(moves.begin(), moves.end(), [&moves](const Move& m) {
        if (m.done) return false;
        return std::none_of(moves.begin(), moves.end(),
                            [&m](const Move& other) { return !other.done && other.to == m.from; });
      });
      if (ready == moves.end()) throw ContractViolation("cascade flows contain a directed cycle");

      Bucket candidates = bucket(ready->from);
      if (static_cast<int>(candidates.size()) < ready->amount) {
        throw ContractViolation("cascade move exceeds the available agents");
      }
      const bool forward = is_forward_arc(ready->from, ready->to);
      const bool by_contacts = forward && ready->from == HealthStatus::Susceptible;
      auto key = [&](std::int32_t id) -> long {
        const Agent& a = pop.agents[static_cast<std::size_t>(id)];
        return by_contacts ? a.risky_contacts : a.days_in_status;
      };
      shuffle_in_place(candidates, rng);
      auto nth = candidates.begin() + ready->amount;
      if (forward) {
        std::nth_element(candidates.begin(), nth, candidates.end(),
                         [&](std::int32_t x, std::int32_t y) { return key(x) > key(y); });
      } else {
        std::nth_element(candidates.begin(), nth, candidates.end(),
                         [&](std::int32_t x, std::int32_t y) { return key(x) < key(y); });
      }
      auto& destination = bucket(ready->to);
      for (auto it = candidates.begin(); it != nth; ++it) {
        relabel(pop.agents[static_cast<std::size_t>(*it)], ready->to, counters, params, rng, report);
        destination.push_back(*it);
      }
      bucket(ready->from).assign(nth, candidates.end());
      ready->done = true;
    }
  }
  count_distinct(pop, report);
  return report;
}

AdjustmentReport adjust_population(AgentPopulation& pop, const CountMatrix& target, AdjustmentMethod method,
                                   const ModelParams& params, Rng& rng) {
  switch (method) {
    case AdjustmentMethod::Randomized:
      return randomized_redistribution(pop, target, params, rng);
    case AdjustmentMethod::Cascade:
      return backward_cascade_redistribution(pop, target, params, rng);
    case AdjustmentMethod::None:
      break;
  }
  AdjustmentReport report;
  report.relabeled_per_location.assign(static_cast<std::size_t>(pop.n_locations), 0);
  return report;
}

}  // namespace abmda
