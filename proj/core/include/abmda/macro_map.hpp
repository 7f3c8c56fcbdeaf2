// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abmda/epi_abm.hpp"

namespace abmda {

/// Agents per (location, class). Rows are locations, columns follow HealthStatus.
using CountMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Aggregated state the filter works on: real-valued compartment counts per
/// location plus the augmented model parameters.
struct MacroState {
  RealMatrix counts;
  std::vector<std::string> param_names;
  Eigen::VectorXd params;

  int n_locations() const noexcept { return static_cast<int>(counts.rows()); }
  int n_statuses() const noexcept { return static_cast<int>(counts.cols()); }
};

/// Counts agents per location and class.
CountMatrix aggregate(const AgentPopulation& pop);

/// Projects a real-valued count vector onto the non-negative integer vectors
/// summing to `total`, minimizing the L1 distance to the clamped input.
///
/// Negative entries are clamped to zero and every entry is floored. Missing
/// units go first to the largest fractional parts (ties: lower index), then
/// one at a time to the currently largest entry. Surplus units are removed
/// one at a time from the currently largest entry (ties: lower index).
std::vector<int> integerize(std::span<const double> values, int total);

/// Applies `integerize` to every row of `counts`, using the row totals of `sizes`.
CountMatrix integerize_rows(const RealMatrix& counts, std::span<const int> sizes);

enum class AdjustmentMethod { Randomized, Cascade, None };

struct Relabel {
  std::int32_t agent = 0;
  HealthStatus from = HealthStatus::Susceptible;
  HealthStatus to = HealthStatus::Susceptible;
};

struct AdjustmentReport {
  /// Distinct agents whose class changed, per location.
  std::vector<int> relabeled_per_location;
  /// Every individual class change, in the order applied. The cascade method
  /// may move one agent across several adjacent classes in one call.
  std::vector<Relabel> moves;

  int total_relabeled() const;
};

/// Relabels uniformly chosen agents from classes with a surplus into classes
/// with a deficit, location by location. Moves the minimum number of agents.
///
/// Agents relabeled into a class with a residence time get their counter
/// drawn uniformly from the counters of the agents already in that class
/// and location, or from the Gamma prior in `params` when there are none.
AdjustmentReport randomized_redistribution(AgentPopulation& pop, const CountMatrix& target,
                                           const ModelParams& params, Rng& rng);

/// Reaches `target` by moving agents only between adjacent classes of the
/// progression diagram, selecting the agents most likely to make the move.
///
/// Per location the net flow on every arc is solved backwards from the
/// terminal classes (D, R, R_A) to S. The arcs I_M->R and H->R close a cycle;
/// its free flow is chosen to minimize the total number of moves. Arcs are then executed so that a
/// class receives all its inflow before any outflow, which keeps every move
/// feasible. Forward moves take the agents with the most days in their class
/// (S->E: most risky contacts); backward moves take the fewest days. Ties
/// are broken uniformly at random.
AdjustmentReport backward_cascade_redistribution(AgentPopulation& pop, const CountMatrix& target,
                                                 const ModelParams& params, Rng& rng);

/// Dispatches on `method`; `None` leaves the population untouched.
AdjustmentReport adjust_population(AgentPopulation& pop, const CountMatrix& target, AdjustmentMethod method,
                                   const ModelParams& params, Rng& rng);

/// Net agent flow on every arc of kProgressionArcs (positive = with the flow)
/// that turns `current` into `target` for one location. Exposed for testing.
std::array<int, kProgressionArcs.size()> cascade_arc_flows(std::span<const int> current, std::span<const int> target);

}  // namespace abmda
