// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace abmda {

struct LocationInfo {
  int id = 0;
  std::string name;
  double population = 0.0;
};

/// Cumulative daily reports per location. Row t of each matrix is `dates[t]`;
/// `day_offsets[t]` counts calendar days since dates[0], so gaps show up as
/// jumps larger than one.
struct DailyReportDataset {
  std::vector<LocationInfo> locations;
  std::vector<std::string> dates;
  std::vector<int> day_offsets;
  Eigen::MatrixXd cum_confirmed;
  Eigen::MatrixXd cum_deaths;
  /// Non-fatal findings such as decreasing cumulative values.
  std::vector<std::string> warnings;

  int n_days() const noexcept { return static_cast<int>(dates.size()); }
  int n_locations() const noexcept { return static_cast<int>(locations.size()); }
};

}  // namespace abmda
