// SPDX-License-Identifier: Apache-2.0
#include "abmda/status.hpp"

namespace abmda {

namespace {
constexpr std::array<std::string_view, kExtendedStatusCount> kLabels{"S", "E", "I_M", "I_S", "H",
                                                                     "R", "D", "I_A", "R_A"};
}

std::string_view status_label(HealthStatus s) noexcept { return kLabels[index_of(s)]; }

std::optional<HealthStatus> parse_status_label(std::string_view label) noexcept {
  for (int i = 0; i < kExtendedStatusCount; ++i) {
    if (kLabels[i] == label) return status_at(i);
  }
  return std::nullopt;
}

}  // namespace abmda
