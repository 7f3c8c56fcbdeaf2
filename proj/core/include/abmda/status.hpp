// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace abmda {

/// Epidemiological class of an agent. The numeric value is also the column
/// index of the class in every macro-state table, so the order is fixed:
/// S, E, I_M, I_S, H, R, D and, with the asymptomatic extension, I_A, R_A.
enum class HealthStatus : std::uint8_t {
  Susceptible = 0,
  Exposed = 1,
  Mild = 2,
  Severe = 3,
  Hospitalized = 4,
  Recovered = 5,
  Dead = 6,
  Asymptomatic = 7,
  RecoveredAsymptomatic = 8,
};

inline constexpr int kBaseStatusCount = 7;
inline constexpr int kExtendedStatusCount = 9;

constexpr int status_count(bool asymptomatic) noexcept {
  return asymptomatic ? kExtendedStatusCount : kBaseStatusCount;
}

constexpr int index_of(HealthStatus s) noexcept { return static_cast<int>(s); }
constexpr HealthStatus status_at(int index) noexcept { return static_cast<HealthStatus>(index); }

/// Short label used in every CSV output ("S", "E", "I_M", ...).
std::string_view status_label(HealthStatus s) noexcept;
std::optional<HealthStatus> parse_status_label(std::string_view label) noexcept;

/// Classes with a Gamma-distributed residence time.
constexpr bool has_duration(HealthStatus s) noexcept {
  switch (s) {
    case HealthStatus::Exposed:
    case HealthStatus::Mild:
    case HealthStatus::Severe:
    case HealthStatus::Hospitalized:
    case HealthStatus::Asymptomatic:
      return true;
    default:
      return false;
  }
}

constexpr bool is_infectious(HealthStatus s) noexcept {
  return s == HealthStatus::Mild || s == HealthStatus::Severe || s == HealthStatus::Asymptomatic;
}

/// Counted as "currently infected" (positive test, infections by house size).
constexpr bool is_active_infection(HealthStatus s) noexcept {
  return s == HealthStatus::Mild || s == HealthStatus::Severe ||
         s == HealthStatus::Asymptomatic || s == HealthStatus::Hospitalized;
}

/// Hospitalized and dead agents neither initiate nor receive contacts.
constexpr bool can_contact(HealthStatus s) noexcept {
  return s != HealthStatus::Hospitalized && s != HealthStatus::Dead;
}

/// A directed arc of the progression diagram, oriented with the disease flow.
struct ProgressionArc {
  HealthStatus from;
  HealthStatus to;
};

inline constexpr std::array<ProgressionArc, 9> kProgressionArcs{{
    {HealthStatus::Susceptible, HealthStatus::Exposed},
    {HealthStatus::Exposed, HealthStatus::Mild},
    {HealthStatus::Exposed, HealthStatus::Severe},
    {HealthStatus::Exposed, HealthStatus::Asymptomatic},
    {HealthStatus::Mild, HealthStatus::Recovered},
    {HealthStatus::Severe, HealthStatus::Hospitalized},
    {HealthStatus::Hospitalized, HealthStatus::Recovered},
    {HealthStatus::Hospitalized, HealthStatus::Dead},
    {HealthStatus::Asymptomatic, HealthStatus::RecoveredAsymptomatic},
}};

/// True when `from -> to` follows an arc of the diagram in the flow direction.
constexpr bool is_forward_arc(HealthStatus from, HealthStatus to) noexcept {
  for (const auto& arc : kProgressionArcs) {
    if (arc.from == from && arc.to == to) return true;
  }
  return false;
}

/// True when the two classes share an arc, in either direction.
constexpr bool is_adjacent(HealthStatus a, HealthStatus b) noexcept {
  return is_forward_arc(a, b) || is_forward_arc(b, a);
}

}  // namespace abmda
