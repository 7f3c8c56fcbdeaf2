// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "abmda/dataset.hpp"
#include "abmda/experiments.hpp"
#include "abmda/kl.hpp"

namespace abmda {

inline constexpr std::string_view kSchemaVersion = "abm-enkf/1";

/// Parsed CSV: header plus string cells. Lines starting with '#' before the
/// header are skipped; `line_numbers[i]` is the 1-based file line of rows[i].
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line_numbers;
  /// Value of a leading "#schema=..." line, if any.
  std::string schema;

  /// Column index of `name`; throws DataError if absent.
  std::size_t column(std::string_view name) const;
};

/// RFC-4180 subset: comma separated, optional double quotes with "" escapes,
/// no embedded newlines.
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form ('.' separator, locale independent).
/// NaN becomes an empty field.
std::string format_number(double v);
double parse_number(std::string_view text, long line = -1);

/// date,location_id,cum_confirmed,cum_deaths
/// Dates are YYYY-MM-DD and must not decrease down the file. Every date must
/// list every location once. Populations are left at zero.
DailyReportDataset load_daily_reports(const std::filesystem::path& path);

/// location_id,name,population
std::vector<LocationInfo> load_census(const std::filesystem::path& path);

/// Reports joined with the census (location ids must match exactly).
DailyReportDataset load_dataset(const std::filesystem::path& reports, const std::filesystem::path& census);

/// Days between two YYYY-MM-DD dates (b - a).
int days_between(std::string_view a, std::string_view b);

/// Writes macro_series.csv, params.csv, incidence.csv, innovations.csv,
/// relabels.csv, observations.csv, house_infections.csv, matches.csv (when
/// present), control_series.csv (when present) and run_meta.json.
void write_diagnostics(const RunArtifacts& art, const std::filesystem::path& out_dir);

/// Writes the truth trajectory of a `simulate` run: truth_series.csv and
/// run_meta.json.
void write_truth(const TruthRun& run, const ExperimentConfig& config, const std::string& config_echo,
                 const std::filesystem::path& out_dir);

struct ParamRow {
  int day = 0;
  std::string name;
  double mean = 0.0;
  double std = 0.0;
  double truth = 0.0;
};

struct MacroRow {
  int day = 0;
  std::string location;
  std::string status;
  double mean = 0.0;
  double std = 0.0;
  double truth = 0.0;
};

std::vector<ParamRow> read_params(const std::filesystem::path& path);
std::vector<MacroRow> read_macro_series(const std::filesystem::path& path);

/// Agent layout (agent_id,house_id,location) of a population.
void write_layout(const AgentPopulation& pop, const std::filesystem::path& path);
/// Rebuilds a population with every agent susceptible from a layout file.
AgentPopulation read_layout(const std::filesystem::path& path, bool asymptomatic);

/// Appends one status snapshot (day,source,statuses) where `statuses` holds one
/// digit per agent: the status index, in agent order.
class SnapshotWriter {
 public:
  explicit SnapshotWriter(const std::filesystem::path& path);
  void write(int day, std::string_view source, const AgentPopulation& pop);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct Snapshot {
  int day = 0;
  std::string source;
  std::string statuses;
};

std::vector<Snapshot> read_snapshots(const std::filesystem::path& path);

/// Overwrites the statuses of `pop` with a snapshot (durations are not restored).
void apply_snapshot(AgentPopulation& pop, const Snapshot& snap);

/// One row per (day, source) comparing every non-truth source with the truth
/// of the same day.
void write_matches_from_snapshots(const AgentPopulation& layout, const std::vector<Snapshot>& snapshots,
                                  const std::filesystem::path& path);

/// lambda,kl rows.
void write_kl_curve(const std::vector<KlPoint>& curve, const std::filesystem::path& path);

/// Writes `text` to `path`, throwing std::runtime_error with the path on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace abmda
