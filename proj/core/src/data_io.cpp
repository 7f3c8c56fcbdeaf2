// SPDX-License-Identifier: Apache-2.0
#include "abmda/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "abmda/error.hpp"

namespace abmda {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(std::string_view line, long line_no) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      if (!cell.empty() || was_quoted) throw DataError("stray quote in CSV field", line_no);
      quoted = was_quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
      was_quoted = false;
    } else {
      if (was_quoted) throw DataError("text after closing quote in CSV field", line_no);
      cell.push_back(c);
    }
  }
  if (quoted) throw DataError("unterminated quoted CSV field", line_no);
  cells.push_back(std::move(cell));
  return cells;
}

std::string quote_if_needed(std::string_view s) {
  if (s.find_first_of(",\"") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

int parse_int(std::string_view text, long line, std::string_view what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw DataError("invalid " + std::string(what) + " '" + std::string(text) + "'", line);
  }
  return v;
}

// Days since 1970-01-01 of a proleptic Gregorian date.
long days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

long parse_date(std::string_view text, long line) {
  const auto bad = [&] { return DataError("invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)", line); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  int y = 0;
  int m = 0;
  int d = 0;
  try {
    y = parse_int(text.substr(0, 4), line, "year");
    m = parse_int(text.substr(5, 2), line, "month");
    d = parse_int(text.substr(8, 2), line, "day");
  } catch (const DataError&) {
    throw bad();
  }
  static constexpr int kDays[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  if (m < 1 || m > 12 || d < 1 || d > kDays[m - 1] || (m == 2 && d == 29 && !leap)) throw bad();
  return days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

void require_header(const CsvTable& table, const std::vector<std::string>& expected, const fs::path& path) {
  if (table.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw DataError(path.string() + ": header must be '" + want + "'", 1);
  }
}

class CsvOut {
 public:
  CsvOut(const fs::path& path, std::initializer_list<std::string_view> header) : path_(path) {
    text_ += "#schema=";
    text_ += kSchemaVersion;
    text_ += '\n';
    bool first = true;
    for (auto h : header) {
      if (!first) text_ += ',';
      text_ += h;
      first = false;
    }
    text_ += '\n';
  }

  CsvOut& cell(std::string_view s) {
    sep();
    text_ += quote_if_needed(s);
    return *this;
  }
  CsvOut& cell(double v) {
    sep();
    text_ += format_number(v);
    return *this;
  }
  CsvOut& cell(int v) {
    sep();
    text_ += std::to_string(v);
    return *this;
  }
  void end_row() {
    text_ += '\n';
    fresh_ = true;
  }
  void save() const { write_text_file(path_, text_); }

 private:
  void sep() {
    if (!fresh_) text_ += ',';
    fresh_ = false;
  }

  fs::path path_;
  std::string text_;
  bool fresh_ = true;
};

void write_series(const fs::path& path, const RunArtifacts& art, const EnsembleSeries& series, bool with_truth) {
  CsvOut out(path, {"day", "location", "status", "mean", "std", "truth"});
  const int n_status = status_count(art.asymptomatic);
  for (std::size_t t = 0; t < art.days.size(); ++t) {
    for (int loc = 0; loc < art.n_locations; ++loc) {
      for (int s = 0; s < n_status; ++s) {
        out.cell(art.days[t])
            .cell(art.location_names[static_cast<std::size_t>(loc)])
            .cell(status_label(status_at(s)))
            .cell(series.mean[t](loc, s))
            .cell(series.std[t](loc, s))
            .cell(with_truth && t < art.truth.size() ? static_cast<double>(art.truth[t](loc, s)) : kNaN);
        out.end_row();
      }
    }
  }
  out.save();
}

std::string json_escape(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
  return out;
}

std::string json_number(double v) { return std::isfinite(v) ? format_number(v) : "null"; }

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("missing column '" + std::string(name) + "'", 1);
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  long line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.rfind("#schema=", 0) == 0) {
        table.schema = line.substr(8);
        continue;
      }
      if (!line.empty() && line.front() == '#') continue;
      if (line.empty()) continue;
      table.header = split_csv_line(line, line_no);
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto cells = split_csv_line(line, line_no);
    if (cells.size() != table.header.size()) {
      throw DataError(path.string() + ": expected " + std::to_string(table.header.size()) + " fields, got " +
                          std::to_string(cells.size()),
                      line_no);
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw DataError(path.string() + ": missing header row");
  return table;
}

std::string format_number(double v) {
  if (std::isnan(v)) return {};
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_number(std::string_view text, long line) {
  if (text.empty()) return kNaN;
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw DataError("invalid number '" + std::string(text) + "'", line);
  }
  return v;
}

int days_between(std::string_view a, std::string_view b) {
  return static_cast<int>(parse_date(b, -1) - parse_date(a, -1));
}

DailyReportDataset load_daily_reports(const fs::path& path) {
  const CsvTable table = read_csv(path);
  require_header(table, {"date", "location_id", "cum_confirmed", "cum_deaths"}, path);

  struct Row {
    long date;
    int location;
    double confirmed;
    double deaths;
    long line;
  };
  std::vector<Row> rows;
  std::vector<std::string> out_of_order;
  std::map<long, std::string> date_text;
  long previous = std::numeric_limits<long>::min();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& cells = table.rows[i];
    const long line = table.line_numbers[i];
    Row r{parse_date(cells[0], line), parse_int(cells[1], line, "location_id"), parse_number(cells[2], line),
          parse_number(cells[3], line), line};
    if (!std::isfinite(r.confirmed) || !std::isfinite(r.deaths)) throw DataError("missing count", line);
    if (r.confirmed < 0.0 || r.deaths < 0.0) throw DataError("negative count", line);
    if (r.date < previous) out_of_order.push_back("line " + std::to_string(line) + " (" + cells[0] + ")");
    previous = std::max(previous, r.date);
    date_text.emplace(r.date, cells[0]);
    rows.push_back(r);
  }
  if (!out_of_order.empty()) {
    std::string list;
    for (const auto& o : out_of_order) list += (list.empty() ? "" : ", ") + o;
    throw DataError(path.string() + ": dates must not decrease; offenders: " + list);
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");

  std::set<int> ids;
  for (const auto& r : rows) ids.insert(r.location);
  std::vector<int> id_list(ids.begin(), ids.end());
  std::map<int, int> column_of;
  for (std::size_t k = 0; k < id_list.size(); ++k) column_of[id_list[k]] = static_cast<int>(k);

  DailyReportDataset ds;
  for (int id : id_list) ds.locations.push_back({id, std::to_string(id), 0.0});
  std::map<long, int> row_of;
  for (const auto& [date, text] : date_text) {
    row_of[date] = static_cast<int>(ds.dates.size());
    ds.dates.push_back(text);
    ds.day_offsets.push_back(static_cast<int>(date - date_text.begin()->first));
  }
  const auto n_days = static_cast<Eigen::Index>(ds.dates.size());
  const auto n_loc = static_cast<Eigen::Index>(id_list.size());
  ds.cum_confirmed = Eigen::MatrixXd::Constant(n_days, n_loc, kNaN);
  ds.cum_deaths = Eigen::MatrixXd::Constant(n_days, n_loc, kNaN);
  for (const auto& r : rows) {
    const int t = row_of[r.date];
    const int c = column_of[r.location];
    if (!std::isnan(ds.cum_confirmed(t, c))) {
      throw DataError("duplicate row for " + ds.dates[static_cast<std::size_t>(t)] + ", location " +
                          std::to_string(r.location),
                      r.line);
    }
    ds.cum_confirmed(t, c) = r.confirmed;
    ds.cum_deaths(t, c) = r.deaths;
  }
  for (Eigen::Index t = 0; t < n_days; ++t) {
    for (Eigen::Index c = 0; c < n_loc; ++c) {
      if (std::isnan(ds.cum_confirmed(t, c))) {
        throw DataError(path.string() + ": date " + ds.dates[static_cast<std::size_t>(t)] + " has no row for location " +
                        std::to_string(id_list[static_cast<std::size_t>(c)]));
      }
      if (t > 0 && ds.cum_confirmed(t, c) < ds.cum_confirmed(t - 1, c)) {
        ds.warnings.push_back("cumulative confirmed decreases on " + ds.dates[static_cast<std::size_t>(t)] +
                              " in location " + std::to_string(id_list[static_cast<std::size_t>(c)]));
      }
      if (t > 0 && ds.cum_deaths(t, c) < ds.cum_deaths(t - 1, c)) {
        ds.warnings.push_back("cumulative deaths decrease on " + ds.dates[static_cast<std::size_t>(t)] +
                              " in location " + std::to_string(id_list[static_cast<std::size_t>(c)]));
      }
    }
  }
  return ds;
}

std::vector<LocationInfo> load_census(const fs::path& path) {
  const CsvTable table = read_csv(path);
  require_header(table, {"location_id", "name", "population"}, path);
  std::vector<LocationInfo> out;
  std::set<int> seen;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const long line = table.line_numbers[i];
    LocationInfo info{parse_int(table.rows[i][0], line, "location_id"), table.rows[i][1],
                      parse_number(table.rows[i][2], line)};
    if (!(info.population > 0.0) || !std::isfinite(info.population)) {
      throw DataError("population must be positive", line);
    }
    if (!seen.insert(info.id).second) throw DataError("duplicate location_id " + std::to_string(info.id), line);
    out.push_back(std::move(info));
  }
  if (out.empty()) throw DataError(path.string() + ": no locations");
  std::sort(out.begin(), out.end(), [](const LocationInfo& a, const LocationInfo& b) { return a.id < b.id; });
  return out;
}

DailyReportDataset load_dataset(const fs::path& reports, const fs::path& census) {
  DailyReportDataset ds = load_daily_reports(reports);
  const auto locations = load_census(census);
  if (locations.size() != ds.locations.size()) {
    throw DataError("census lists " + std::to_string(locations.size()) + " locations but the reports have " +
                    std::to_string(ds.locations.size()));
  }
  for (std::size_t k = 0; k < locations.size(); ++k) {
    if (locations[k].id != ds.locations[k].id) {
      throw DataError("census location ids do not match the reports (first mismatch: " +
                      std::to_string(locations[k].id) + ")");
    }
  }
  ds.locations = locations;
  return ds;
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

std::string meta_json(const RunArtifacts& art) {
  std::ostringstream js;
  js << "{\n  \"schema\": " << json_escape(kSchemaVersion) << ",\n";
  js << "  \"scenario\": " << json_escape(art.scenario) << ",\n";
  js << "  \"method\": " << json_escape(art.method) << ",\n";
  js << "  \"seeds\": {";
  for (std::size_t i = 0; i < art.seeds.size(); ++i) {
    js << (i ? ", " : "") << json_escape(art.seeds[i].first) << ": " << art.seeds[i].second;
  }
  js << "},\n";
  js << "  \"n_locations\": " << art.n_locations << ",\n";
  js << "  \"asymptomatic\": " << (art.asymptomatic ? "true" : "false") << ",\n";
  js << "  \"first_day\": " << (art.days.empty() ? 0 : art.days.front()) << ",\n";
  js << "  \"last_day\": " << (art.days.empty() ? 0 : art.days.back()) << ",\n";
  std::string start_date;
  for (const auto& d : art.dates) {
    if (!d.empty()) {
      start_date = d;
      break;
    }
  }
  js << "  \"start_date\": " << (start_date.empty() ? "null" : json_escape(start_date)) << ",\n";
  js << "  \"gap_days\": [";
  for (std::size_t i = 0; i < art.gap_days.size(); ++i) js << (i ? ", " : "") << art.gap_days[i];
  js << "],\n";
  js << "  \"resident_share_by_house_size\": [";
  for (std::size_t i = 0; i < art.resident_share.size(); ++i) js << (i ? ", " : "") << json_number(art.resident_share[i]);
  js << "],\n";
  js << "  \"config\": " << (art.config_echo.empty() ? "null" : art.config_echo) << "\n}\n";
  return js.str();
}

}  // namespace

void write_diagnostics(const RunArtifacts& art, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  write_series(out_dir / "macro_series.csv", art, art.ensemble, true);
  if (art.control) write_series(out_dir / "control_series.csv", art, *art.control, true);

  {
    CsvOut out(out_dir / "params.csv", {"day", "name", "mean", "std", "truth"});
    for (std::size_t t = 0; t < art.days.size(); ++t) {
      for (std::size_t k = 0; k < art.param_names.size(); ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        out.cell(art.days[t])
            .cell(art.param_names[k])
            .cell(art.ensemble.param_mean[t](e))
            .cell(art.ensemble.param_std[t](e))
            .cell(t < art.param_truth.size() ? art.param_truth[t](e) : kNaN);
        out.end_row();
      }
    }
    out.save();
  }
  {
    CsvOut out(out_dir / "incidence.csv", {"day", "location", "new_cases_mean", "new_cases_std", "observed"});
    for (std::size_t t = 0; t < art.days.size(); ++t) {
      for (int loc = 0; loc < art.n_locations; ++loc) {
        out.cell(art.days[t])
            .cell(art.location_names[static_cast<std::size_t>(loc)])
            .cell(art.ensemble.incidence_mean[t](loc))
            .cell(art.ensemble.incidence_std[t](loc))
            .cell(t < art.observed_incidence.size() ? art.observed_incidence[t](loc) : kNaN);
        out.end_row();
      }
    }
    out.save();
  }
  {
    CsvOut out(out_dir / "innovations.csv", {"day", "index", "kind", "location", "observed", "forecast", "innovation"});
    for (const auto& r : art.innovations) {
      out.cell(r.day).cell(r.index).cell(obs_kind_label(r.kind));
      out.cell(r.location < 0 ? std::string("all") : art.location_names[static_cast<std::size_t>(r.location)]);
      out.cell(r.observed).cell(r.forecast).cell(r.innovation);
      out.end_row();
    }
    out.save();
  }
  {
    CsvOut out(out_dir / "relabels.csv", {"day", "member", "relabeled"});
    for (const auto& r : art.relabels) {
      out.cell(r.day).cell(r.member).cell(r.relabeled);
      out.end_row();
    }
    out.save();
  }
  {
    CsvOut out(out_dir / "observations.csv", {"day", "kind", "location", "value", "n_tested"});
    for (const auto& b : art.observations) {
      for (std::size_t i = 0; i < b.size(); ++i) {
        out.cell(b.day).cell(obs_kind_label(b.kinds[i]));
        out.cell(b.locations[i] < 0 ? std::string("all") : art.location_names[static_cast<std::size_t>(b.locations[i])]);
        out.cell(b.values[i]).cell(b.kinds[i] == ObsKind::Positivity ? b.n_tested : 0);
        out.end_row();
      }
    }
    out.save();
  }
  {
    CsvOut out(out_dir / "house_infections.csv", {"day", "source", "house_size", "mean", "std", "n_defined"});
    for (const auto& r : art.house_infections) {
      for (int k = 0; k < kMaxHouseSize; ++k) {
        out.cell(r.day).cell(r.source).cell(k + 1).cell(r.mean[static_cast<std::size_t>(k)]);
        out.cell(r.std[static_cast<std::size_t>(k)]).cell(r.n_defined);
        out.end_row();
      }
    }
    out.save();
  }
  if (!art.matches.empty()) {
    CsvOut out(out_dir / "matches.csv", {"day", "group", "metric", "mean", "std"});
    for (const auto& m : art.matches) {
      const std::pair<std::string_view, std::pair<double, double>> metrics[] = {
          {"agent_id", {m.mean.agent_id, m.std.agent_id}},
          {"house_id", {m.mean.house_id, m.std.house_id}},
          {"household_type", {m.mean.household_type, m.std.household_type}},
          {"loc_household_type", {m.mean.loc_household_type, m.std.loc_household_type}}};
      for (const auto& [name, v] : metrics) {
        out.cell(m.day).cell(m.group).cell(name).cell(v.first).cell(v.second);
        out.end_row();
      }
    }
    out.save();
  }
  write_text_file(out_dir / "run_meta.json", meta_json(art));
}

void write_truth(const TruthRun& run, const ExperimentConfig& config, const std::string& config_echo,
                 const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  CsvOut out(out_dir / "truth_series.csv", {"day", "location", "status", "count", "lambda"});
  for (std::size_t t = 0; t < run.counts.size(); ++t) {
    const CountMatrix& c = run.counts[t];
    for (Eigen::Index loc = 0; loc < c.rows(); ++loc) {
      for (Eigen::Index s = 0; s < c.cols(); ++s) {
        const auto& rate = run.contact_rate[t];
        out.cell(static_cast<int>(t))
            .cell(std::to_string(loc))
            .cell(status_label(status_at(static_cast<int>(s))))
            .cell(c(loc, s))
            .cell(rate.size() == 1 ? rate.front() : rate[static_cast<std::size_t>(loc)]);
        out.end_row();
      }
    }
  }
  out.save();
  if (!run.tests.empty()) {
    CsvOut tests(out_dir / "tests.csv", {"day", "positives", "tested"});
    for (std::size_t t = 1; t < run.tests.size(); ++t) {
      tests.cell(static_cast<int>(t)).cell(run.tests[t].positives).cell(run.tests[t].tested);
      tests.end_row();
    }
    tests.save();
  }
  std::ostringstream js;
  js << "{\n  \"schema\": " << json_escape(kSchemaVersion) << ",\n";
  js << "  \"scenario\": " << json_escape(scenario_label(config.scenario)) << ",\n";
  js << "  \"seeds\": {\"seed\": " << config.seed << ", \"truth\": " << config.truth_seed() << "},\n";
  js << "  \"days\": " << config.days << ",\n";
  js << "  \"config\": " << (config_echo.empty() ? "null" : config_echo) << "\n}\n";
  write_text_file(out_dir / "run_meta.json", js.str());
}

std::vector<ParamRow> read_params(const fs::path& path) {
  const CsvTable table = read_csv(path);
  require_header(table, {"day", "name", "mean", "std", "truth"}, path);
  std::vector<ParamRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const long line = table.line_numbers[i];
    out.push_back({parse_int(r[0], line, "day"), r[1], parse_number(r[2], line), parse_number(r[3], line),
                   parse_number(r[4], line)});
  }
  return out;
}

std::vector<MacroRow> read_macro_series(const fs::path& path) {
  const CsvTable table = read_csv(path);
  require_header(table, {"day", "location", "status", "mean", "std", "truth"}, path);
  std::vector<MacroRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const long line = table.line_numbers[i];
    out.push_back({parse_int(r[0], line, "day"), r[1], r[2], parse_number(r[3], line), parse_number(r[4], line),
                   parse_number(r[5], line)});
  }
  return out;
}

void write_layout(const AgentPopulation& pop, const fs::path& path) {
  CsvOut out(path, {"agent_id", "house_id", "location"});
  for (const auto& a : pop.agents) {
    out.cell(a.id).cell(a.house).cell(a.location);
    out.end_row();
  }
  out.save();
}

AgentPopulation read_layout(const fs::path& path, bool asymptomatic) {
  const CsvTable table = read_csv(path);
  require_header(table, {"agent_id", "house_id", "location"}, path);
  AgentPopulation pop;
  pop.asymptomatic = asymptomatic;
  int max_loc = -1;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const long line = table.line_numbers[i];
    Agent a;
    a.id = parse_int(table.rows[i][0], line, "agent_id");
    a.house = parse_int(table.rows[i][1], line, "house_id");
    a.location = parse_int(table.rows[i][2], line, "location");
    if (a.id != static_cast<int>(i)) throw DataError("agent ids must be 0..N-1 in order", line);
    if (a.house < 0 || a.location < 0) throw DataError("negative house or location", line);
    if (static_cast<std::size_t>(a.house) >= pop.houses.size()) pop.houses.resize(static_cast<std::size_t>(a.house) + 1);
    House& h = pop.houses[static_cast<std::size_t>(a.house)];
    if (!h.members.empty() && h.location != a.location) throw DataError("house spans two locations", line);
    h.id = a.house;
    h.location = a.location;
    h.members.push_back(a.id);
    max_loc = std::max(max_loc, a.location);
    pop.agents.push_back(a);
  }
  for (const auto& h : pop.houses) {
    if (h.members.empty()) throw DataError(path.string() + ": house ids must be contiguous");
  }
  pop.n_locations = max_loc + 1;
  return pop;
}

SnapshotWriter::SnapshotWriter(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out_ << "#schema=" << kSchemaVersion << "\nday,source,statuses\n";
}

void SnapshotWriter::write(int day, std::string_view source, const AgentPopulation& pop) {
  std::string line = std::to_string(day);
  line += ',';
  line += source;
  line += ',';
  for (const auto& a : pop.agents) line.push_back(static_cast<char>('0' + index_of(a.status)));
  line += '\n';
  out_ << line;
  if (!out_) throw std::runtime_error("failed writing " + path_.string());
}

std::vector<Snapshot> read_snapshots(const fs::path& path) {
  const CsvTable table = read_csv(path);
  require_header(table, {"day", "source", "statuses"}, path);
  std::vector<Snapshot> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const long line = table.line_numbers[i];
    Snapshot s{parse_int(table.rows[i][0], line, "day"), table.rows[i][1], table.rows[i][2]};
    for (char c : s.statuses) {
      if (c < '0' || c >= '0' + kExtendedStatusCount) throw DataError("invalid status code", line);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void apply_snapshot(AgentPopulation& pop, const Snapshot& snap) {
  if (snap.statuses.size() != pop.agents.size()) {
    throw DataError("snapshot for day " + std::to_string(snap.day) + " has " + std::to_string(snap.statuses.size()) +
                    " agents, layout has " + std::to_string(pop.agents.size()));
  }
  for (std::size_t k = 0; k < pop.agents.size(); ++k) {
    const int code = snap.statuses[k] - '0';
    if (code >= pop.n_statuses()) throw DataError("status code outside the population's class set");
    pop.agents[k].status = status_at(code);
  }
}

void write_matches_from_snapshots(const AgentPopulation& layout, const std::vector<Snapshot>& snapshots,
                                  const fs::path& path) {
  std::map<int, const Snapshot*> truth_by_day;
  for (const auto& s : snapshots) {
    if (s.source == "truth") truth_by_day[s.day] = &s;
  }
  if (truth_by_day.empty()) throw DataError(path.string() + ": snapshots contain no truth rows");
  CsvOut out(path, {"day", "group", "metric", "mean", "std"});
  AgentPopulation truth = layout;
  AgentPopulation est = layout;
  for (const auto& s : snapshots) {
    if (s.source == "truth") continue;
    const auto it = truth_by_day.find(s.day);
    if (it == truth_by_day.end()) throw DataError("no truth snapshot for day " + std::to_string(s.day));
    apply_snapshot(truth, *it->second);
    apply_snapshot(est, s);
    const MatchReport r = matching_metrics(truth, est);
    const std::pair<std::string_view, double> metrics[] = {{"agent_id", r.agent_id},
                                                           {"house_id", r.house_id},
                                                           {"household_type", r.household_type},
                                                           {"loc_household_type", r.loc_household_type}};
    for (const auto& [name, v] : metrics) {
      out.cell(s.day).cell(s.source).cell(name).cell(v).cell(0.0);
      out.end_row();
    }
  }
  out.save();
}

void write_kl_curve(const std::vector<KlPoint>& curve, const fs::path& path) {
  CsvOut out(path, {"lambda", "kl"});
  for (const auto& p : curve) {
    out.cell(p.lambda).cell(p.kl);
    out.end_row();
  }
  out.save();
}

}  // namespace abmda
