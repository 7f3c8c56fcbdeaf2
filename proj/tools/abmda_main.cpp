// SPDX-License-Identifier: Apache-2.0
// abmda: command-line front end for the ABM + EnKF experiments.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "abmda/config.hpp"
#include "abmda/data_io.hpp"
#include "abmda/error.hpp"
#include "abmda/experiments.hpp"
#include "abmda/kl.hpp"

namespace fs = std::filesystem;
using namespace abmda;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

void report_error(std::string_view kind, const std::string& message, int code) {
  nlohmann::json j;
  j["error"] = {{"type", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << '\n';
}

std::string default_out_dir(std::string_view command) {
  if (const char* env = std::getenv("ABMDA_OUT_DIR"); env && *env) return (fs::path(env) / command).string();
  return (fs::path("out") / command).string();
}

struct RunFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<int> threads;
  std::optional<int> days;
  std::optional<int> members;
  bool save_populations = false;
  bool verbose = false;
};

void add_run_flags(CLI::App* app, RunFlags& f, bool with_method) {
  app->add_option("--config,-c", f.config, "Experiment config (JSON)")->required();
  app->add_option("--out,-o", f.out, "Output directory (default: $ABMDA_OUT_DIR/<command> or out/<command>)");
  app->add_option("--seed", f.seed, "Base seed; overrides the config");
  app->add_option("--threads", f.threads, "Worker threads (0: all cores)");
  app->add_option("--days", f.days, "Simulated days; overrides the config");
  if (with_method) {
    app->add_option("--method", f.method, "Adjustment method: randomized, cascade or none");
    app->add_option("--members", f.members, "Ensemble size; overrides the config");
  }
  app->add_flag("--verbose,-v", f.verbose, "Log one line per day");
}

ExperimentConfig resolve_config(const RunFlags& f) {
  ExperimentConfig c = load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.days) c.days = *f.days;
  if (f.members) c.n_members = *f.members;
  if (f.method) {
    const auto m = parse_method(*f.method);
    if (!m) throw ConfigError("--method must be randomized, cascade or none");
    c.method = *m;
  }
  c.validate();
  return c;
}

fs::path prepare_out(const std::string& out, std::string_view command) {
  const fs::path dir = out.empty() ? fs::path(default_out_dir(command)) : fs::path(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

int cmd_simulate(const RunFlags& f) {
  const ExperimentConfig c = resolve_config(f);
  if (c.scenario == Scenario::RealData) throw ConfigError("simulate needs a synthetic scenario");
  const fs::path out = prepare_out(f.out, "simulate");
  const TruthRun run = run_truth(c, f.save_populations);
  write_truth(run, c, config_echo(c), out);
  if (f.save_populations) {
    write_layout(run.populations.front(), out / "layout.csv");
    SnapshotWriter snaps(out / "snapshots.csv");
    for (std::size_t t = 0; t < run.populations.size(); ++t) snaps.write(static_cast<int>(t), "truth", run.populations[t]);
  }
  return 0;
}

int cmd_twin(const RunFlags& f) {
  const ExperimentConfig c = resolve_config(f);
  if (c.scenario == Scenario::RealData) throw ConfigError("twin needs a synthetic scenario; use assimilate for realdata");
  const fs::path out = prepare_out(f.out, "twin");
  TwinOptions options;
  options.verbose = f.verbose;
  std::optional<SnapshotWriter> snaps;
  if (f.save_populations) {
    if (!c.shared_initial) throw ConfigError("--save-populations needs shared_initial = true");
    snaps.emplace(out / "snapshots.csv");
    options.on_day = [&](int day, const AgentPopulation* truth, const Ensemble& ens) {
      if (day == 0 && truth) write_layout(*truth, out / "layout.csv");
      if (truth) snaps->write(day, "truth", *truth);
      for (std::size_t j = 0; j < ens.size(); ++j) snaps->write(day, "member_" + std::to_string(j), ens.members[j].population);
    };
  }
  RunArtifacts art = run_twin(c, options);
  art.config_echo = config_echo(c);
  write_diagnostics(art, out);
  return 0;
}

int cmd_assimilate(const RunFlags& f) {
  ExperimentConfig c = resolve_config(f);
  if (c.scenario != Scenario::RealData) throw ConfigError("assimilate needs the realdata scenario");
  const DailyReportDataset ds = load_dataset(c.data_reports, c.data_census);
  for (const auto& w : ds.warnings) {
    if (f.verbose) std::cerr << "warning: " << w << '\n';
  }
  c.n_locations = ds.n_locations();
  c.n_agents = realdata_agent_count(ds, c.data_scale);
  c.days = ds.day_offsets.back();
  const fs::path out = prepare_out(f.out, "assimilate");
  TwinOptions options;
  options.verbose = f.verbose;
  RunArtifacts art = run_realdata(c, ds, options);
  art.config_echo = config_echo(c);
  write_diagnostics(art, out);
  return 0;
}

int cmd_metrics(const std::string& run_dir, const std::string& out_arg, bool asymptomatic) {
  const fs::path run(run_dir);
  const AgentPopulation layout = read_layout(run / "layout.csv", asymptomatic);
  const auto snapshots = read_snapshots(run / "snapshots.csv");
  const fs::path out = out_arg.empty() ? run : prepare_out(out_arg, "metrics");
  write_matches_from_snapshots(layout, snapshots, out / "matches.csv");
  return 0;
}

int cmd_kl_curve(double p, double lo, double hi, int steps, const std::string& out_arg) {
  const fs::path out = prepare_out(out_arg, "kl-curve");
  const auto curve = kl_curve(p, lo, hi, steps);
  write_kl_curve(curve, out / "kl_curve.csv");
  const KlPoint best = kl_minimizer(p, lo, hi);
  nlohmann::json meta;
  meta["schema"] = std::string(kSchemaVersion);
  meta["command"] = "kl-curve";
  meta["p"] = p;
  meta["lambda_min"] = lo;
  meta["lambda_max"] = hi;
  meta["steps"] = steps;
  meta["minimizer"] = {{"lambda", best.lambda}, {"kl", best.kl}};
  write_text_file(out / "run_meta.json", meta.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ABM + ensemble Kalman filter epidemic experiments"};
  app.require_subcommand(1);

  RunFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "Run the synthetic truth only");
  add_run_flags(simulate, sim_flags, false);
  simulate->add_flag("--save-populations", sim_flags.save_populations, "Write layout.csv and snapshots.csv");

  RunFlags twin_flags;
  auto* twin = app.add_subcommand("twin", "Twin experiment: truth, synthetic observations, EnKF");
  add_run_flags(twin, twin_flags, true);
  twin->add_flag("--save-populations", twin_flags.save_populations,
                 "Write layout.csv and per-day snapshots (shared initial layout only)");

  RunFlags real_flags;
  auto* assimilate = app.add_subcommand("assimilate", "Assimilate a daily-report dataset");
  add_run_flags(assimilate, real_flags, true);

  std::string metrics_run;
  std::string metrics_out;
  bool metrics_asym = false;
  auto* metrics = app.add_subcommand("metrics", "Recompute matching metrics from stored snapshots");
  metrics->add_option("--run", metrics_run, "Directory with layout.csv and snapshots.csv")->required();
  metrics->add_option("--out,-o", metrics_out, "Output directory (default: the run directory)");
  metrics->add_flag("--asymptomatic", metrics_asym, "Snapshots use the extended class set");

  double kl_p = 0.5;
  double kl_lo = 0.1;
  double kl_hi = 3.0;
  int kl_steps = 60;
  std::string kl_out;
  auto* kl = app.add_subcommand("kl-curve", "Tabulate KL(Geometric(p) || Poisson(lambda)) over a lambda grid");
  kl->add_option("--p", kl_p, "Geometric success probability")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  kl->add_option("--lambda-min", kl_lo, "Smallest lambda")->check(CLI::NonNegativeNumber);
  kl->add_option("--lambda-max", kl_hi, "Largest lambda")->check(CLI::PositiveNumber);
  kl->add_option("--steps", kl_steps, "Number of grid points")->check(CLI::Range(2, 10'000'000));
  kl->add_option("--out,-o", kl_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << '\n';
    report_error("usage_error", e.what(), kExitConfig);
    return kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(sim_flags);
    if (*twin) return cmd_twin(twin_flags);
    if (*assimilate) return cmd_assimilate(real_flags);
    if (*metrics) return cmd_metrics(metrics_run, metrics_out, metrics_asym);
    if (*kl) {
      if (!(kl_lo < kl_hi)) throw ConfigError("--lambda-min must be below --lambda-max");
      return cmd_kl_curve(kl_p, kl_lo, kl_hi, kl_steps, kl_out);
    }
  } catch (const ConfigError& e) {
    report_error("config_error", e.what(), kExitConfig);
    return kExitConfig;
  } catch (const DataError& e) {
    report_error("data_error", e.what(), kExitConfig);
    return kExitConfig;
  } catch (const std::exception& e) {
    report_error("runtime_error", e.what(), kExitRuntime);
    return kExitRuntime;
  }
  return kExitRuntime;
}
