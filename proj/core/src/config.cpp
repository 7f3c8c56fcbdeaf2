// SPDX-License-Identifier: Apache-2.0
#include "abmda/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "abmda/error.hpp"

namespace abmda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Four neighbourhoods, the last one central. Published row-wise (row j is
// where contacts from j go, last row summing to 0.99); stored here as the
// column-stochastic transpose with each column renormalized.
const Eigen::MatrixXd& reference_contact_matrix() {
  static const Eigen::MatrixXd c = [] {
    Eigen::MatrixXd by_row(4, 4);
    by_row << 0.43, 0.14, 0.14, 0.29,  //
        0.14, 0.43, 0.14, 0.29,        //
        0.14, 0.14, 0.43, 0.29,        //
        0.14, 0.14, 0.14, 0.57;
    Eigen::MatrixXd m = by_row.transpose();
    for (Eigen::Index j = 0; j < 4; ++j) m.col(j) /= m.col(j).sum();
    return m;
  }();
  return c;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Walks one JSON object, remembering which keys were read so that the rest
// can be reported as unknown.
class Section {
 public:
  Section(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void number(const std::string& key, double& out, double lo, double hi) {
    const json* v = get(key);
    if (!v) return;
    out = as_number(*v, path(key), lo, hi);
  }

  void integer(const std::string& key, int& out, int lo, int hi) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_number_integer()) throw ConfigError(path(key) + " must be an integer");
    const auto x = v->get<long long>();
    if (x < lo || x > hi) {
      throw ConfigError(path(key) + " = " + std::to_string(x) + " is outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
    }
    out = static_cast<int>(x);
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(path(key) + " must be true or false");
    out = v->get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_string()) throw ConfigError(path(key) + " must be a string");
    out = v->get<std::string>();
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + path(it.key()) + "'");
    }
  }

  static double as_number(const json& v, const std::string& where, double lo, double hi) {
    if (!v.is_number()) throw ConfigError(where + " must be a number");
    const double x = v.get<double>();
    if (!(x >= lo && x <= hi)) throw ConfigError(where + " = " + fmt(x) + " is outside [" + fmt(lo) + ", " + fmt(hi) + "]");
    return x;
  }

  static std::vector<double> as_numbers(const json& v, const std::string& where, double lo, double hi) {
    if (!v.is_array()) throw ConfigError(where + " must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]", lo, hi));
    return out;
  }

 private:
  std::string where() const { return prefix_.empty() ? "config" : prefix_; }

  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

void read_gamma(Section& s, const std::string& key, GammaShape& g) {
  const json* v = s.get(key);
  if (!v) return;
  Section sub(*v, s.path(key));
  sub.number("shape", g.shape, 1e-12, kInf);
  sub.number("scale", g.scale, 1e-12, kInf);
  sub.finish();
}

// Model keys shared by "model" and "truth". Returns true when a contact
// matrix was given explicitly.
bool read_model(Section& s, ModelParams& m) {
  if (const json* v = s.get("lambda")) {
    if (v->is_array()) {
      m.contact_rate = Section::as_numbers(*v, s.path("lambda"), 0.0, kInf);
      if (m.contact_rate.empty()) throw ConfigError(s.path("lambda") + " must not be empty");
    } else {
      m.contact_rate = {Section::as_number(*v, s.path("lambda"), 0.0, kInf)};
    }
  }
  s.number("beta_d", m.p_infect_domestic, 0.0, 1.0);
  s.number("beta_c", m.p_infect_casual, 0.0, 1.0);
  s.number("q_D", m.p_death, 0.0, 1.0);
  s.number("q_S", m.p_severe, 0.0, 1.0);
  s.number("q_C", m.p_casual, 0.0, 1.0);
  s.number("q_A", m.p_asymptomatic, 0.0, 1.0);
  read_gamma(s, "gamma_E", m.exposed);
  read_gamma(s, "gamma_I_M", m.mild);
  read_gamma(s, "gamma_I_S", m.severe);
  read_gamma(s, "gamma_H", m.hospitalized);
  if (const json* v = s.get("p_H")) {
    const auto p = Section::as_numbers(*v, s.path("p_H"), 0.0, 1.0);
    if (p.size() != kMaxHouseSize) throw ConfigError(s.path("p_H") + " must have 5 entries");
    std::copy(p.begin(), p.end(), m.house_sizes.begin());
  }
  if (const json* v = s.get("contact_law")) {
    if (*v == "poisson") {
      m.contact_law = ContactLaw::Poisson;
    } else if (*v == "geometric") {
      m.contact_law = ContactLaw::Geometric;
    } else {
      throw ConfigError(s.path("contact_law") + " must be \"poisson\" or \"geometric\"");
    }
  }
  s.number("geometric_p", m.geometric_p, 1e-12, 1.0);
  bool explicit_matrix = false;
  if (const json* v = s.get("contact_matrix")) {
    explicit_matrix = true;
    if (*v == "identity" || *v == "density") {
      m.contact_matrix.resize(0, 0);
    } else {
      if (!v->is_array() || v->empty()) throw ConfigError(s.path("contact_matrix") + " must be a square array of rows");
      const auto n = static_cast<Eigen::Index>(v->size());
      m.contact_matrix.resize(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = Section::as_numbers((*v)[static_cast<std::size_t>(i)],
                                             s.path("contact_matrix") + "[" + std::to_string(i) + "]", 0.0, 1.0);
        if (static_cast<Eigen::Index>(row.size()) != n) throw ConfigError(s.path("contact_matrix") + " must be square");
        for (Eigen::Index j = 0; j < n; ++j) m.contact_matrix(i, j) = row[static_cast<std::size_t>(j)];
      }
    }
  }
  return explicit_matrix;
}

ParamSpec default_spec(const std::string& name) {
  ParamSpec p;
  p.name = name;
  if (name == "lambda" || name.rfind("lambda_", 0) == 0) {
    p.prior_low = 0.2;
    p.prior_high = 1.2;
    p.walk_std = 0.01;
    p.lower = 0.0;
    p.upper = 3.0;
  } else if (name == "q_A") {
    p.prior_low = 0.1;
    p.prior_high = 0.9;
    p.walk_std = 0.005;
    p.lower = 0.0;
    p.upper = 1.0;
  }
  return p;
}

bool has_default_walk(const std::string& name) {
  return name == "lambda" || name.rfind("lambda_", 0) == 0 || name == "q_A";
}

std::vector<ParamSpec> read_params(const json& v) {
  if (!v.is_array()) throw ConfigError("params must be an array");
  std::vector<ParamSpec> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string where = "params[" + std::to_string(i) + "]";
    Section s(v[i], where);
    std::string name;
    s.string("name", name);
    if (name.empty()) throw ConfigError(where + ".name is required");
    ParamSpec p = default_spec(name);
    const json* prior = s.get("prior");
    if (!prior) throw ConfigError(where + ".prior is required");
    const auto pr = Section::as_numbers(*prior, where + ".prior", -kInf, kInf);
    if (pr.size() != 2) throw ConfigError(where + ".prior must be [low, high]");
    p.prior_low = pr[0];
    p.prior_high = pr[1];
    const bool defaults = has_default_walk(name);
    if (!defaults && (!s.has("walk_std") || !s.has("bounds"))) {
      throw ConfigError(where + ": walk_std and bounds are required for '" + name + "'");
    }
    s.number("walk_std", p.walk_std, 0.0, kInf);
    if (const json* b = s.get("bounds")) {
      const auto bd = Section::as_numbers(*b, where + ".bounds", -kInf, kInf);
      if (bd.size() != 2) throw ConfigError(where + ".bounds must be [low, high]");
      p.lower = bd[0];
      p.upper = bd[1];
    }
    s.finish();
    try {
      p.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
    out.push_back(p);
  }
  return out;
}

json model_json(const ModelParams& m, bool density_default) {
  json j;
  if (m.contact_rate.size() == 1) {
    j["lambda"] = m.contact_rate.front();
  } else {
    j["lambda"] = m.contact_rate;
  }
  j["beta_d"] = m.p_infect_domestic;
  j["beta_c"] = m.p_infect_casual;
  j["q_D"] = m.p_death;
  j["q_S"] = m.p_severe;
  j["q_C"] = m.p_casual;
  j["q_A"] = m.p_asymptomatic;
  j["gamma_E"] = {{"shape", m.exposed.shape}, {"scale", m.exposed.scale}};
  j["gamma_I_M"] = {{"shape", m.mild.shape}, {"scale", m.mild.scale}};
  j["gamma_I_S"] = {{"shape", m.severe.shape}, {"scale", m.severe.scale}};
  j["gamma_H"] = {{"shape", m.hospitalized.shape}, {"scale", m.hospitalized.scale}};
  j["p_H"] = std::vector<double>(m.house_sizes.begin(), m.house_sizes.end());
  j["contact_law"] = m.contact_law == ContactLaw::Poisson ? "poisson" : "geometric";
  j["geometric_p"] = m.geometric_p;
  if (m.contact_matrix.size() == 0) {
    j["contact_matrix"] = density_default ? "density" : "identity";
  } else {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.contact_matrix.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(m.contact_matrix.cols()));
      for (Eigen::Index k = 0; k < m.contact_matrix.cols(); ++k) row[static_cast<std::size_t>(k)] = m.contact_matrix(i, k);
      rows.push_back(row);
    }
    j["contact_matrix"] = rows;
  }
  return j;
}

}  // namespace

ExperimentConfig scenario_defaults(Scenario scenario) {
  ExperimentConfig c;
  c.scenario = scenario;
  c.model.contact_matrix = reference_contact_matrix();
  c.seed_exposed = {5, 5, 5, 5};
  switch (scenario) {
    case Scenario::VaryingLambda:
      c.lambda_schedule = LambdaSchedule{};
      c.params = {default_spec("lambda")};
      break;
    case Scenario::Microscale:
      c.n_agents = 5000;
      c.kappa_confirmed_coeff = 1e-4;
      c.kappa_deaths_coeff = 1e-5;
      c.model.contact_rate = {1.0, 0.8, 0.9, 0.7};
      c.shared_initial = true;
      c.control = true;
      break;
    case Scenario::Asymptomatic:
      c.model.contact_rate = {0.8};
      c.testing_fraction = 0.01;
      c.params = {default_spec("q_A")};
      break;
    case Scenario::ModelError:
      c.model.house_sizes = {0.33, 0.27, 0.2, 0.13, 0.07};
      c.params = {default_spec("lambda")};
      break;
    case Scenario::RealData:
      c.n_agents = 0;
      c.n_locations = 15;
      c.n_members = 400;
      c.days = 0;
      c.kappa_confirmed_coeff = 5e-6;
      c.kappa_deaths_coeff = 5e-7;
      c.model.contact_matrix.resize(0, 0);
      c.seed_exposed.clear();
      c.params = {default_spec("lambda")};
      break;
  }
  c.truth = c.model;
  if (scenario == Scenario::Asymptomatic) c.truth.p_asymptomatic = 0.5;
  if (scenario == Scenario::ModelError) {
    c.truth.contact_law = ContactLaw::Geometric;
    c.truth.geometric_p = 0.5;
  }
  return c;
}

ExperimentConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Section top(root, "");
  std::string scenario_text;
  top.string("scenario", scenario_text);
  // An empty file is a valid config: the reference parameterization with the
  // first synthetic scenario. The echo records the choice.
  if (!top.has("scenario")) scenario_text = std::string(scenario_label(Scenario::VaryingLambda));
  const auto scenario = parse_scenario(scenario_text);
  if (!scenario) throw ConfigError("unknown scenario '" + scenario_text + "'");
  ExperimentConfig c = scenario_defaults(*scenario);
  const bool realdata = *scenario == Scenario::RealData;

  if (const json* v = top.get("seed")) {
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      throw ConfigError("seed must be a non-negative integer");
    }
    c.seed = v->get<std::uint64_t>();
  }
  const bool had_locations = top.has("n_locations");
  top.integer("n_agents", c.n_agents, realdata ? 0 : 1, 100'000'000);
  top.integer("n_locations", c.n_locations, 1, 10'000);
  top.integer("n_members", c.n_members, 2, 100'000);
  top.integer("days", c.days, realdata ? 0 : 1, 1'000'000);
  top.number("kappa_c", c.kappa_confirmed_coeff, 1e-300, kInf);
  top.number("kappa_d", c.kappa_deaths_coeff, 1e-300, kInf);
  top.number("obs_floor", c.obs_floor, 1e-300, kInf);
  if (const json* v = top.get("method")) {
    const auto m = v->is_string() ? parse_method(v->get<std::string>()) : std::nullopt;
    if (!m) throw ConfigError("method must be \"randomized\", \"cascade\" or \"none\"");
    c.method = *m;
  }
  top.boolean("control", c.control);
  top.number("inflation", c.inflation, 1.0, kInf);
  top.integer("threads", c.threads, 0, 4096);
  top.boolean("shared_initial", c.shared_initial);
  top.number("testing_fraction", c.testing_fraction, 0.0, 1.0);

  if (const json* v = top.get("seed_exposed")) {
    if (!v->is_array()) throw ConfigError("seed_exposed must be an array of integers");
    c.seed_exposed.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      if (!e.is_number_integer() || e.get<long long>() < 0) {
        throw ConfigError("seed_exposed[" + std::to_string(i) + "] must be a non-negative integer");
      }
      c.seed_exposed.push_back(e.get<int>());
    }
  } else if (!realdata && had_locations && c.n_locations != 4) {
    c.seed_exposed.assign(static_cast<std::size_t>(c.n_locations), 5);
  }
  if (const json* v = top.get("location_weights")) {
    c.location_weights = Section::as_numbers(*v, "location_weights", 1e-300, kInf);
  }

  bool explicit_matrix = false;
  if (const json* v = top.get("model")) {
    Section s(*v, "model");
    explicit_matrix = read_model(s, c.model);
    s.finish();
  }
  // The four-location reference matrix only fits four locations.
  if (!explicit_matrix && !realdata && c.n_locations != 4) c.model.contact_matrix.resize(0, 0);

  // The truth follows the filter model except where the scenario or the
  // "truth" block says otherwise.
  const ExperimentConfig preset = scenario_defaults(*scenario);
  ModelParams truth = c.model;
  if (*scenario == Scenario::Asymptomatic) truth.p_asymptomatic = preset.truth.p_asymptomatic;
  if (*scenario == Scenario::ModelError) {
    truth.contact_law = preset.truth.contact_law;
    truth.geometric_p = preset.truth.geometric_p;
    truth.house_sizes = preset.truth.house_sizes;
  }
  if (const json* v = top.get("truth")) {
    if (realdata) throw ConfigError("truth is not used by the realdata scenario");
    Section s(*v, "truth");
    read_model(s, truth);
    if (const json* sched = s.get("lambda_schedule")) {
      if (sched->is_null()) {
        c.lambda_schedule.reset();
      } else {
        Section ss(*sched, "truth.lambda_schedule");
        LambdaSchedule ls = c.lambda_schedule.value_or(LambdaSchedule{});
        ss.number("start", ls.start, 0.0, kInf);
        ss.number("end", ls.end, 0.0, kInf);
        ss.finish();
        c.lambda_schedule = ls;
      }
    }
    s.finish();
  }
  c.truth = truth;

  if (const json* v = top.get("params")) c.params = read_params(*v);

  if (const json* v = top.get("data")) {
    if (!realdata) throw ConfigError("data is only used by the realdata scenario");
    Section s(*v, "data");
    s.string("reports", c.data_reports);
    s.string("census", c.data_census);
    s.number("scale", c.data_scale, 1e-300, kInf);
    s.finish();
    const auto resolve = [&](std::string& p) {
      if (!p.empty() && fs::path(p).is_relative() && !base_dir.empty()) p = (base_dir / p).lexically_normal().string();
    };
    resolve(c.data_reports);
    resolve(c.data_census);
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

std::string config_echo(const ExperimentConfig& c) {
  const bool realdata = c.scenario == Scenario::RealData;
  json j;
  j["scenario"] = std::string(scenario_label(c.scenario));
  j["seed"] = c.seed;
  j["n_agents"] = c.n_agents;
  j["n_locations"] = c.n_locations;
  j["n_members"] = c.n_members;
  j["days"] = c.days;
  j["kappa_c"] = c.kappa_confirmed_coeff;
  j["kappa_d"] = c.kappa_deaths_coeff;
  j["obs_floor"] = c.obs_floor;
  j["method"] = std::string(method_label(c.method));
  j["control"] = c.control;
  j["inflation"] = c.inflation;
  j["threads"] = c.threads;
  j["shared_initial"] = c.shared_initial;
  j["testing_fraction"] = c.testing_fraction;
  j["seed_exposed"] = c.seed_exposed;
  j["location_weights"] = c.location_weights;
  j["model"] = model_json(c.model, realdata);
  if (!realdata) {
    json t = model_json(c.truth, false);
    if (c.lambda_schedule) {
      t["lambda_schedule"] = {{"start", c.lambda_schedule->start}, {"end", c.lambda_schedule->end}};
    } else {
      t["lambda_schedule"] = nullptr;
    }
    j["truth"] = t;
  }
  json params = json::array();
  for (const auto& p : c.params) {
    params.push_back({{"name", p.name},
                      {"prior", {p.prior_low, p.prior_high}},
                      {"walk_std", p.walk_std},
                      {"bounds", {p.lower, p.upper}}});
  }
  j["params"] = params;
  if (realdata) j["data"] = {{"reports", c.data_reports}, {"census", c.data_census}, {"scale", c.data_scale}};
  return j.dump(2);
}

}  // namespace abmda
