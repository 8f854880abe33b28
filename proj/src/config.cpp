#include "symbayes/config.hpp"

#include <cmath>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

#include "symbayes/error.hpp"

namespace symbayes {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be a table");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error("bad value for '" + where + key + "': " + e.what());
  }
}

double get_double(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number()) config_error("'" + where + key + "' must be a number");
  return v.get<double>();
}

long long get_int(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<long long>();
  if (v.is_number_float() && v.get<double>() == std::floor(v.get<double>())) return static_cast<long long>(v.get<double>());
  config_error("'" + where + key + "' must be an integer");
}

void apply_ig(InverseGammaPrior& prior, const json& j, const std::string& where) {
  check_keys(j, {"shape", "rate"}, where);
  if (j.contains("shape")) prior.shape = get_double(j, "shape", where + ".");
  if (j.contains("rate")) prior.rate = get_double(j, "rate", where + ".");
}

// --- TOML subset --------------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

json parse_toml_value(const std::string& raw, int line_no);

std::vector<std::string> split_array(const std::string& body, int line_no) {
  std::vector<std::string> items;
  std::string current;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (in_string) config_error("unterminated string on line " + std::to_string(line_no));
  if (!trim(current).empty()) items.push_back(trim(current));
  return items;
}

json parse_toml_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  const std::string where = " on line " + std::to_string(line_no);
  if (v.empty()) config_error("missing value" + where);
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') config_error("unterminated string" + where);
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char n = v[++i];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v.front() == '[') {
    if (v.back() != ']') config_error("arrays must close on the same line" + where);
    json arr = json::array();
    for (const auto& item : split_array(v.substr(1, v.size() - 2), line_no)) arr.push_back(parse_toml_value(item, line_no));
    return arr;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  std::string num;
  for (char c : v)
    if (c != '_') num += c;
  const bool is_int = num.find_first_of(".eE") == std::string::npos;
  try {
    std::size_t used = 0;
    if (is_int) {
      const long long i = std::stoll(num, &used);
      if (used == num.size()) return i;
    } else {
      const double d = std::stod(num, &used);
      if (used == num.size()) return d;
    }
  } catch (const std::exception&) {
  }
  config_error("cannot parse value '" + v + "'" + where);
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Table1: return "table1";
    case Scenario::BvmSweep: return "bvm-sweep";
    case Scenario::LanSweep: return "lan-sweep";
    case Scenario::Custom: return "custom";
  }
  return "custom";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "table1") return Scenario::Table1;
  if (s == "bvm-sweep") return Scenario::BvmSweep;
  if (s == "lan-sweep") return Scenario::LanSweep;
  if (s == "custom") return Scenario::Custom;
  config_error("unknown scenario '" + s + "'");
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::F: return "F";
    case Estimator::B1: return "B1";
    case Estimator::B2: return "B2";
    case Estimator::Series: return "series";
  }
  return "F";
}

Estimator parse_estimator(const std::string& s) {
  if (s == "F") return Estimator::F;
  if (s == "B1") return Estimator::B1;
  if (s == "B2") return Estimator::B2;
  if (s == "series") return Estimator::Series;
  config_error("unknown estimator '" + s + "'");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { config_error(m); };
  if (replications < 1) fail("replications must be at least 1");
  if (estimators.empty()) fail("estimator set is empty");
  if (laws.empty()) fail("error law set is empty");
  if (theta0.size() < 1) fail("theta0 must be nonempty");
  if (groups < 1 || group_size < 1 || observations < 1) fail("design sizes must be positive");
  if (random_effect_variance < 0.0) fail("random_effect_variance must be nonnegative");
  if (!(covariate_probability > 0.0 && covariate_probability < 1.0)) fail("covariate_probability must be in (0, 1)");
  if (threads < 0) fail("threads must be nonnegative");
  if (ladder.empty()) fail("ladder is empty");
  for (auto n : ladder)
    if (n <= theta0.size()) fail("every ladder size must exceed the dimension of theta0");
  if (h_points < 2 || h_radius < 0.0) fail("h grid needs at least two points per axis and radius >= 0");
  if (kl_epsilon < 0.0 || kl_c2 <= 0.0) fail("kl_epsilon must be >= 0 and kl_c2 > 0");
  if (scenario == Scenario::Table1) {
    for (auto e : estimators)
      if (e == Estimator::Series) fail("the series estimator is available for regression only");
  }
  if (bvm_estimator == Estimator::F) fail("bvm estimator must be Bayesian");
  try {
    sampler.validate();
    sampler.dpm.validate(true);
  } catch (const Error& e) {
    fail(std::string("sampler: ") + e.what());
  }
}

ExperimentConfig preset_config(const std::string& preset, Scenario scenario) {
  ExperimentConfig cfg;
  cfg.scenario = scenario;
  cfg.preset = preset;
  if (preset == "desk") {
    cfg.replications = 100;
  } else if (preset == "paper") {
    cfg.replications = 300;
  } else {
    config_error("unknown preset '" + preset + "' (expected desk or paper)");
  }
  if (scenario == Scenario::BvmSweep || scenario == Scenario::LanSweep) {
    cfg.model = ModelKind::Regression;
    cfg.laws = {ErrorTag::E4};
    cfg.estimators = {Estimator::B2};
    cfg.replications = scenario == Scenario::BvmSweep ? 20 : 50;
    if (preset == "paper") cfg.replications *= 2;
    cfg.sampler.iterations = 10000;
    cfg.sampler.burn_in = 2000;
  }
  return cfg;
}

json sampler_to_json(const SamplerConfig& s) {
  json j;
  j["iterations"] = s.iterations;
  j["burn_in"] = s.burn_in;
  j["thin"] = s.thin;
  j["theta_prior_mean"] = s.theta_prior_mean;
  j["theta_prior_variance"] = s.theta_prior_variance;
  j["error_variance_prior"] = {{"shape", s.error_variance_prior.shape}, {"rate", s.error_variance_prior.rate}};
  j["random_effect_variance_prior"] = {{"shape", s.random_effect_variance_prior.shape},
                                       {"rate", s.random_effect_variance_prior.rate}};
  if (s.fixed_error_variance) j["fixed_error_variance"] = *s.fixed_error_variance;
  j["dpm"] = {{"precision", s.dpm.precision},
              {"location_bound", s.dpm.location_bound},
              {"scale_lo", s.dpm.scale_lo},
              {"scale_hi", s.dpm.scale_hi},
              {"truncation", s.dpm.truncation}};
  j["series"] = {{"decay", s.series.decay},
                 {"coefficient_bound", s.series.coefficient_bound},
                 {"truncation", s.series.truncation},
                 {"normalizer_nodes", s.series.normalizer_nodes}};
  j["atom_location_step"] = s.atom_location_step;
  j["atom_scale_step"] = s.atom_scale_step;
  j["theta_step"] = s.theta_step;
  j["coefficient_step"] = s.coefficient_step;
  j["coefficient_block"] = s.coefficient_block;
  j["adapt"] = s.adapt;
  j["fix_series_coefficients"] = s.fix_series_coefficients;
  j["series_initial_span"] = s.series_initial_span;
  j["dpm_snapshot_every"] = s.dpm_snapshot_every;
  j["initial_clusters"] = s.initial_clusters;
  j["seed"] = s.seed;
  return j;
}

SamplerConfig apply_sampler_json(SamplerConfig s, const json& j) {
  const std::string w = "sampler.";
  check_keys(j,
             {"iterations", "burn_in", "thin", "theta_prior_mean", "theta_prior_variance", "error_variance_prior",
              "random_effect_variance_prior", "fixed_error_variance", "dpm", "series", "atom_location_step",
              "atom_scale_step", "theta_step", "coefficient_step", "coefficient_block", "adapt",
              "fix_series_coefficients", "series_initial_span", "dpm_snapshot_every", "initial_clusters", "seed"},
             "sampler");
  if (j.contains("iterations")) s.iterations = static_cast<int>(get_int(j, "iterations", w));
  if (j.contains("burn_in")) s.burn_in = static_cast<int>(get_int(j, "burn_in", w));
  if (j.contains("thin")) s.thin = static_cast<int>(get_int(j, "thin", w));
  if (j.contains("theta_prior_mean")) s.theta_prior_mean = get_double(j, "theta_prior_mean", w);
  if (j.contains("theta_prior_variance")) s.theta_prior_variance = get_double(j, "theta_prior_variance", w);
  if (j.contains("error_variance_prior")) apply_ig(s.error_variance_prior, j["error_variance_prior"], w + "error_variance_prior");
  if (j.contains("random_effect_variance_prior"))
    apply_ig(s.random_effect_variance_prior, j["random_effect_variance_prior"], w + "random_effect_variance_prior");
  if (j.contains("fixed_error_variance")) s.fixed_error_variance = get_double(j, "fixed_error_variance", w);
  if (j.contains("dpm")) {
    const json& d = j["dpm"];
    check_keys(d, {"precision", "location_bound", "scale_lo", "scale_hi", "truncation"}, "sampler.dpm");
    if (d.contains("precision")) s.dpm.precision = get_double(d, "precision", w + "dpm.");
    if (d.contains("location_bound")) s.dpm.location_bound = get_double(d, "location_bound", w + "dpm.");
    if (d.contains("scale_lo")) s.dpm.scale_lo = get_double(d, "scale_lo", w + "dpm.");
    if (d.contains("scale_hi")) s.dpm.scale_hi = get_double(d, "scale_hi", w + "dpm.");
    if (d.contains("truncation")) s.dpm.truncation = static_cast<int>(get_int(d, "truncation", w + "dpm."));
  }
  if (j.contains("series")) {
    const json& d = j["series"];
    check_keys(d, {"decay", "coefficient_bound", "truncation", "normalizer_nodes"}, "sampler.series");
    if (d.contains("decay")) s.series.decay = get_double(d, "decay", w + "series.");
    if (d.contains("coefficient_bound")) s.series.coefficient_bound = get_double(d, "coefficient_bound", w + "series.");
    if (d.contains("truncation")) s.series.truncation = static_cast<int>(get_int(d, "truncation", w + "series."));
    if (d.contains("normalizer_nodes"))
      s.series.normalizer_nodes = static_cast<int>(get_int(d, "normalizer_nodes", w + "series."));
  }
  if (j.contains("atom_location_step")) s.atom_location_step = get_double(j, "atom_location_step", w);
  if (j.contains("atom_scale_step")) s.atom_scale_step = get_double(j, "atom_scale_step", w);
  if (j.contains("theta_step")) s.theta_step = get_double(j, "theta_step", w);
  if (j.contains("coefficient_step")) s.coefficient_step = get_double(j, "coefficient_step", w);
  if (j.contains("coefficient_block")) s.coefficient_block = static_cast<int>(get_int(j, "coefficient_block", w));
  if (j.contains("adapt")) s.adapt = get<bool>(j, "adapt", w);
  if (j.contains("fix_series_coefficients")) s.fix_series_coefficients = get<bool>(j, "fix_series_coefficients", w);
  if (j.contains("series_initial_span")) s.series_initial_span = get_double(j, "series_initial_span", w);
  if (j.contains("dpm_snapshot_every")) s.dpm_snapshot_every = static_cast<int>(get_int(j, "dpm_snapshot_every", w));
  if (j.contains("initial_clusters")) s.initial_clusters = static_cast<int>(get_int(j, "initial_clusters", w));
  if (j.contains("seed")) s.seed = static_cast<std::uint64_t>(get_int(j, "seed", w));
  return s;
}

ExperimentConfig apply_config_json(ExperimentConfig cfg, const json& j) {
  check_keys(j,
             {"scenario", "preset", "model", "laws", "estimators", "design", "replications", "seed", "threads",
              "output_dir", "ladder", "bvm", "lan", "sampler"},
             "config");
  const std::string w;
  if (j.contains("scenario")) cfg.scenario = parse_scenario(get<std::string>(j, "scenario", w));
  if (j.contains("preset")) cfg.preset = get<std::string>(j, "preset", w);
  if (j.contains("model")) {
    const auto m = get<std::string>(j, "model", w);
    if (m == "mixed") cfg.model = ModelKind::Mixed;
    else if (m == "regression") cfg.model = ModelKind::Regression;
    else config_error("model must be 'mixed' or 'regression'");
  }
  if (j.contains("laws")) {
    cfg.laws.clear();
    for (const auto& s : get<std::vector<std::string>>(j, "laws", w)) cfg.laws.push_back(parse_error_tag(s));
  }
  if (j.contains("estimators")) {
    cfg.estimators.clear();
    for (const auto& s : get<std::vector<std::string>>(j, "estimators", w)) cfg.estimators.push_back(parse_estimator(s));
  }
  if (j.contains("design")) {
    const json& d = j["design"];
    check_keys(d, {"groups", "group_size", "observations", "theta0", "random_effect_variance", "covariate_probability"},
               "design");
    if (d.contains("groups")) cfg.groups = get_int(d, "groups", "design.");
    if (d.contains("group_size")) cfg.group_size = get_int(d, "group_size", "design.");
    if (d.contains("observations")) cfg.observations = get_int(d, "observations", "design.");
    if (d.contains("theta0")) {
      const auto v = get<std::vector<double>>(d, "theta0", "design.");
      cfg.theta0 = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (d.contains("random_effect_variance"))
      cfg.random_effect_variance = get_double(d, "random_effect_variance", "design.");
    if (d.contains("covariate_probability"))
      cfg.covariate_probability = get_double(d, "covariate_probability", "design.");
  }
  if (j.contains("replications")) cfg.replications = static_cast<int>(get_int(j, "replications", w));
  if (j.contains("seed")) cfg.seed = static_cast<std::uint64_t>(get_int(j, "seed", w));
  if (j.contains("threads")) cfg.threads = static_cast<int>(get_int(j, "threads", w));
  if (j.contains("output_dir")) cfg.output_dir = get<std::string>(j, "output_dir", w);
  if (j.contains("ladder")) {
    cfg.ladder.clear();
    for (auto n : get<std::vector<long long>>(j, "ladder", w)) cfg.ladder.push_back(n);
  }
  if (j.contains("bvm")) {
    const json& b = j["bvm"];
    check_keys(b, {"estimator", "min_ess", "kl_epsilon", "kl_c2", "save_chains"}, "bvm");
    if (b.contains("estimator")) cfg.bvm_estimator = parse_estimator(get<std::string>(b, "estimator", "bvm."));
    if (b.contains("min_ess")) cfg.min_ess = get_double(b, "min_ess", "bvm.");
    if (b.contains("kl_epsilon")) cfg.kl_epsilon = get_double(b, "kl_epsilon", "bvm.");
    if (b.contains("kl_c2")) cfg.kl_c2 = get_double(b, "kl_c2", "bvm.");
    if (b.contains("save_chains")) cfg.save_chains = get<bool>(b, "save_chains", "bvm.");
  }
  if (j.contains("lan")) {
    const json& l = j["lan"];
    check_keys(l, {"radius", "points_per_axis"}, "lan");
    if (l.contains("radius")) cfg.h_radius = get_double(l, "radius", "lan.");
    if (l.contains("points_per_axis")) cfg.h_points = static_cast<int>(get_int(l, "points_per_axis", "lan."));
  }
  if (j.contains("sampler")) cfg.sampler = apply_sampler_json(cfg.sampler, j["sampler"]);
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["scenario"] = to_string(cfg.scenario);
  j["preset"] = cfg.preset;
  j["model"] = cfg.model == ModelKind::Mixed ? "mixed" : "regression";
  j["laws"] = json::array();
  for (auto t : cfg.laws) j["laws"].push_back(to_string(t));
  j["estimators"] = json::array();
  for (auto e : cfg.estimators) j["estimators"].push_back(to_string(e));
  j["design"] = {{"groups", cfg.groups},
                 {"group_size", cfg.group_size},
                 {"observations", cfg.observations},
                 {"theta0", std::vector<double>(cfg.theta0.data(), cfg.theta0.data() + cfg.theta0.size())},
                 {"random_effect_variance", cfg.random_effect_variance},
                 {"covariate_probability", cfg.covariate_probability}};
  j["replications"] = cfg.replications;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["output_dir"] = cfg.output_dir.string();
  j["ladder"] = std::vector<long long>(cfg.ladder.begin(), cfg.ladder.end());
  j["bvm"] = {{"estimator", to_string(cfg.bvm_estimator)},
              {"min_ess", cfg.min_ess},
              {"kl_epsilon", cfg.kl_epsilon},
              {"kl_c2", cfg.kl_c2},
              {"save_chains", cfg.save_chains}};
  j["lan"] = {{"radius", cfg.h_radius}, {"points_per_axis", cfg.h_points}};
  j["sampler"] = sampler_to_json(cfg.sampler);
  return j;
}

json parse_toml(const std::string& text) {
  json root = json::object();
  json* table = &root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string content = trim(strip_comment(line));
    if (content.empty()) continue;
    if (content.front() == '[') {
      if (content.size() < 3 || content.back() != ']' || content[1] == '[') {
        config_error("unsupported table header on line " + std::to_string(line_no));
      }
      table = &root;
      std::stringstream path(content.substr(1, content.size() - 2));
      std::string part;
      while (std::getline(path, part, '.')) {
        part = trim(part);
        if (part.empty()) config_error("empty table name on line " + std::to_string(line_no));
        json& next = (*table)[part];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) config_error("table '" + part + "' redefines a value on line " + std::to_string(line_no));
        table = &next;
      }
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) config_error("expected key = value on line " + std::to_string(line_no));
    std::string key = trim(content.substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) config_error("empty key on line " + std::to_string(line_no));
    if (table->contains(key)) config_error("duplicate key '" + key + "' on line " + std::to_string(line_no));
    (*table)[key] = parse_toml_value(content.substr(eq + 1), line_no);
  }
  return root;
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string ext = path.extension().string();
  if (ext == ".toml") return parse_toml(buffer.str());
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    config_error(path.string() + ": " + e.what());
  }
}

}  // namespace symbayes
