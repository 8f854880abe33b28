#ifndef SYMBAYES_CONFIG_HPP
#define SYMBAYES_CONFIG_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "symbayes/error_models.hpp"
#include "symbayes/samplers.hpp"

namespace symbayes {

enum class Scenario { Table1, BvmSweep, LanSweep, Custom };
std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);

enum class Estimator { F, B1, B2, Series };
std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& s);

enum class ModelKind { Mixed, Regression };

struct ExperimentConfig {
  Scenario scenario = Scenario::Table1;
  std::string preset = "desk";
  ModelKind model = ModelKind::Mixed;
  std::vector<ErrorTag> laws{kAllErrorTags.begin(), kAllErrorTags.end()};
  std::vector<Estimator> estimators{Estimator::F, Estimator::B1, Estimator::B2};

  // Mixed design: n groups of m observations.
  Eigen::Index groups = 20;
  Eigen::Index group_size = 5;
  // Regression design size for `simulate` and `fit`.
  Eigen::Index observations = 200;
  Eigen::VectorXd theta0 = Eigen::Vector2d(-1.0, 1.0);
  double random_effect_variance = 1.0;
  double covariate_probability = 0.5;

  int replications = 100;
  std::uint64_t seed = 20241014;
  int threads = 1;
  std::filesystem::path output_dir = "out";

  // BvM and LAN sweeps.
  std::vector<Eigen::Index> ladder{100, 400, 1600};
  Estimator bvm_estimator = Estimator::B2;
  double min_ess = 100.0;
  double kl_epsilon = 0.1;
  double kl_c2 = 1.0;
  bool save_chains = false;
  double h_radius = 2.0;
  int h_points = 9;

  SamplerConfig sampler;

  Eigen::Index dim() const { return theta0.size(); }
  // Throws ConfigError.
  void validate() const;
};

// Desk: N = 100; paper: N = 300. Sweep scenarios lengthen the chains.
ExperimentConfig preset_config(const std::string& preset, Scenario scenario);

// Applies the keys present in `j` on top of `base`. Unknown keys and
// ill-typed values raise ConfigError.
ExperimentConfig apply_config_json(ExperimentConfig base, const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

nlohmann::json sampler_to_json(const SamplerConfig& s);
SamplerConfig apply_sampler_json(SamplerConfig base, const nlohmann::json& j);

// Minimal TOML reader: tables, dotted table headers, strings, numbers,
// booleans and single-line arrays of scalars. Throws ConfigError.
nlohmann::json parse_toml(const std::string& text);

// Reads a .toml or .json file into JSON. Throws ConfigError.
nlohmann::json load_config_file(const std::filesystem::path& path);

}  // namespace symbayes

#endif  // SYMBAYES_CONFIG_HPP
