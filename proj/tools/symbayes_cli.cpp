#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "symbayes/baselines.hpp"
#include "symbayes/config.hpp"
#include "symbayes/error.hpp"
#include "symbayes/harness.hpp"
#include "symbayes/serialization.hpp"

using namespace symbayes;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::string preset = "desk";
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config_path, "TOML or JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--replications", f.replications, "number of replications N");
  app->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--preset", f.preset, "desk (N=100) or paper (N=300)")->check(CLI::IsMember({"desk", "paper"}));
}

ExperimentConfig resolve(const CommonFlags& f, Scenario scenario) {
  ExperimentConfig cfg = preset_config(f.preset, scenario);
  if (!f.config_path.empty()) {
    json j = load_config_file(f.config_path);
    if (j.contains("preset") && j["preset"].is_string() && j["preset"] != f.preset) {
      cfg = preset_config(j["preset"].get<std::string>(), scenario);
    }
    cfg = apply_config_json(cfg, j);
    if (scenario != Scenario::Custom) cfg.scenario = scenario;
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.replications) cfg.replications = *f.replications;
  if (f.threads) cfg.threads = *f.threads;
  if (f.out) cfg.output_dir = *f.out;
  cfg.validate();
  return cfg;
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

int run_simulate(const CommonFlags& f, const std::string& law_name, const std::string& model_name) {
  ExperimentConfig cfg = resolve(f, Scenario::Custom);
  if (!model_name.empty()) cfg.model = model_name == "regression" ? ModelKind::Regression : ModelKind::Mixed;
  const ErrorTag tag = law_name.empty() ? cfg.laws.front() : parse_error_tag(law_name);
  const SymmetricDensity law = make_error_law(tag);
  Rng rng = make_rng(cfg.seed);
  std::ostringstream csv;
  json meta = {{"law", to_string(tag)}, {"seed", cfg.seed}, {"config", to_json(cfg)}};
  if (cfg.model == ModelKind::Mixed) {
    const MixedDataset data =
        generate_mixed(cfg.groups, cfg.group_size, cfg.theta0, cfg.random_effect_variance, law, rng);
    write_mixed_csv(csv, data);
    meta["model"] = "mixed";
  } else {
    const RegressionDataset data = generate_regression(cfg.observations, cfg.theta0, law,
                                                       CovariateScheme::bernoulli(cfg.covariate_probability), rng);
    write_regression_csv(csv, data);
    meta["model"] = "regression";
  }
  write_text_file(cfg.output_dir / "simulate" / "data.csv", csv.str());
  write_json_file(cfg.output_dir / "simulate" / "data.json", meta);
  std::cout << (cfg.output_dir / "simulate" / "data.csv").string() << "\n";
  return 0;
}

int run_fit(const CommonFlags& f, const std::string& data_path, const std::string& estimator_name) {
  ExperimentConfig cfg = resolve(f, Scenario::Custom);
  const Estimator est = parse_estimator(estimator_name);
  std::ifstream in(data_path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open data file " + data_path);
  std::string first;
  std::getline(in, first);
  in.seekg(0);
  const bool mixed = first.rfind("group", 0) == 0;
  SamplerConfig sc = cfg.sampler;
  sc.seed = cfg.seed;
  const auto dir = cfg.output_dir / "fit";
  std::optional<PosteriorChain> chain;
  json out;
  if (mixed) {
    const MixedDataset data = read_mixed_csv(in);
    switch (est) {
      case Estimator::F: out = to_json(gaussian_ml_mixed(data)); break;
      case Estimator::B1: chain = fit_b1_mixed(data, sc); break;
      case Estimator::B2: chain = fit_b2_mixed(data, sc); break;
      case Estimator::Series: throw Error(ErrorKind::ConfigError, "series estimator needs regression data");
    }
  } else {
    const RegressionDataset data = read_regression_csv(in);
    switch (est) {
      case Estimator::F: out = {{"estimator", "F"}, {"theta", vector_to_json(ols(data))}}; break;
      case Estimator::B1: chain = fit_gaussian_regression(data, sc); break;
      case Estimator::B2: chain = fit_b2_regression(data, sc); break;
      case Estimator::Series: chain = fit_series_regression(data, sc); break;
    }
  }
  if (chain) {
    out = {{"estimator", to_string(est)},
           {"theta", vector_to_json(chain->posterior_mean())},
           {"posterior_sd", vector_to_json(chain->posterior_sd())},
           {"seed", cfg.seed}};
    std::ostringstream os;
    write_chain_csv(os, *chain);
    write_text_file(dir / "chain.csv", os.str());
    write_json_file(dir / "chain.json", chain_sidecar(*chain, sc));
  }
  out["data"] = data_path;
  write_json_file(dir / "fit.json", out);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::IoError: return 2;
    default: return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiparametric symmetric-error regression and mixed models"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* simulate = app.add_subcommand("simulate", "generate one dataset");
  add_common(simulate, flags);
  std::string law, model;
  simulate->add_option("--law", law, "error law E1..E5");
  simulate->add_option("--model", model, "mixed or regression")->check(CLI::IsMember({"mixed", "regression"}));

  auto* fit = app.add_subcommand("fit", "fit one estimator to one dataset");
  add_common(fit, flags);
  std::string data_path, estimator = "B2";
  fit->add_option("--data", data_path, "dataset CSV")->required();
  fit->add_option("--estimator", estimator, "F, B1, B2 or series");

  auto* table1 = app.add_subcommand("table1", "mixed-model MSE study");
  add_common(table1, flags);
  auto* bvm = app.add_subcommand("bvm-sweep", "posterior normality sweep over n");
  add_common(bvm, flags);
  auto* lan = app.add_subcommand("lan-sweep", "LAN remainder sweep over n");
  add_common(lan, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return run_simulate(flags, law, model);
    if (fit->parsed()) return run_fit(flags, data_path, estimator);
    if (table1->parsed()) {
      const ExperimentConfig cfg = resolve(flags, Scenario::Table1);
      const ResultTable table = run_table1(cfg, log_line);
      emit_outputs(cfg, table);
      write_result_table_csv(std::cout, table);
      return 0;
    }
    if (bvm->parsed()) {
      const ExperimentConfig cfg = resolve(flags, Scenario::BvmSweep);
      auto save = [&](const BvmReport& r, const PosteriorChain& chain) {
        if (!cfg.save_chains) return;
        const auto stem = cfg.output_dir / "bvm-sweep" / "chains" /
                          ("n" + std::to_string(r.n) + "_r" + std::to_string(r.replication));
        std::ostringstream os;
        write_chain_csv(os, chain);
        write_text_file(stem.string() + ".csv", os.str());
        write_json_file(stem.string() + ".json", chain_sidecar(chain, cfg.sampler));
      };
      const BvmSweep sweep = run_bvm_sweep(cfg, log_line, save);
      emit_outputs(cfg, sweep);
      return 0;
    }
    if (lan->parsed()) {
      const ExperimentConfig cfg = resolve(flags, Scenario::LanSweep);
      const LanSweep sweep = run_lan_sweep(cfg, log_line);
      emit_outputs(cfg, sweep);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
