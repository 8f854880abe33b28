#include "symbayes/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "symbayes/baselines.hpp"
#include "symbayes/csv.hpp"
#include "symbayes/error.hpp"
#include "symbayes/serialization.hpp"
#include "symbayes/stats.hpp"

namespace symbayes {
namespace {

// Stream tags for seed derivation.
constexpr std::uint64_t kTable1Data = 0x7461626c;
constexpr std::uint64_t kTable1Chain = 0x63686e31;
constexpr std::uint64_t kSweepData = 0x73776470;
constexpr std::uint64_t kSweepChain = 0x73776368;
constexpr std::uint64_t kLanData = 0x6c616e64;

std::uint64_t law_tag(std::uint64_t base, ErrorTag law) { return base + 131 * static_cast<std::uint64_t>(law); }

SamplerConfig seeded(SamplerConfig s, std::uint64_t seed) {
  s.seed = seed;
  return s;
}

std::string csv_text(const CsvTable& table) {
  std::ostringstream os;
  table.write(os);
  return os.str();
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// A pooled predictive density from at most `keep` evenly spaced snapshots.
SymmetricDensity pooled_predictive(const PosteriorChain& chain, std::size_t keep = 20) {
  PosteriorChain thinned;
  const std::size_t total = chain.dpm_snapshots.size();
  const std::size_t step = std::max<std::size_t>(1, total / keep);
  for (std::size_t k = total % step; k < total; k += step) thinned.dpm_snapshots.push_back(chain.dpm_snapshots[k]);
  std::vector<NormalComponent> atoms;
  double mass = 0.0;
  const double share = 1.0 / static_cast<double>(thinned.dpm_snapshots.size());
  for (const auto& draw : thinned.dpm_snapshots)
    for (const auto& a : draw.atoms)
      if (a.weight > 1e-6) {
        atoms.push_back({a.weight * share, a.location, a.scale});
        mass += a.weight * share;
      }
  for (auto& a : atoms) a.weight /= mass;
  return mirrored_normal_mixture(atoms);
}

ReplicationFailure failure(const std::string& law, int rep, const std::string& est, const Error& e) {
  return {law, rep, est, std::string(to_string(e.kind())), e.what()};
}

}  // namespace

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& t : pool) t.join();
}

const ResultRow& ResultTable::at(ErrorTag law, Estimator estimator) const {
  for (const auto& r : rows)
    if (r.law == law && r.estimator == estimator) return r;
  throw Error(ErrorKind::InvalidArgument, "no result for " + to_string(law) + "/" + to_string(estimator));
}

void write_result_table_csv(std::ostream& out, const ResultTable& table) {
  CsvTable csv({"law", "estimator", "mse", "relative_efficiency", "mse_se", "replications"});
  for (const auto& r : table.rows) {
    csv.add_text_row({to_string(r.law), to_string(r.estimator), format_double(r.mse),
                      format_double(r.relative_efficiency), format_double(r.mse_se), std::to_string(r.replications)});
  }
  csv.write(out);
}

ResultTable read_result_table_csv(std::istream& in) {
  const CsvTable csv = CsvTable::read(in);
  ResultTable table;
  for (std::size_t r = 0; r < csv.rows(); ++r) {
    table.rows.push_back({parse_error_tag(csv.text(r, 0)), parse_estimator(csv.text(r, 1)), parse_double(csv.text(r, 2)),
                          parse_double(csv.text(r, 3)), parse_double(csv.text(r, 4)),
                          static_cast<int>(parse_double(csv.text(r, 5)))});
  }
  return table;
}

ResultTable run_table1(const ExperimentConfig& cfg, const ProgressLog& log) {
  cfg.validate();
  const std::size_t n_rep = static_cast<std::size_t>(cfg.replications);
  const std::size_t n_est = cfg.estimators.size();
  ResultTable table;

  for (ErrorTag law : cfg.laws) {
    const SymmetricDensity density = make_error_law(law);
    std::vector<std::vector<Eigen::VectorXd>> estimates(n_rep, std::vector<Eigen::VectorXd>(n_est));
    std::vector<std::vector<ReplicationFailure>> failures(n_rep);
    parallel_for(n_rep, cfg.threads, [&](std::size_t rep) {
      Rng rng = make_rng(cfg.seed, law_tag(kTable1Data, law), rep);
      std::optional<MixedDataset> data;
      try {
        data = generate_mixed(cfg.groups, cfg.group_size, cfg.theta0, cfg.random_effect_variance, density, rng);
      } catch (const Error& e) {
        failures[rep].push_back(failure(to_string(law), static_cast<int>(rep), "data", e));
        return;
      }
      for (std::size_t k = 0; k < n_est; ++k) {
        const Estimator est = cfg.estimators[k];
        const auto seed = derive_seed(cfg.seed, law_tag(kTable1Chain, law) + 17 * static_cast<std::uint64_t>(est), rep);
        try {
          switch (est) {
            case Estimator::F: estimates[rep][k] = gaussian_ml_mixed(*data).theta; break;
            case Estimator::B1: estimates[rep][k] = fit_b1_mixed(*data, seeded(cfg.sampler, seed)).posterior_mean(); break;
            case Estimator::B2: estimates[rep][k] = fit_b2_mixed(*data, seeded(cfg.sampler, seed)).posterior_mean(); break;
            case Estimator::Series: throw Error(ErrorKind::InvalidArgument, "series estimator needs regression data");
          }
        } catch (const Error& e) {
          failures[rep].push_back(failure(to_string(law), static_cast<int>(rep), to_string(est), e));
        }
      }
    });

    std::size_t failed = 0;
    for (std::size_t rep = 0; rep < n_rep; ++rep) {
      if (!failures[rep].empty()) ++failed;
      table.failures.insert(table.failures.end(), failures[rep].begin(), failures[rep].end());
    }
    if (failed > 0 && static_cast<double>(failed) >= 0.02 * static_cast<double>(n_rep)) {
      std::ostringstream os;
      os << to_string(law) << ": " << failed << " of " << n_rep << " replications failed; first: "
         << table.failures.back().estimator << " replication " << table.failures.back().replication << ": "
         << table.failures.back().message;
      throw Error(ErrorKind::NumericalFailure, os.str());
    }

    std::vector<ResultRow> rows;
    for (std::size_t k = 0; k < n_est; ++k) {
      std::vector<double> sq;
      for (std::size_t rep = 0; rep < n_rep; ++rep) {
        if (!failures[rep].empty()) continue;
        const double e = (estimates[rep][k] - cfg.theta0).squaredNorm();
        sq.push_back(e);
        table.estimates.push_back({law, static_cast<int>(rep), cfg.estimators[k], estimates[rep][k], e});
      }
      const double mse = mean(sq);
      const double se = sq.size() > 1 ? std::sqrt(variance(sq) / static_cast<double>(sq.size())) : nan();
      rows.push_back({law, cfg.estimators[k], mse, nan(), se, static_cast<int>(sq.size())});
    }
    const auto b2 = std::find_if(rows.begin(), rows.end(), [](const ResultRow& r) { return r.estimator == Estimator::B2; });
    if (b2 != rows.end()) {
      const double ref = b2->mse;
      for (auto& r : rows) r.relative_efficiency = r.estimator == Estimator::B2 ? 1.0 : r.mse / ref;
    }
    if (log) {
      std::ostringstream os;
      os << to_string(law) << ":";
      for (const auto& r : rows) os << " " << to_string(r.estimator) << "=" << r.mse << " (" << r.relative_efficiency << ")";
      log(os.str());
    }
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  }
  return table;
}

BvmSweep run_bvm_sweep(const ExperimentConfig& cfg, const ProgressLog& log,
                       const std::function<void(const BvmReport&, const PosteriorChain&)>& on_chain) {
  cfg.validate();
  const ErrorTag law = cfg.laws.front();
  const SymmetricDensity density = make_error_law(law);
  require(has_smooth_score(law), ErrorKind::ConfigError, "BvM sweep needs an error law with a smooth score");
  const std::size_t n_rep = static_cast<std::size_t>(cfg.replications);
  const Eigen::Index p = cfg.dim();
  const std::vector<Eigen::VectorXd> grid = h_grid(p, cfg.h_radius, cfg.h_points);
  const std::vector<Eigen::VectorXd> projections{Eigen::VectorXd::Constant(p, 1.0 / std::sqrt(static_cast<double>(p)))};
  std::mutex chain_mutex;

  BvmSweep sweep;
  for (std::size_t l = 0; l < cfg.ladder.size(); ++l) {
    const Eigen::Index n = cfg.ladder[l];
    std::vector<std::optional<BvmReport>> reports(n_rep);
    std::vector<std::optional<ReplicationFailure>> failures(n_rep);
    parallel_for(n_rep, cfg.threads, [&](std::size_t rep) {
      try {
        Rng rng = make_rng(cfg.seed, kSweepData + static_cast<std::uint64_t>(n), rep);
        const RegressionDataset data = generate_regression(
            n, cfg.theta0, density, CovariateScheme::bernoulli(cfg.covariate_probability), rng);
        const FisherInfo info = fisher_regression(density, density, data.gram());
        BvmReport r;
        r.n = n;
        r.replication = rep;
        r.seed = derive_seed(cfg.seed, kSweepChain + static_cast<std::uint64_t>(n), rep);
        r.delta = delta_n(data, cfg.theta0, density, info);
        r.information = info.information;
        const SamplerConfig sc = seeded(cfg.sampler, r.seed);
        PosteriorChain chain;
        std::optional<SymmetricDensity> fitted;
        switch (cfg.bvm_estimator) {
          case Estimator::B2:
            chain = fit_b2_regression(data, sc);
            fitted = pooled_predictive(chain);
            break;
          case Estimator::B1: {
            chain = fit_gaussian_regression(data, sc);
            const auto& s2 = chain.hyper.at("sigma_eps2");
            fitted = centered_normal(std::sqrt(mean(s2)));
            break;
          }
          case Estimator::Series: chain = fit_series_regression(data, sc); break;
          case Estimator::F: throw Error(ErrorKind::ConfigError, "bvm estimator must be Bayesian");
        }
        r.posterior_mean = chain.posterior_mean();
        const BvmDistance d = bvm_distance(chain, n, cfg.theta0, r.delta, info.information, projections, cfg.min_ess);
        r.ks = d.coordinate_ks;
        r.projection_ks = d.projection_ks;
        r.ess = d.ess;
        r.h = grid;
        r.remainder = lan_remainder(data, density, cfg.theta0, grid, info);
        if (fitted) {
          r.kl = kl_ball_membership(data.covariates(), r.posterior_mean, *fitted, cfg.theta0, density, cfg.kl_epsilon,
                                    cfg.kl_c2);
          r.mean_hellinger = mean_hellinger(data.covariates(), r.posterior_mean, *fitted, cfg.theta0, density);
        } else {
          r.kl = {nan(), nan(), false};
          r.mean_hellinger = nan();
        }
        if (on_chain) {
          std::lock_guard<std::mutex> lock(chain_mutex);
          on_chain(r, chain);
        }
        reports[rep] = std::move(r);
      } catch (const Error& e) {
        failures[rep] = failure(to_string(law), static_cast<int>(rep), to_string(cfg.bvm_estimator), e);
      }
    });

    std::vector<std::vector<double>> ks(p);
    std::vector<double> rem;
    for (std::size_t rep = 0; rep < n_rep; ++rep) {
      if (failures[rep]) {
        sweep.failures.push_back(*failures[rep]);
        continue;
      }
      const BvmReport& r = *reports[rep];
      for (Eigen::Index k = 0; k < p; ++k) ks[k].push_back(r.ks[k]);
      double mx = 0.0;
      for (double v : r.remainder) mx = std::max(mx, std::abs(v));
      rem.push_back(mx);
      sweep.reports.push_back(r);
    }
    std::vector<double> med(p, nan());
    for (Eigen::Index k = 0; k < p; ++k)
      if (!ks[k].empty()) med[k] = median(ks[k]);
    sweep.median_ks.push_back(med);
    sweep.median_max_remainder.push_back(rem.empty() ? nan() : median(rem));
    if (log) {
      std::ostringstream os;
      os << "n=" << n << " ok=" << rem.size() << "/" << n_rep << " median KS";
      for (double v : med) os << " " << v;
      os << " median max|R| " << sweep.median_max_remainder.back();
      log(os.str());
    }
  }
  return sweep;
}

LanSweep run_lan_sweep(const ExperimentConfig& cfg, const ProgressLog& log) {
  cfg.validate();
  const ErrorTag law = cfg.laws.front();
  require(has_smooth_score(law), ErrorKind::ConfigError, "LAN sweep needs an error law with a smooth score");
  const SymmetricDensity density = make_error_law(law);
  const std::size_t n_rep = static_cast<std::size_t>(cfg.replications);
  LanSweep sweep;
  sweep.ladder = cfg.ladder;
  sweep.h = h_grid(cfg.dim(), cfg.h_radius, cfg.h_points);
  const double v = efficient_information(density, density);
  for (Eigen::Index n : cfg.ladder) {
    std::vector<std::vector<double>> rem(n_rep);
    std::vector<double> mx(n_rep, 0.0);
    parallel_for(n_rep, cfg.threads, [&](std::size_t rep) {
      Rng rng = make_rng(cfg.seed, kLanData + static_cast<std::uint64_t>(n), rep);
      const RegressionDataset data =
          generate_regression(n, cfg.theta0, density, CovariateScheme::bernoulli(cfg.covariate_probability), rng);
      FisherInfo info;
      info.v_eta = v;
      info.information = v * data.gram();
      rem[rep] = lan_remainder(data, density, cfg.theta0, sweep.h, info);
      for (double r : rem[rep]) mx[rep] = std::max(mx[rep], std::abs(r));
    });
    sweep.remainder.push_back(std::move(rem));
    sweep.max_abs.push_back(mx);
    sweep.median_max_abs.push_back(median(mx));
    if (log) log("n=" + std::to_string(n) + " median max|R| " + format_double(sweep.median_max_abs.back()));
  }
  return sweep;
}

void emit_outputs(const ExperimentConfig& cfg, const ResultTable& table) {
  const auto root = cfg.output_dir;
  write_json_file(root / "config.json", to_json(cfg));
  const auto dir = root / "table1";
  {
    std::ostringstream os;
    write_result_table_csv(os, table);
    write_text_file(dir / "table.csv", os.str());
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"law", to_string(r.law)},
                    {"estimator", to_string(r.estimator)},
                    {"mse", r.mse},
                    {"relative_efficiency", std::isfinite(r.relative_efficiency) ? nlohmann::json(r.relative_efficiency)
                                                                                  : nlohmann::json(nullptr)},
                    {"mse_se", r.mse_se},
                    {"replications", r.replications}});
  }
  write_json_file(dir / "table.json", {{"seed", cfg.seed}, {"rows", rows}});

  std::vector<std::string> header{"law", "replication", "estimator"};
  for (Eigen::Index k = 0; k < cfg.dim(); ++k) header.push_back("theta" + std::to_string(k + 1));
  header.push_back("squared_error");
  CsvTable est(header);
  for (const auto& e : table.estimates) {
    std::vector<std::string> row{to_string(e.law), std::to_string(e.replication), to_string(e.estimator)};
    for (Eigen::Index k = 0; k < e.theta.size(); ++k) row.push_back(format_double(e.theta[k]));
    row.push_back(format_double(e.squared_error));
    est.add_text_row(row);
  }
  write_text_file(dir / "estimates.csv", csv_text(est));

  CsvTable fail({"law", "replication", "estimator", "kind", "message"});
  for (const auto& f : table.failures)
    fail.add_text_row({f.law, std::to_string(f.replication), f.estimator, f.kind, f.message});
  write_text_file(dir / "failures.csv", csv_text(fail));

  CsvTable plot({"law", "estimator", "metric", "value"});
  for (const auto& r : table.rows) {
    plot.add_text_row({to_string(r.law), to_string(r.estimator), "mse", format_double(r.mse)});
    plot.add_text_row({to_string(r.law), to_string(r.estimator), "relative_efficiency", format_double(r.relative_efficiency)});
    plot.add_text_row({to_string(r.law), to_string(r.estimator), "mse_se", format_double(r.mse_se)});
  }
  write_text_file(dir / "plot_long.csv", csv_text(plot));
}

void emit_outputs(const ExperimentConfig& cfg, const BvmSweep& sweep) {
  const auto root = cfg.output_dir;
  write_json_file(root / "config.json", to_json(cfg));
  const auto dir = root / "bvm-sweep";
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& r : sweep.reports) reports.push_back(to_json(r));
  write_json_file(dir / "reports.json", {{"seed", cfg.seed}, {"reports", reports}});

  CsvTable ks({"n", "replication", "target", "ks"});
  std::vector<std::string> rem_header{"n", "replication"};
  for (Eigen::Index k = 0; k < cfg.dim(); ++k) rem_header.push_back("h" + std::to_string(k + 1));
  rem_header.push_back("remainder");
  CsvTable rem(rem_header);
  for (const auto& r : sweep.reports) {
    for (std::size_t k = 0; k < r.ks.size(); ++k)
      ks.add_text_row({std::to_string(r.n), std::to_string(r.replication), "theta" + std::to_string(k + 1), format_double(r.ks[k])});
    for (std::size_t k = 0; k < r.projection_ks.size(); ++k)
      ks.add_text_row({std::to_string(r.n), std::to_string(r.replication), "projection" + std::to_string(k + 1),
                       format_double(r.projection_ks[k])});
    for (std::size_t g = 0; g < r.h.size(); ++g) {
      std::vector<double> row{static_cast<double>(r.n), static_cast<double>(r.replication)};
      for (Eigen::Index k = 0; k < r.h[g].size(); ++k) row.push_back(r.h[g][k]);
      row.push_back(r.remainder[g]);
      rem.add_row(row);
    }
  }
  write_text_file(dir / "ks_long.csv", csv_text(ks));
  write_text_file(dir / "remainder_grid.csv", csv_text(rem));

  std::vector<std::string> header{"n"};
  for (Eigen::Index k = 0; k < cfg.dim(); ++k) header.push_back("median_ks_theta" + std::to_string(k + 1));
  header.push_back("median_max_abs_remainder");
  CsvTable summary(header);
  for (std::size_t l = 0; l < sweep.median_ks.size(); ++l) {
    std::vector<double> row{static_cast<double>(cfg.ladder[l])};
    row.insert(row.end(), sweep.median_ks[l].begin(), sweep.median_ks[l].end());
    row.push_back(sweep.median_max_remainder[l]);
    summary.add_row(row);
  }
  write_text_file(dir / "summary.csv", csv_text(summary));

  CsvTable fail({"law", "replication", "estimator", "kind", "message"});
  for (const auto& f : sweep.failures)
    fail.add_text_row({f.law, std::to_string(f.replication), f.estimator, f.kind, f.message});
  write_text_file(dir / "failures.csv", csv_text(fail));
}

void emit_outputs(const ExperimentConfig& cfg, const LanSweep& sweep) {
  const auto root = cfg.output_dir;
  write_json_file(root / "config.json", to_json(cfg));
  const auto dir = root / "lan-sweep";
  std::vector<std::string> header{"n", "replication"};
  for (Eigen::Index k = 0; k < cfg.dim(); ++k) header.push_back("h" + std::to_string(k + 1));
  header.push_back("remainder");
  CsvTable grid(header);
  CsvTable summary({"n", "median_max_abs_remainder"});
  for (std::size_t l = 0; l < sweep.ladder.size(); ++l) {
    for (std::size_t r = 0; r < sweep.remainder[l].size(); ++r)
      for (std::size_t g = 0; g < sweep.h.size(); ++g) {
        std::vector<double> row{static_cast<double>(sweep.ladder[l]), static_cast<double>(r)};
        for (Eigen::Index k = 0; k < sweep.h[g].size(); ++k) row.push_back(sweep.h[g][k]);
        row.push_back(sweep.remainder[l][r][g]);
        grid.add_row(row);
      }
    summary.add_row({static_cast<double>(sweep.ladder[l]), sweep.median_max_abs[l]});
  }
  write_text_file(dir / "remainder_grid.csv", csv_text(grid));
  write_text_file(dir / "summary.csv", csv_text(summary));
}

}  // namespace symbayes
