#ifndef SYMBAYES_HARNESS_HPP
#define SYMBAYES_HARNESS_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "symbayes/config.hpp"
#include "symbayes/diagnostics.hpp"

namespace symbayes {

// Runs task(i) for i in [0, count) on `threads` workers (0 = hardware
// concurrency). Tasks must not throw.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task);

using ProgressLog = std::function<void(const std::string&)>;

struct ReplicationEstimate {
  ErrorTag law;
  int replication;
  Estimator estimator;
  Eigen::VectorXd theta;
  double squared_error;
};

struct ReplicationFailure {
  std::string law;
  int replication;
  std::string estimator;
  std::string kind;
  std::string message;
};

struct ResultRow {
  ErrorTag law;
  Estimator estimator;
  double mse;
  double relative_efficiency;  // MSE / MSE(B2); NaN without B2
  double mse_se;
  int replications;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<ReplicationEstimate> estimates;
  std::vector<ReplicationFailure> failures;

  // Throws InvalidArgument when the pair is absent.
  const ResultRow& at(ErrorTag law, Estimator estimator) const;
};

// law,estimator,mse,relative_efficiency,mse_se,replications
void write_result_table_csv(std::ostream& out, const ResultTable& table);
ResultTable read_result_table_csv(std::istream& in);

// Paired replications of the mixed-model study: every estimator sees the
// same dataset. Failed replications are dropped when they make up less than
// 2% of N for a law; otherwise NumericalFailure is thrown.
ResultTable run_table1(const ExperimentConfig& cfg, const ProgressLog& log = {});

// Per-ladder-size BvM reports for regression data.
struct BvmSweep {
  std::vector<BvmReport> reports;
  std::vector<ReplicationFailure> failures;
  // median over replications of the coordinate KS, one vector per ladder size
  std::vector<std::vector<double>> median_ks;
  std::vector<double> median_max_remainder;
};
BvmSweep run_bvm_sweep(const ExperimentConfig& cfg, const ProgressLog& log = {},
                       const std::function<void(const BvmReport&, const PosteriorChain&)>& on_chain = {});

struct LanSweep {
  std::vector<Eigen::Index> ladder;
  std::vector<Eigen::VectorXd> h;
  // remainder[l][r][k] for ladder index l, replication r, grid point k
  std::vector<std::vector<std::vector<double>>> remainder;
  std::vector<std::vector<double>> max_abs;  // [l][r]
  std::vector<double> median_max_abs;        // [l]
};
LanSweep run_lan_sweep(const ExperimentConfig& cfg, const ProgressLog& log = {});

// Output trees under cfg.output_dir; each writes config.json at the root.
void emit_outputs(const ExperimentConfig& cfg, const ResultTable& table);
void emit_outputs(const ExperimentConfig& cfg, const BvmSweep& sweep);
void emit_outputs(const ExperimentConfig& cfg, const LanSweep& sweep);

}  // namespace symbayes

#endif  // SYMBAYES_HARNESS_HPP
