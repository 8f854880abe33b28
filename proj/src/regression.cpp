#include "symbayes/regression.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "symbayes/csv.hpp"
#include "symbayes/error.hpp"

namespace symbayes {

RegressionDataset::RegressionDataset(Eigen::VectorXd responses, Eigen::MatrixXd covariates,
                                     std::optional<RegressionTruth> truth)
    : responses_(std::move(responses)), covariates_(std::move(covariates)), truth_(std::move(truth)) {
  require(responses_.size() == covariates_.rows(), ErrorKind::InvalidArgument,
          "responses and covariates disagree in length");
  require(covariates_.cols() >= 1 && responses_.size() >= covariates_.cols(), ErrorKind::InvalidArgument,
          "need n >= p >= 1");
  if (truth_) {
    require(truth_->theta.size() == covariates_.cols(), ErrorKind::InvalidArgument,
            "truth dimension does not match covariates");
  }
  gram_ = design_gram(covariates_);
  gram_range_ = symmetric_eigen_range(gram_);
  require(gram_range_.min > kMinEigenvalue, ErrorKind::DegenerateDesign,
          "rho_min(Z_n) = " + std::to_string(gram_range_.min));
  covariate_bound_ = covariates_.rowwise().norm().maxCoeff();
}

RegressionDataset generate_regression(Eigen::Index n, const Eigen::VectorXd& theta0,
                                      const SymmetricDensity& law, const CovariateScheme& scheme,
                                      Rng& rng, int max_attempts) {
  const Eigen::Index p = theta0.size();
  require(n >= p && p >= 1, ErrorKind::InvalidArgument, "need n >= p >= 1");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Eigen::MatrixXd z(n, p);
    if (scheme.kind == CovariateScheme::Kind::FixedMatrix) {
      require(scheme.fixed.rows() == n && scheme.fixed.cols() == p, ErrorKind::InvalidArgument,
              "fixed covariate matrix has the wrong shape");
      z = scheme.fixed;
    } else {
      std::bernoulli_distribution coin(scheme.success_probability);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < p; ++k) z(i, k) = coin(rng) ? 1.0 : 0.0;
    }
    Eigen::VectorXd x = z * theta0;
    for (Eigen::Index i = 0; i < n; ++i) x[i] += law.sample(rng);
    try {
      return RegressionDataset(std::move(x), std::move(z), RegressionTruth{theta0, law.describe()});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateDesign || scheme.kind == CovariateScheme::Kind::FixedMatrix) throw;
    }
  }
  throw Error(ErrorKind::DegenerateDesign,
              "no nondegenerate design after " + std::to_string(max_attempts) + " attempts");
}

double loglik_regression(const RegressionDataset& data, const Eigen::VectorXd& theta, const Density& eta) {
  const Eigen::VectorXd r = data.residuals(theta);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double l = eta.log_pdf(r[i]);
    if (l == -kInf) return -kInf;
    sum += l;
  }
  return sum;
}

Eigen::VectorXd score_regression(const RegressionDataset& data, const Eigen::VectorXd& theta,
                                 const Density& eta) {
  const Eigen::VectorXd r = data.residuals(theta);
  const Support s = eta.support();
  Eigen::VectorXd score = Eigen::VectorXd::Zero(data.dim());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!s.contains(r[i])) {
      throw Error(ErrorKind::OutOfSupport, "residual " + std::to_string(r[i]) + " at observation " +
                                               std::to_string(i));
    }
    score += data.covariates().row(i).transpose() * eta.score(r[i]);
  }
  return score;
}

void write_regression_csv(std::ostream& out, const RegressionDataset& data) {
  std::vector<std::string> header{"x"};
  for (Eigen::Index k = 0; k < data.dim(); ++k) header.push_back("z" + std::to_string(k + 1));
  CsvTable table(header);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    std::vector<double> row{data.responses()[i]};
    for (Eigen::Index k = 0; k < data.dim(); ++k) row.push_back(data.covariates()(i, k));
    table.add_row(row);
  }
  table.write(out);
}

RegressionDataset read_regression_csv(std::istream& in) {
  const CsvTable table = CsvTable::read(in);
  const auto& header = table.header();
  require(!header.empty() && header[0] == "x", ErrorKind::IoError, "regression CSV must start with column x");
  const Eigen::Index p = static_cast<Eigen::Index>(header.size()) - 1;
  for (Eigen::Index k = 0; k < p; ++k) {
    require(header[k + 1] == "z" + std::to_string(k + 1), ErrorKind::IoError,
            "unexpected column '" + header[k + 1] + "'");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows());
  Eigen::VectorXd x(n);
  Eigen::MatrixXd z(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = table.at(i, 0);
    for (Eigen::Index k = 0; k < p; ++k) z(i, k) = table.at(i, k + 1);
  }
  return RegressionDataset(std::move(x), std::move(z));
}

}  // namespace symbayes
