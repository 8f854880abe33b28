#ifndef SYMBAYES_REGRESSION_HPP
#define SYMBAYES_REGRESSION_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>

#include "symbayes/density.hpp"

namespace symbayes {

// n^{-1} sum_i Z_i Z_i^T for a design with rows Z_i.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> design_gram(
    const Eigen::MatrixBase<Derived>& rows) {
  using Scalar = typename Derived::Scalar;
  return (rows.transpose() * rows) / static_cast<Scalar>(rows.rows());
}

struct EigenRange {
  double min;
  double max;
};

template <typename Derived>
EigenRange symmetric_eigen_range(const Eigen::MatrixBase<Derived>& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.derived(), Eigen::EigenvaluesOnly);
  return {solver.eigenvalues().minCoeff(), solver.eigenvalues().maxCoeff()};
}

struct RegressionTruth {
  Eigen::VectorXd theta;
  std::string error_law;
};

// X_i = theta^T Z_i + eps_i with symmetric eps. Immutable once created.
class RegressionDataset {
 public:
  static constexpr double kMinEigenvalue = 1e-8;

  // Throws DegenerateDesign when rho_min(Z_n) <= 1e-8.
  RegressionDataset(Eigen::VectorXd responses, Eigen::MatrixXd covariates,
                    std::optional<RegressionTruth> truth = std::nullopt);

  Eigen::Index size() const { return responses_.size(); }
  Eigen::Index dim() const { return covariates_.cols(); }
  const Eigen::VectorXd& responses() const { return responses_; }
  // Row i is Z_i.
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::optional<RegressionTruth>& truth() const { return truth_; }

  // Z_n = n^{-1} sum Z_i Z_i^T and its extreme eigenvalues.
  const Eigen::MatrixXd& gram() const { return gram_; }
  EigenRange gram_eigenvalues() const { return gram_range_; }
  // L = sup_i |Z_i|.
  double covariate_bound() const { return covariate_bound_; }

  Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const {
    return responses_ - covariates_ * theta;
  }

 private:
  Eigen::VectorXd responses_;
  Eigen::MatrixXd covariates_;
  std::optional<RegressionTruth> truth_;
  Eigen::MatrixXd gram_;
  EigenRange gram_range_{};
  double covariate_bound_ = 0.0;
};

struct CovariateScheme {
  enum class Kind { Bernoulli, FixedMatrix };
  Kind kind = Kind::Bernoulli;
  double success_probability = 0.5;
  Eigen::MatrixXd fixed;  // n x p, used by FixedMatrix

  static CovariateScheme bernoulli(double prob = 0.5) { return {Kind::Bernoulli, prob, {}}; }
  static CovariateScheme fixed_matrix(Eigen::MatrixXd z) { return {Kind::FixedMatrix, 0.5, std::move(z)}; }
};

// Bernoulli designs are redrawn up to `max_attempts` times until
// nondegenerate; then DegenerateDesign is thrown.
RegressionDataset generate_regression(Eigen::Index n, const Eigen::VectorXd& theta0,
                                      const SymmetricDensity& law, const CovariateScheme& scheme,
                                      Rng& rng, int max_attempts = 100);

// sum_i log eta(X_i - theta^T Z_i); -inf when a residual leaves the support.
double loglik_regression(const RegressionDataset& data, const Eigen::VectorXd& theta,
                         const Density& eta);

// sum_i Z_i s_eta(X_i - theta^T Z_i). Throws OutOfSupport.
Eigen::VectorXd score_regression(const RegressionDataset& data, const Eigen::VectorXd& theta,
                                 const Density& eta);

// CSV with header x,z1..zp; values written with 17 significant digits.
void write_regression_csv(std::ostream& out, const RegressionDataset& data);
RegressionDataset read_regression_csv(std::istream& in);

}  // namespace symbayes

#endif  // SYMBAYES_REGRESSION_HPP
