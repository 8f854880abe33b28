#ifndef SYMBAYES_BASELINES_HPP
#define SYMBAYES_BASELINES_HPP

#include <Eigen/Dense>
#include <vector>

#include "symbayes/error.hpp"
#include "symbayes/mixed.hpp"
#include "symbayes/regression.hpp"

namespace symbayes {

// Least squares via the normal equations; throws SingularDesign on rank loss.
template <typename DerivedZ, typename DerivedX>
Eigen::Matrix<typename DerivedZ::Scalar, Eigen::Dynamic, 1> least_squares(
    const Eigen::MatrixBase<DerivedZ>& z, const Eigen::MatrixBase<DerivedX>& x) {
  using Matrix = Eigen::Matrix<typename DerivedZ::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Matrix gram = z.transpose() * z;
  Eigen::LDLT<Matrix> ldlt(gram);
  const auto d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * std::max<typename DerivedZ::Scalar>(1, d.maxCoeff())) {
    throw Error(ErrorKind::SingularDesign, "Z^T Z is rank deficient");
  }
  return ldlt.solve(z.transpose() * x);
}

inline Eigen::VectorXd ols(const RegressionDataset& data) {
  return least_squares(data.covariates(), data.responses());
}

struct FrequentistFit {
  Eigen::VectorXd theta;
  double error_variance = 0.0;          // sigma_eps^2
  double random_effect_variance = 0.0;  // sigma_b^2
  bool converged = false;
  int iterations = 0;
  double loglik = 0.0;
  // |d profile / d log lambda| at the optimum (0 at the lambda = 0 boundary).
  double gradient_norm = 0.0;
  // Best profile value after each accepted optimizer step.
  std::vector<double> trace;
};

// GLS for the q = 1 model with per-group covariance sigma_eps^2 I + sigma_b^2 w w^T.
Eigen::VectorXd gls_mixed(const MixedDataset& data, double error_variance, double random_effect_variance);

// Gaussian log-likelihood of the same model.
double gaussian_loglik_mixed(const MixedDataset& data, const Eigen::VectorXd& theta, double error_variance,
                             double random_effect_variance);

struct MlOptions {
  bool reml = false;
  double tolerance = 1e-10;
  int max_iterations = 500;
};

// Gaussian maximum likelihood (Henderson's BLUE for theta) by profiling the
// variance ratio lambda = sigma_b^2 / sigma_eps^2: grid, golden section on
// log lambda, then Newton polish. Throws OptimizerFailure.
FrequentistFit gaussian_ml_mixed(const MixedDataset& data, const MlOptions& options = {});

}  // namespace symbayes

#endif  // SYMBAYES_BASELINES_HPP
