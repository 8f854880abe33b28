#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "symbayes/baselines.hpp"
#include "symbayes/error.hpp"
#include "symbayes/error_models.hpp"
#include "symbayes/regression.hpp"
#include "symbayes/stats.hpp"

using namespace symbayes;

namespace {
const Eigen::Vector2d kTheta0(-1.0, 1.0);
}

TEST_SUITE("regression-model") {

TEST_CASE("noiseless generation") {
  Rng rng(1);
  const auto d = generate_regression(50, kTheta0, point_mass_zero(), CovariateScheme::bernoulli(), rng);
  CHECK((d.responses() - d.covariates() * kTheta0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.covariate_bound() <= std::sqrt(2.0));
  CHECK(d.gram_eigenvalues().min > 0.0);
}

TEST_CASE("degenerate design is rejected") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(10, 2);
  CHECK_THROWS_AS(RegressionDataset(Eigen::VectorXd::Zero(10), z), Error);
  Rng rng(2);
  try {
    generate_regression(3, kTheta0, make_error_law(ErrorTag::E1), CovariateScheme::fixed_matrix(Eigen::MatrixXd::Ones(3, 2)), rng);
    FAIL("expected degenerate design");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateDesign);
  }
}

TEST_CASE("zero theta gives responses distributed as the error law") {
  Rng rng(3);
  const auto law = make_error_law(ErrorTag::E1);
  const auto d = generate_regression(10000, Eigen::Vector2d::Zero(), law, CovariateScheme::bernoulli(), rng);
  std::vector<double> x(d.responses().data(), d.responses().data() + d.size());
  CHECK(ks_statistic(x, [](double t) { return normal_cdf(t); }) < 1.63 / std::sqrt(10000.0));
}

TEST_CASE("OLS sampling error bound for E1 errors") {
  Rng rng(4);
  const Eigen::Index n = 10000;
  const auto d = generate_regression(n, kTheta0, make_error_law(ErrorTag::E1), CovariateScheme::bernoulli(), rng);
  const double bound = 3.0 * std::sqrt(1.0 / d.gram_eigenvalues().min / n);
  CHECK((ols(d) - kTheta0).norm() < bound);
}

TEST_CASE("gaussian log-likelihood closed form") {
  Rng rng(5);
  const auto d = generate_regression(40, kTheta0, make_error_law(ErrorTag::E2), CovariateScheme::bernoulli(), rng);
  const Eigen::Vector2d theta(-0.7, 1.3);
  const Eigen::VectorXd r = d.residuals(theta);
  const double expected = -0.5 * 40 * std::log(2 * std::numbers::pi) - 0.5 * r.squaredNorm();
  CHECK(loglik_regression(d, theta, make_error_law(ErrorTag::E1)) == doctest::Approx(expected).epsilon(1e-13));
  CHECK((score_regression(d, theta, make_error_law(ErrorTag::E1)) - d.covariates().transpose() * r).norm() < 1e-12);
}

TEST_CASE("single observation at zero residual") {
  Eigen::MatrixXd z(1, 1);
  z << 2.0;
  Eigen::VectorXd x(1);
  x << 3.0;
  const RegressionDataset d(x, z);
  const auto e4 = make_error_law(ErrorTag::E4);
  CHECK(loglik_regression(d, Eigen::VectorXd::Constant(1, 1.5), e4) == e4.log_pdf(0.0));
}

TEST_CASE("E4 log-likelihood equals the sum of mixture log-densities") {
  Rng rng(6);
  const auto law = make_error_law(ErrorTag::E4);
  const auto d = generate_regression(100, kTheta0, law, CovariateScheme::bernoulli(), rng);
  const Eigen::VectorXd r = d.residuals(kTheta0);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) sum += std::log(oracle::e4_density(r[i]));
  CHECK(std::abs(loglik_regression(d, kTheta0, law) - sum) < 1e-12 * std::abs(sum));
}

TEST_CASE("score matches the finite-difference gradient of the log-likelihood") {
  Rng rng(7);
  for (auto tag : {ErrorTag::E1, ErrorTag::E2, ErrorTag::E4, ErrorTag::E5}) {
    const auto law = make_error_law(tag);
    const auto d = generate_regression(60, kTheta0, law, CovariateScheme::bernoulli(), rng);
    const Eigen::Vector2d theta(-0.8, 1.1);
    const Eigen::VectorXd g = oracle::gradient([&](const Eigen::VectorXd& t) { return loglik_regression(d, t, law); }, theta);
    const Eigen::VectorXd s = score_regression(d, theta, law);
    CHECK((g - s).norm() < 1e-6 * std::max(1.0, s.norm()));
  }
}

TEST_CASE("score has mean zero at the truth for any symmetric eta") {
  const auto law = make_error_law(ErrorTag::E4);
  for (const SymmetricDensity& eta : {make_error_law(ErrorTag::E4), make_error_law(ErrorTag::E1), student_t(3.0)}) {
    Rng rng(8);
    std::vector<double> s1, s2;
    for (int rep = 0; rep < 2000; ++rep) {
      const auto d = generate_regression(30, kTheta0, law, CovariateScheme::bernoulli(), rng);
      const Eigen::VectorXd s = score_regression(d, kTheta0, eta);
      s1.push_back(s[0]);
      s2.push_back(s[1]);
    }
    CHECK(std::abs(mean(s1)) < 4.0 * std::sqrt(variance(s1) / 2000.0));
    CHECK(std::abs(mean(s2)) < 4.0 * std::sqrt(variance(s2) / 2000.0));
  }
}

TEST_CASE("gaussian log-likelihood is concave") {
  Rng rng(9);
  const auto law = make_error_law(ErrorTag::E1);
  const auto d = generate_regression(50, kTheta0, law, CovariateScheme::bernoulli(), rng);
  for (int probe = 0; probe < 10; ++probe) {
    const Eigen::Vector2d t(uniform(rng, -3, 3), uniform(rng, -3, 3));
    Eigen::Matrix2d h;
    const double eps = 1e-3;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        Eigen::Vector2d pp = t, pm = t, mp = t, mm = t;
        pp[a] += eps; pp[b] += eps;
        pm[a] += eps; pm[b] -= eps;
        mp[a] -= eps; mp[b] += eps;
        mm[a] -= eps; mm[b] -= eps;
        h(a, b) = (loglik_regression(d, pp, law) - loglik_regression(d, pm, law) - loglik_regression(d, mp, law) +
                   loglik_regression(d, mm, law)) / (4 * eps * eps);
      }
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(0.5 * (h + h.transpose())).eigenvalues().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("out-of-support residuals") {
  Rng rng(10);
  const auto d = generate_regression(20, kTheta0, make_error_law(ErrorTag::E3), CovariateScheme::bernoulli(), rng);
  const auto narrow = centered_uniform(0.1);
  CHECK(loglik_regression(d, kTheta0, narrow) == -kInf);
  CHECK_THROWS_AS(score_regression(d, kTheta0, narrow), Error);
}

TEST_CASE("CSV round trip is bit exact") {
  Rng rng(11);
  const auto d = generate_regression(25, kTheta0, make_error_law(ErrorTag::E2), CovariateScheme::bernoulli(), rng);
  std::stringstream ss;
  write_regression_csv(ss, d);
  CHECK(ss.str().rfind("x,z1,z2\n", 0) == 0);
  const auto back = read_regression_csv(ss);
  CHECK(back.responses() == d.responses());
  CHECK(back.covariates() == d.covariates());
}

}

TEST_SUITE("frequentist-baselines") {

TEST_CASE("OLS oracles") {
  Rng rng(12);
  const auto exact = generate_regression(30, kTheta0, point_mass_zero(), CovariateScheme::bernoulli(), rng);
  CHECK((ols(exact) - kTheta0).norm() < 1e-12);

  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(15, 1);
  Eigen::VectorXd x(15);
  for (int i = 0; i < 15; ++i) x[i] = std::sin(i);
  CHECK(ols(RegressionDataset(x, ones))[0] == doctest::Approx(x.mean()).epsilon(1e-14));

  const auto d = generate_regression(80, kTheta0, make_error_law(ErrorTag::E4), CovariateScheme::bernoulli(), rng);
  const Eigen::VectorXd t = ols(d);
  CHECK((d.covariates().transpose() * d.residuals(t)).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::VectorXd brute = oracle::nelder_mead([&](const Eigen::VectorXd& v) { return d.residuals(v).squaredNorm(); },
                                                    Eigen::VectorXd::Zero(2));
  CHECK((t - brute).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("rank deficiency is a singular design") {
  Eigen::MatrixXd z(4, 2);
  z << 1, 2, 2, 4, 3, 6, 4, 8;
  try {
    least_squares(z, Eigen::VectorXd::Ones(4));
    FAIL("expected singular design");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularDesign);
  }
}

}
