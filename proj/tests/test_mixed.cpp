#include "doctest.h"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "symbayes/baselines.hpp"
#include "symbayes/error.hpp"
#include "symbayes/error_models.hpp"
#include "symbayes/mixed.hpp"
#include "symbayes/stats.hpp"

using namespace symbayes;

namespace {

const Eigen::Vector2d kTheta0(-1.0, 1.0);

double mvn_log_density(const Eigen::VectorXd& y, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd u = llt.matrixL().solve(y);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (y.size() * std::log(2 * std::numbers::pi) + logdet + u.squaredNorm());
}

// Sigma = s2 I + sb2 W^T W.
Eigen::MatrixXd gaussian_cov(const Eigen::MatrixXd& w, double s2, double sb2) {
  return s2 * Eigen::MatrixXd::Identity(w.cols(), w.cols()) + sb2 * w.transpose() * w;
}

}  // namespace

TEST_SUITE("mixed-model") {

TEST_CASE("noiseless generation with no random effect") {
  Rng rng(1);
  const auto d = generate_mixed(10, 4, kTheta0, 0.0, point_mass_zero(), rng);
  for (Eigen::Index i = 0; i < d.groups(); ++i)
    CHECK((d.response(i) - d.fixed(i).transpose() * kTheta0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.is_random_intercept());
  CHECK(d.covariate_bound() == 1.0);
}

TEST_CASE("point-mass G reduces psi to a product of f") {
  Eigen::VectorXd y(3);
  y << 0.3, -1.2, 2.0;
  const Eigen::MatrixXd w = Eigen::MatrixXd::Ones(1, 3);
  const auto f = make_error_law(ErrorTag::E4);
  double expected = 0.0;
  for (int j = 0; j < 3; ++j) expected += f.log_pdf(y[j]);
  CHECK(psi_log_density(y, w, f, RandomEffectLaw::point_mass()) == doctest::Approx(expected).epsilon(1e-13));
  const Eigen::VectorXd s = psi_score(y, w, f, RandomEffectLaw::point_mass());
  for (int j = 0; j < 3; ++j) CHECK(s[j] == doctest::Approx(f.score(y[j])).epsilon(1e-12));
}

TEST_CASE("gaussian psi and score match the marginal normal") {
  Rng rng(2);
  for (double sb2 : {1.0, 2.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      const int m = 4;
      Eigen::VectorXd y(m);
      for (int j = 0; j < m; ++j) y[j] = 2.0 * std_normal(rng);
      Eigen::MatrixXd w = Eigen::MatrixXd::Ones(1, m);
      if (trial % 2) w(0, 1) = 0.0;
      const Eigen::MatrixXd cov = gaussian_cov(w, 1.0, sb2);
      const auto f = centered_normal(1.0);
      const auto g = RandomEffectLaw::gaussian(sb2);
      CHECK(std::abs(psi_log_density(y, w, f, g) - mvn_log_density(y, cov)) < 1e-6);
      const Eigen::VectorXd s = psi_score(y, w, f, g);
      CHECK((s - cov.ldlt().solve(y)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("random-slope psi with q = 2 matches the marginal normal") {
  Eigen::VectorXd y(3);
  y << 0.4, -0.9, 1.6;
  Eigen::MatrixXd w(2, 3);
  w << 1, 1, 1, 0, 1, 1;
  Eigen::Matrix2d cov_b;
  cov_b << 1.0, 0.3, 0.3, 0.5;
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(3, 3) + w.transpose() * cov_b * w;
  PsiIntegrator integrator;
  integrator.mc_pairs = 200000;
  const double approx = psi_log_density(y, w, centered_normal(1.0), RandomEffectLaw::gaussian(cov_b), integrator);
  CHECK(std::abs(approx - mvn_log_density(y, cov)) < 0.01);
}

TEST_CASE("psi score matches finite differences and is odd") {
  const auto f = make_error_law(ErrorTag::E5);
  const auto g = RandomEffectLaw::gaussian(1.0);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Ones(1, 3);
  Eigen::VectorXd y(3);
  y << 0.7, -0.2, 1.9;
  const Eigen::VectorXd s = psi_score(y, w, f, g);
  const Eigen::VectorXd fd =
      -oracle::gradient([&](const Eigen::VectorXd& v) { return psi_log_density(v, w, f, g); }, y);
  CHECK((s - fd).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, s.cwiseAbs().maxCoeff()));
  CHECK(psi_log_density(-y, w, f, g) == doctest::Approx(psi_log_density(y, w, f, g)).epsilon(1e-12));
  CHECK((psi_score(-y, w, f, g) + s).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mixed log-likelihood gradient equals the score sum") {
  Rng rng(3);
  const auto law = make_error_law(ErrorTag::E4);
  const auto d = generate_mixed(6, 4, kTheta0, 1.0, law, rng);
  const auto g = RandomEffectLaw::gaussian(1.0);
  const Eigen::Vector2d theta(-0.9, 1.2);
  const Eigen::VectorXd s = score_mixed(d, theta, law, g);
  const Eigen::VectorXd grad =
      oracle::gradient([&](const Eigen::VectorXd& t) { return loglik_mixed(d, t, law, g); }, theta);
  CHECK((s - grad).norm() < 1e-5 * std::max(1.0, s.norm()));
}

TEST_CASE("within-group covariance is the random-effect variance") {
  Rng rng(4);
  const auto d = generate_mixed(10000, 2, Eigen::Vector2d::Zero(), 1.0, make_error_law(ErrorTag::E1), rng);
  double cov = 0.0, var = 0.0;
  for (Eigen::Index i = 0; i < d.groups(); ++i) {
    cov += d.responses()(i, 0) * d.responses()(i, 1);
    var += d.responses()(i, 0) * d.responses()(i, 0);
  }
  CHECK(std::abs(cov / d.groups() - 1.0) < 0.05);
  CHECK(std::abs(var / d.groups() - 2.0) < 0.1);
}

TEST_CASE("design pattern summary") {
  Rng rng(5);
  const auto d = generate_mixed(20, 5, kTheta0, 1.0, make_error_law(ErrorTag::E1), rng);
  const auto summary = design_patterns(d);
  CHECK(summary.distinct_patterns == 1);
  CHECK(summary.min_frequency == 1.0);
  CHECK(satisfies_design_floor(d, 0.5));
}

TEST_CASE("unequal group sizes are rejected") {
  std::vector<Eigen::MatrixXd> z{Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(2, 2)};
  std::vector<Eigen::MatrixXd> w{Eigen::MatrixXd::Ones(1, 3), Eigen::MatrixXd::Ones(1, 2)};
  CHECK_THROWS_AS(MixedDataset(Eigen::MatrixXd::Zero(2, 3), z, w), Error);
}

TEST_CASE("mixed CSV round trip") {
  Rng rng(6);
  const auto d = generate_mixed(4, 3, kTheta0, 1.0, make_error_law(ErrorTag::E5), rng);
  std::stringstream ss;
  write_mixed_csv(ss, d);
  CHECK(ss.str().rfind("group,j,x,z1,z2,w1\n", 0) == 0);
  const auto back = read_mixed_csv(ss);
  CHECK(back.responses() == d.responses());
  for (Eigen::Index i = 0; i < d.groups(); ++i) {
    CHECK(back.fixed(i) == d.fixed(i));
    CHECK(back.random(i) == d.random(i));
  }
}

}

TEST_SUITE("frequentist-baselines") {

TEST_CASE("GLS at zero random-effect variance is OLS on the stacked data") {
  Rng rng(7);
  const auto d = generate_mixed(20, 5, kTheta0, 1.0, make_error_law(ErrorTag::E4), rng);
  CHECK((gls_mixed(d, 1.3, 0.0) - ols(d.stacked())).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("GLS matches a dense generalized least squares oracle") {
  Rng rng(8);
  const auto d = generate_mixed(15, 4, kTheta0, 1.0, make_error_law(ErrorTag::E2), rng);
  const double s2 = 0.8, sb2 = 1.7;
  const Eigen::Index n = d.groups(), m = d.group_size();
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(n * m, n * m);
  Eigen::MatrixXd z(n * m, 2);
  Eigen::VectorXd x(n * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    big.block(i * m, i * m, m, m) = gaussian_cov(d.random(i), s2, sb2);
    z.middleRows(i * m, m) = d.fixed(i).transpose();
    x.segment(i * m, m) = d.response(i);
  }
  const Eigen::MatrixXd inv = big.inverse();
  const Eigen::VectorXd oracle_theta = (z.transpose() * inv * z).ldlt().solve(z.transpose() * inv * x);
  CHECK((gls_mixed(d, s2, sb2) - oracle_theta).cwiseAbs().maxCoeff() < 1e-10);

  double ll = 0.0;
  const Eigen::Vector2d t(-0.5, 0.4);
  for (Eigen::Index i = 0; i < n; ++i) ll += mvn_log_density(d.residual(i, t), gaussian_cov(d.random(i), s2, sb2));
  CHECK(gaussian_loglik_mixed(d, t, s2, sb2) == doctest::Approx(ll).epsilon(1e-12));
}

TEST_CASE("ML theta equals GLS at the fitted variance components") {
  Rng rng(9);
  for (auto tag : {ErrorTag::E1, ErrorTag::E3, ErrorTag::E5}) {
    const auto d = generate_mixed(20, 5, kTheta0, 1.0, make_error_law(tag), rng);
    const auto fit = gaussian_ml_mixed(d);
    CHECK(fit.converged);
    CHECK((fit.theta - gls_mixed(d, fit.error_variance, fit.random_effect_variance)).cwiseAbs().maxCoeff() < 1e-8);
    // Brute-force maximization of the full Gaussian likelihood.
    const auto negll = [&](const Eigen::VectorXd& v) {
      return -gaussian_loglik_mixed(d, v.head(2), std::exp(v[2]), std::exp(v[3]));
    };
    Eigen::VectorXd start(4);
    start << 0.0, 0.0, 0.0, 0.0;
    const Eigen::VectorXd best = oracle::nelder_mead(negll, start, 0.5, 8);
    CHECK(fit.loglik >= -negll(best) - 1e-6);
    CHECK(fit.loglik == doctest::Approx(gaussian_loglik_mixed(d, fit.theta, fit.error_variance,
                                                              fit.random_effect_variance)).epsilon(1e-12));
  }
}

TEST_CASE("ML trace is monotone and a refit is idempotent") {
  Rng rng(10);
  const auto d = generate_mixed(20, 5, kTheta0, 1.0, make_error_law(ErrorTag::E4), rng);
  const auto fit = gaussian_ml_mixed(d);
  for (std::size_t k = 1; k < fit.trace.size(); ++k) CHECK(fit.trace[k] >= fit.trace[k - 1] - 1e-12);
  const auto again = gaussian_ml_mixed(d);
  CHECK(again.theta == fit.theta);
  CHECK(again.error_variance == fit.error_variance);
}

TEST_CASE("noiseless data are recovered exactly") {
  Rng rng(11);
  const auto d = generate_mixed(20, 5, kTheta0, 0.0, point_mass_zero(), rng);
  CHECK((gls_mixed(d, 1.0, 1.0) - kTheta0).cwiseAbs().maxCoeff() < 1e-12);
}

}
