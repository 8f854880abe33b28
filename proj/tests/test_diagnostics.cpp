#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "symbayes/baselines.hpp"
#include "symbayes/diagnostics.hpp"
#include "symbayes/error.hpp"
#include "symbayes/error_models.hpp"
#include "symbayes/samplers.hpp"
#include "symbayes/stats.hpp"

using namespace symbayes;

namespace {

const Eigen::Vector2d kTheta0(-1.0, 1.0);

double e4_derivative(double x) {
  const double mu[] = {0.0, 1.5, 2.5, 3.5};
  const double pi[] = {0.1, 0.2, 0.15, 0.05};
  double s = 0.0;
  for (int k = 0; k < 4; ++k)
    s += pi[k] * (-(x - mu[k]) * oracle::phi(x - mu[k]) - (x + mu[k]) * oracle::phi(x + mu[k]));
  return s;
}

}  // namespace

TEST_SUITE("efficiency-diagnostics") {

TEST_CASE("fisher information of gaussian laws") {
  CHECK(std::abs(efficient_information(centered_normal(1.0), centered_normal(1.0)) - 1.0) < 1e-8);
  for (double sd : {0.5, 2.0}) {
    const auto g = centered_normal(sd);
    CHECK(std::abs(efficient_information(g, g) - 1.0 / (sd * sd)) < 1e-8);
  }
}

TEST_CASE("E4 fisher information matches a dense grid") {
  const auto e4 = make_error_law(ErrorTag::E4);
  const double oracle_v = oracle::dense_grid(
      [](double x) {
        const double d = e4_derivative(x);
        return d * d / oracle::e4_density(x);
      },
      -14.0, 14.0);
  CHECK(std::abs(efficient_information(e4, e4) - oracle_v) < 1e-8);
  // Misspecified eta = phi: P_eta0[x s_eta0(x)] = 1 by integration by parts.
  CHECK(std::abs(efficient_information(centered_normal(1.0), e4) - 1.0) < 1e-8);
}

TEST_CASE("score distance and cauchy-schwarz") {
  const auto e4 = make_error_law(ErrorTag::E4);
  CHECK(score_distance_sq(e4, e4) == doctest::Approx(0.0).epsilon(1e-12));
  for (const SymmetricDensity& eta : {centered_normal(1.0), student_t(3.0), make_error_law(ErrorTag::E5)}) {
    const double v0 = efficient_information(e4, e4);
    const double v = efficient_information(eta, e4);
    const double d2 = score_distance_sq(eta, e4);
    CHECK(d2 >= 0.0);
    CHECK((v0 - v) * (v0 - v) <= v0 * d2 + 1e-10);
  }
}

TEST_CASE("regression information is v times the gram matrix") {
  Rng rng(1);
  const auto d = generate_regression(100, kTheta0, make_error_law(ErrorTag::E4), CovariateScheme::bernoulli(), rng);
  const auto e4 = make_error_law(ErrorTag::E4);
  const auto info = fisher_regression(e4, e4, d.gram());
  REQUIRE(info.v_eta.has_value());
  CHECK((info.information - *info.v_eta * d.gram()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(info.eigenvalues.min > 0.0);
}

TEST_CASE("mixed information by monte carlo agrees with the gaussian closed form") {
  Rng rng(2);
  const auto data = generate_mixed(20, 5, kTheta0, 1.0, make_error_law(ErrorTag::E1), rng);
  const auto f = centered_normal(1.0);
  const auto g = RandomEffectLaw::gaussian(1.0);
  const auto info = fisher_mixed(f, g, f, g, data, rng);
  const Eigen::MatrixXd exact = gaussian_mixed_information(data, 1.0, Eigen::MatrixXd::Identity(1, 1));
  CHECK(info.patterns.size() == 1);
  for (Eigen::Index a = 0; a < 2; ++a)
    for (Eigen::Index b = 0; b < 2; ++b)
      CHECK_MESSAGE(std::abs(info.information(a, b) - exact(a, b)) < 3.0 * info.information_se(a, b),
                    info.information(a, b) << " vs " << exact(a, b));
}

TEST_CASE("point-mass G reduces mixed information to the regression form") {
  Rng rng(3);
  const auto e4 = make_error_law(ErrorTag::E4);
  const auto data = generate_mixed(20, 5, kTheta0, 0.0, e4, rng);
  const auto pm = RandomEffectLaw::point_mass();
  const auto info = fisher_mixed(e4, pm, e4, pm, data, rng);
  const Eigen::MatrixXd expected = efficient_information(e4, e4) * data.group_size() * data.stacked().gram();
  for (Eigen::Index a = 0; a < 2; ++a)
    for (Eigen::Index b = 0; b < 2; ++b)
      CHECK(std::abs(info.information(a, b) - expected(a, b)) < 3.0 * info.information_se(a, b) + 1e-12);
}

TEST_CASE("too few monte carlo draws are flagged") {
  Rng rng(4);
  const auto data = generate_mixed(5, 5, kTheta0, 1.0, make_error_law(ErrorTag::E1), rng);
  FisherMcOptions options;
  options.draws = 5;
  options.max_relative_se = 1e-3;
  const auto f = centered_normal(1.0);
  const auto g = RandomEffectLaw::gaussian(1.0);
  try {
    fisher_mixed(f, g, f, g, data, rng, options);
    FAIL("expected insufficient MC size");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientMcSize);
  }
}

TEST_CASE("gaussian delta_n is the scaled OLS error") {
  Rng rng(5);
  const auto phi = centered_normal(1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = generate_regression(50 + rep, kTheta0, make_error_law(ErrorTag::E4), CovariateScheme::bernoulli(), rng);
    const auto info = fisher_regression(phi, phi, d.gram());
    const Eigen::VectorXd delta = delta_n(d, kTheta0, phi, info);
    const Eigen::VectorXd expected = std::sqrt(static_cast<double>(d.size())) * (ols(d) - kTheta0);
    CHECK((delta - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("zero residuals give zero delta_n") {
  Rng rng(6);
  const auto d = generate_regression(30, kTheta0, point_mass_zero(), CovariateScheme::bernoulli(), rng);
  const auto e4 = make_error_law(ErrorTag::E4);
  CHECK(delta_n(d, kTheta0, e4, fisher_regression(e4, e4, d.gram())).norm() == 0.0);
}

TEST_CASE("singular information is rejected") {
  Rng rng(7);
  const auto d = generate_regression(30, kTheta0, make_error_law(ErrorTag::E1), CovariateScheme::bernoulli(), rng);
  FisherInfo info;
  info.information = Eigen::MatrixXd::Zero(2, 2);
  try {
    delta_n(d, kTheta0, centered_normal(1.0), info);
    FAIL("expected singular information");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularInformation);
  }
}

TEST_CASE("delta_n covariance is the inverse information") {
  const auto e4 = make_error_law(ErrorTag::E4);
  const int reps = 500;
  Rng rng(8);
  const double v = efficient_information(e4, e4);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(2, 2);
  for (int r = 0; r < reps; ++r) {
    const auto d = generate_regression(400, kTheta0, e4, CovariateScheme::bernoulli(), rng);
    FisherInfo info;
    info.information = v * d.gram();
    const Eigen::VectorXd delta = delta_n(d, kTheta0, e4, info);
    second += delta * delta.transpose() / reps;
    expected += info.information.inverse() / reps;
  }
  const double err = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(second - expected).eigenvalues().cwiseAbs().maxCoeff();
  const double scale = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(expected).eigenvalues().maxCoeff();
  CHECK(err < 0.15 * scale);
}

TEST_CASE("h grid lattice") {
  const auto grid = h_grid(2, 2.0, 9);
  for (const auto& h : grid) CHECK(h.norm() <= 2.0 + 1e-12);
  int zeros = 0;
  for (const auto& h : grid) zeros += h.isZero(0.0);
  CHECK(zeros == 1);
  CHECK(h_grid(1, 1.0, 5).size() == 5);
}

TEST_CASE("LAN remainder vanishes for gaussian eta and at h = 0") {
  Rng rng(9);
  const auto phi = centered_normal(1.0);
  const auto e4 = make_error_law(ErrorTag::E4);
  const auto grid = h_grid(2, 2.0, 9);
  for (auto tag : {ErrorTag::E1, ErrorTag::E2, ErrorTag::E4}) {
    const auto d = generate_regression(200, kTheta0, make_error_law(tag), CovariateScheme::bernoulli(), rng);
    const auto rem = lan_remainder(d, phi, kTheta0, grid, fisher_regression(phi, phi, d.gram()));
    for (double r : rem) CHECK(std::abs(r) < 1e-10);
    const auto rem4 = lan_remainder(d, e4, kTheta0, grid, fisher_regression(e4, e4, d.gram()));
    for (std::size_t k = 0; k < grid.size(); ++k)
      if (grid[k].isZero(0.0)) CHECK(rem4[k] == 0.0);
  }
}

TEST_CASE("KL ball sums for gaussian laws") {
  Rng rng(10);
  const auto d = generate_regression(80, kTheta0, make_error_law(ErrorTag::E1), CovariateScheme::bernoulli(), rng);
  const auto phi = centered_normal(1.0);
  const Eigen::Vector2d theta(-0.9, 1.05);
  const Eigen::VectorXd offs = d.covariates() * (theta - kTheta0);
  const auto ball = kl_ball_membership(d.covariates(), theta, phi, kTheta0, phi, 0.1);
  CHECK(ball.sum_k == doctest::Approx(0.5 * offs.squaredNorm()).epsilon(1e-8));
  CHECK(ball.sum_v == doctest::Approx(offs.squaredNorm()).epsilon(1e-8));
  CHECK(ball.in_ball == (ball.sum_k <= 80 * 0.01 && ball.sum_v <= 80 * 0.01));

  const auto at_truth = kl_ball_membership(d.covariates(), kTheta0, phi, kTheta0, phi, 0.0);
  CHECK(at_truth.sum_k == 0.0);
  CHECK(at_truth.in_ball);
  CHECK_FALSE(kl_ball_membership(d.covariates(), theta, phi, kTheta0, phi, 0.0).in_ball);
}

TEST_CASE("mean hellinger") {
  Rng rng(11);
  const auto d = generate_regression(50, kTheta0, make_error_law(ErrorTag::E1), CovariateScheme::bernoulli(), rng);
  const auto phi = centered_normal(1.0);
  CHECK(mean_hellinger(d.covariates(), kTheta0, phi, kTheta0, phi) == 0.0);
  const Eigen::Vector2d theta(-0.5, 1.5);
  const Eigen::VectorXd offs = d.covariates() * (theta - kTheta0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < offs.size(); ++i) total += 2.0 * (1.0 - std::exp(-offs[i] * offs[i] / 8.0));
  CHECK(mean_hellinger(d.covariates(), theta, phi, kTheta0, phi) == doctest::Approx(std::sqrt(total / 50.0)).epsilon(1e-8));
}

TEST_CASE("bvm distance is calibrated on exact draws") {
  Rng rng(12);
  const Eigen::Index n = 400;
  Eigen::Matrix2d info;
  info << 1.0, 0.3, 0.3, 0.8;
  const Eigen::Vector2d delta(0.4, -0.2);
  const Eigen::Matrix2d cov = info.inverse();
  const Eigen::Matrix2d chol = cov.llt().matrixL();
  PosteriorChain chain;
  chain.theta.resize(4000, 2);
  for (Eigen::Index r = 0; r < chain.theta.rows(); ++r) {
    const Eigen::Vector2d e(std_normal(rng), std_normal(rng));
    chain.theta.row(r) = (kTheta0 + (delta + chol * e) / std::sqrt(static_cast<double>(n))).transpose();
  }
  const auto dist = bvm_distance(chain, n, kTheta0, delta, info, {Eigen::Vector2d(1.0, 1.0) / std::sqrt(2.0)});
  for (double ks : dist.coordinate_ks) CHECK(ks < 1.63 / std::sqrt(4000.0));
  CHECK(dist.projection_ks.at(0) < 1.63 / std::sqrt(4000.0));

  // A random walk has a tiny ESS.
  double walk = 0.0;
  for (Eigen::Index r = 0; r < chain.theta.rows(); ++r) {
    walk += 0.01 * std_normal(rng);
    chain.theta(r, 0) = walk;
  }
  try {
    bvm_distance(chain, n, kTheta0, delta, info);
    FAIL("expected unreliable chain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnreliableChain);
  }
}

}
