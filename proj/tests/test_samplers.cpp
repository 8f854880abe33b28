#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "geweke.hpp"
#include "oracles.hpp"
#include "symbayes/baselines.hpp"
#include "symbayes/error.hpp"
#include "symbayes/error_models.hpp"
#include "symbayes/samplers.hpp"
#include "symbayes/stats.hpp"

using namespace symbayes;

namespace {

const Eigen::Vector2d kTheta0(-1.0, 1.0);

double column_se(const PosteriorChain& c, Eigen::Index k) {
  const Eigen::VectorXd col = c.theta.col(k);
  return batch_means_se({col.data(), static_cast<std::size_t>(col.size())});
}

void check_geweke(const std::vector<geweke::Result>& results) {
  for (const auto& r : results) {
    CHECK_MESSAGE(std::abs(r.z()) < 4.0, r.name << ": " << r.estimate << " vs " << r.expected << " se " << r.se);
  }
}

}  // namespace

TEST_SUITE("posterior-samplers") {

TEST_CASE("config validation") {
  SamplerConfig c;
  CHECK_NOTHROW(c.validate());
  c.burn_in = c.iterations;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SamplerConfig{};
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SamplerConfig{};
  c.atom_scale_step = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SamplerConfig{};
  c.thin = 3;
  CHECK(c.kept_draws() == 1000);
}

TEST_CASE("geweke joint-distribution test for the gaussian engine") {
  Rng rng(1);
  const auto data = generate_mixed(5, 3, kTheta0, 1.0, make_error_law(ErrorTag::E1), rng);
  GibbsSampler sampler(data, geweke::proper_config(), GibbsSampler::ErrorModel::Gaussian, rng);
  check_geweke(geweke::run(sampler, false, 40000, rng));
}

TEST_CASE("geweke joint-distribution test for the dpm engine") {
  Rng rng(2);
  const auto data = generate_mixed(4, 3, kTheta0, 1.0, make_error_law(ErrorTag::E4), rng);
  GibbsSampler sampler(data, geweke::proper_config(), GibbsSampler::ErrorModel::Dpm, rng);
  check_geweke(geweke::run(sampler, true, 30000, rng));

  const auto reg = generate_regression(8, kTheta0, make_error_law(ErrorTag::E4), CovariateScheme::bernoulli(), rng);
  GibbsSampler regression(reg, geweke::proper_config(), GibbsSampler::ErrorModel::Dpm, rng);
  check_geweke(geweke::run(regression, true, 30000, rng));
}

TEST_CASE("fixed seeds give bitwise identical chains") {
  Rng rng(3);
  const auto data = generate_mixed(20, 5, kTheta0, 1.0, make_error_law(ErrorTag::E5), rng);
  SamplerConfig c;
  c.iterations = 600;
  c.burn_in = 200;
  c.seed = 77;
  const auto a = fit_b2_mixed(data, c);
  const auto b = fit_b2_mixed(data, c);
  CHECK(a.theta == b.theta);
  CHECK(a.hyper == b.hyper);
  CHECK(fit_b1_mixed(data, c).theta == fit_b1_mixed(data, c).theta);
  c.seed = 78;
  CHECK(fit_b2_mixed(data, c).theta != a.theta);
}

TEST_CASE("dpm atoms never leave the rectangle") {
  Rng rng(4);
  const auto data = generate_mixed(20, 5, kTheta0, 1.0, make_error_law(ErrorTag::E2), rng);
  SamplerConfig c;
  c.iterations = 1500;
  c.burn_in = 500;
  c.dpm_snapshot_every = 5;
  const auto chain = fit_b2_mixed(data, c);
  REQUIRE(chain.dpm_snapshots.size() == 200);
  for (const auto& s : chain.dpm_snapshots)
    for (const auto& a : s.atoms) CHECK(c.dpm.in_rectangle(a.location, a.scale));
  CHECK(chain.acceptance.count("atom_location"));
  CHECK((chain.theta.array().isFinite()).all());
  CHECK((chain.ess.array() > 0.0).all());
}

TEST_CASE("sign augmentation marginalizes to the symmetrized atom") {
  const DpmAtom atom{1.0, 1.3, 0.7};
  const auto d = dpm_density(DpmDraw{{atom}});
  for (double x : {-2.0, -0.3, 0.0, 0.8, 3.1}) {
    const double marginal = 0.5 * oracle::phi(x, 1.3, 0.7) + 0.5 * oracle::phi(x, -1.3, 0.7);
    CHECK(std::abs(d.pdf(x) - marginal) < 1e-12);
  }
}

TEST_CASE("single fixed atom reduces B2 to gaussian errors with known variance") {
  Rng rng(5);
  const auto data = generate_regression(60, kTheta0, make_error_law(ErrorTag::E1), CovariateScheme::bernoulli(), rng);
  SamplerConfig c;
  c.iterations = 12000;
  c.burn_in = 2000;
  c.dpm.truncation = 1;
  c.dpm.location_bound = 1e-9;
  c.dpm.scale_lo = 1.0;
  c.dpm.scale_hi = 1.0 + 1e-9;
  const auto b2 = fit_b2_regression(data, c);
  c.fixed_error_variance = 1.0;
  const auto b1 = fit_gaussian_regression(data, c);
  // Exact posterior under flat-ish normal prior.
  const Eigen::MatrixXd prec = data.covariates().transpose() * data.covariates() +
                               Eigen::MatrixXd::Identity(2, 2) / c.theta_prior_variance;
  const Eigen::VectorXd exact = prec.ldlt().solve(data.covariates().transpose() * data.responses());
  const Eigen::MatrixXd cov = prec.inverse();
  for (Eigen::Index k = 0; k < 2; ++k) {
    CHECK(std::abs(b2.posterior_mean()[k] - b1.posterior_mean()[k]) < 4.0 * std::hypot(column_se(b2, k), column_se(b1, k)));
    CHECK(std::abs(b1.posterior_mean()[k] - exact[k]) < 4.0 * column_se(b1, k));
    CHECK(b2.posterior_sd()[k] == doctest::Approx(std::sqrt(cov(k, k))).epsilon(0.1));
  }
}

TEST_CASE("noiseless data with tight variance priors") {
  Rng rng(6);
  const auto data = generate_mixed(20, 5, kTheta0, 0.0, point_mass_zero(), rng);
  SamplerConfig c;
  c.iterations = 2000;
  c.burn_in = 500;
  c.fixed_error_variance = 1e-8;
  c.random_effect_variance_prior = {1e4, 1e-4};
  const auto chain = fit_b1_mixed(data, c);
  CHECK((chain.posterior_mean() - kTheta0).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("B1 posterior mean is close to the gaussian ML estimate") {
  Rng rng(7);
  const auto data = generate_mixed(200, 5, kTheta0, 1.0, make_error_law(ErrorTag::E1), rng);
  SamplerConfig c;
  const auto chain = fit_b1_mixed(data, c);
  const auto ml = gaussian_ml_mixed(data);
  for (Eigen::Index k = 0; k < 2; ++k)
    CHECK(std::abs(chain.posterior_mean()[k] - ml.theta[k]) < 4.0 * chain.posterior_sd()[k]);
  CHECK(mean(chain.hyper.at("sigma_eps2")) == doctest::Approx(ml.error_variance).epsilon(0.1));
}

TEST_CASE("DPM posterior predictive recovers a gaussian error density") {
  Rng rng(8);
  const auto data = generate_regression(1000, kTheta0, make_error_law(ErrorTag::E1), CovariateScheme::bernoulli(), rng);
  SamplerConfig c;
  c.iterations = 3000;
  c.burn_in = 1000;
  c.dpm_snapshot_every = 20;
  const auto chain = fit_b2_regression(data, c);
  const double h = std::sqrt(hellinger_sq(chain.posterior_predictive_density(), centered_normal(1.0)));
  MESSAGE("Hellinger distance " << h);
  CHECK(h < 0.05);
}

TEST_CASE("posterior is invariant under observation reordering") {
  Rng rng(9);
  const auto data = generate_mixed(20, 5, kTheta0, 1.0, make_error_law(ErrorTag::E4), rng);
  std::vector<Eigen::Index> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd x(20, 5);
  std::vector<Eigen::MatrixXd> z, w;
  for (Eigen::Index i = 0; i < 20; ++i) {
    const Eigen::Index src = perm[i];
    Eigen::VectorXi cols(5);
    cols << 4, 2, 0, 3, 1;
    Eigen::MatrixXd zi(2, 5), wi(1, 5);
    for (int j = 0; j < 5; ++j) {
      x(i, j) = data.responses()(src, cols[j]);
      zi.col(j) = data.fixed(src).col(cols[j]);
      wi.col(j) = data.random(src).col(cols[j]);
    }
    z.push_back(zi);
    w.push_back(wi);
  }
  const MixedDataset permuted(x, z, w);
  SamplerConfig c;
  c.iterations = 8000;
  const auto a = fit_b2_mixed(data, c);
  const auto b = fit_b2_mixed(permuted, c);
  for (Eigen::Index k = 0; k < 2; ++k)
    CHECK(std::abs(a.posterior_mean()[k] - b.posterior_mean()[k]) < 4.0 * std::hypot(column_se(a, k), column_se(b, k)));
}

TEST_CASE("chain CSV round trip") {
  Rng rng(10);
  const auto data = generate_mixed(10, 5, kTheta0, 1.0, make_error_law(ErrorTag::E1), rng);
  SamplerConfig c;
  c.iterations = 300;
  c.burn_in = 100;
  const auto chain = fit_b1_mixed(data, c);
  std::stringstream ss;
  write_chain_csv(ss, chain);
  CHECK(ss.str().rfind("draw,theta1,theta2,sigma_b2,sigma_eps2\n", 0) == 0);
  const auto back = read_chain_csv(ss);
  CHECK(back.theta == chain.theta);
  CHECK(back.hyper == chain.hyper);
}

TEST_CASE("series sampler with fixed zero coefficients samples uniform-error posterior") {
  Rng rng(11);
  const auto data = generate_regression(40, kTheta0, make_error_law(ErrorTag::E3), CovariateScheme::bernoulli(), rng);
  SamplerConfig c;
  c.iterations = 60000;
  c.burn_in = 2000;
  c.fix_series_coefficients = true;
  const auto chain = fit_series_regression(data, c);
  const double half = 0.5 * chain.response_scale;
  // Rejection oracle: likelihood is the indicator of |residual| < half.
  const Eigen::VectorXd centre = ols(data);
  std::vector<double> t1, t2;
  Rng orng(12);
  while (t1.size() < 20000) {
    const Eigen::Vector2d t(uniform(orng, centre[0] - 2 * half, centre[0] + 2 * half),
                            uniform(orng, centre[1] - 2 * half, centre[1] + 2 * half));
    if (data.residuals(t).cwiseAbs().maxCoeff() < half) {
      t1.push_back(t[0]);
      t2.push_back(t[1]);
    }
  }
  const double o[] = {mean(t1), mean(t2)};
  const double ose[] = {std::sqrt(variance(t1) / t1.size()), std::sqrt(variance(t2) / t2.size())};
  for (Eigen::Index k = 0; k < 2; ++k) {
    CHECK(std::abs(chain.posterior_mean()[k] - o[k]) < 4.0 * std::hypot(column_se(chain, k), ose[k]));
  }
  for (Eigen::Index r = 0; r < chain.theta.rows(); r += 97) {
    const Eigen::VectorXd theta = chain.theta.row(r).transpose();
    CHECK(data.residuals(theta).cwiseAbs().maxCoeff() < half);
  }
}

TEST_CASE("series sampler acceptance rates and determinism on E4 data") {
  Rng rng(13);
  const auto data = generate_regression(100, kTheta0, make_error_law(ErrorTag::E4), CovariateScheme::bernoulli(), rng);
  SamplerConfig c;
  c.iterations = 3000;
  c.burn_in = 1000;
  const auto chain = fit_series_regression(data, c);
  CHECK(chain.acceptance.at("theta") >= 0.1);
  CHECK(chain.acceptance.at("theta") <= 0.6);
  CHECK(chain.acceptance.at("coefficients") >= 0.1);
  CHECK(chain.acceptance.at("coefficients") <= 0.6);
  CHECK(fit_series_regression(data, c).theta == chain.theta);
}

}
