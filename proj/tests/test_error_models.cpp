#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "symbayes/error.hpp"
#include "symbayes/error_models.hpp"
#include "symbayes/quadrature.hpp"
#include "symbayes/stats.hpp"

using namespace symbayes;

TEST_SUITE("error-models") {

TEST_CASE("mixture parameters") {
  const auto e4 = error_law(ErrorTag::E4);
  REQUIRE(e4.mixture_params.size() == 4);
  const double mu4[] = {0.0, 1.5, 2.5, 3.5}, pi4[] = {0.1, 0.2, 0.15, 0.05};
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    CHECK(e4.mixture_params[k].location == mu4[k]);
    CHECK(e4.mixture_params[k].weight == pi4[k]);
    total += 2.0 * e4.mixture_params[k].weight;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  const auto e5 = error_law(ErrorTag::E5);
  const double mu5[] = {0.0, 1.0, 2.0, 4.0}, pi5[] = {0.05, 0.15, 0.1, 0.2};
  for (int k = 0; k < 4; ++k) {
    CHECK(e5.mixture_params[k].location == mu5[k]);
    CHECK(e5.mixture_params[k].weight == pi5[k]);
  }
  CHECK(error_law(ErrorTag::E1).mixture_params.empty());
}

TEST_CASE("density values at zero") {
  CHECK(make_error_law(ErrorTag::E1).pdf(0.0) == doctest::Approx(0.398942).epsilon(1e-6));
  CHECK(make_error_law(ErrorTag::E4).pdf(0.0) == doctest::Approx(oracle::e4_density(0.0)).epsilon(1e-13));
  CHECK(make_error_law(ErrorTag::E4).pdf(0.0) == doctest::Approx(0.13694).epsilon(1e-4));
  CHECK(make_error_law(ErrorTag::E5).pdf(0.0) == doctest::Approx(0.12334).epsilon(1e-4));
  CHECK(make_error_law(ErrorTag::E3).pdf(0.0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(make_error_law(ErrorTag::E2).pdf(0.0) == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-13));
}

TEST_CASE("all laws are symmetric and normalized") {
  for (auto tag : kAllErrorTags) {
    const auto d = make_error_law(tag);
    CHECK(normalization(d) == doctest::Approx(1.0).epsilon(1e-8));
    for (double x : {0.3, 1.1, 2.7, 5.0}) CHECK(d.log_pdf(x) == d.log_pdf(-x));
  }
}

TEST_CASE("E3 score is zero on the interior and flagged non-smooth") {
  const auto e3 = make_error_law(ErrorTag::E3);
  CHECK(e3.score(1.2) == 0.0);
  CHECK_FALSE(has_smooth_score(ErrorTag::E3));
  CHECK(has_smooth_score(ErrorTag::E4));
}

TEST_CASE("smooth scores match finite differences") {
  for (auto tag : {ErrorTag::E1, ErrorTag::E2, ErrorTag::E4, ErrorTag::E5}) {
    const auto d = make_error_law(tag);
    for (double x : {-4.0, -1.3, 0.2, 0.9, 3.3}) {
      const double fd = -oracle::central_difference([&](double t) { return d.log_pdf(t); }, x);
      CHECK(std::abs(d.score(x) - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("tag parsing") {
  CHECK(parse_error_tag("e4") == ErrorTag::E4);
  CHECK(to_string(ErrorTag::E2) == "E2");
  try {
    parse_error_tag("E9");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
  }
}

TEST_CASE("sample moments") {
  Rng rng(42);
  const auto e1 = sample_errors(make_error_law(ErrorTag::E1), 100000, rng);
  CHECK(std::abs(variance(e1) - 1.0) < 0.02);
  const auto e3 = sample_errors(make_error_law(ErrorTag::E3), 100000, rng);
  CHECK(std::abs(variance(e3) - 3.0) < 0.06);
}

TEST_CASE("E4 sample matches the quadrature CDF") {
  Rng rng(7);
  const auto law = make_error_law(ErrorTag::E4);
  const auto draws = sample_errors(law, 100000, rng);
  // CDF by numeric integration of the density formula.
  const auto cdf = [](double x) {
    return oracle::dense_grid([](double t) { return oracle::e4_density(t); }, -14.0, x, 4000);
  };
  CHECK(ks_statistic(draws, cdf) < 0.01);
}

TEST_CASE("samples are symmetric about zero") {
  Rng rng(11);
  const int n = 100000;
  for (auto tag : kAllErrorTags) {
    const auto draws = sample_errors(make_error_law(tag), n, rng);
    std::vector<double> pos, neg;
    for (double x : draws) (x > 0.0 ? pos : neg).push_back(std::abs(x));
    // Sign test: binomial(n, 1/2) count of positives.
    CHECK(std::abs(static_cast<double>(pos.size()) - 0.5 * n) < 4.0 * std::sqrt(0.25 * n));
    // Magnitudes of positive and negative draws share one law.
    const double na = static_cast<double>(pos.size()), nb = static_cast<double>(neg.size());
    CHECK(ks_two_sample(pos, neg) < 1.628 * std::sqrt((na + nb) / (na * nb)));
  }
}

TEST_CASE("mixture sampling reproduces the density (chi-square)") {
  for (auto tag : {ErrorTag::E4, ErrorTag::E5}) {
    const auto law = make_error_law(tag);
    const int n = 100000, bins = 40, repeats = 8;
    const double lo = -8.0, hi = 8.0, width = (hi - lo) / bins;
    std::vector<double> expected(bins);
    for (int b = 0; b < bins; ++b)
      expected[b] = n * integrate([&](double x) { return law.pdf(x); }, lo + b * width, lo + (b + 1) * width, {});
    double chi2_sum = 0.0;
    for (int r = 0; r < repeats; ++r) {
      Rng rng(300 + r);
      std::vector<int> counts(bins, 0);
      for (int i = 0; i < n; ++i) {
        const double x = law.sample(rng);
        if (x >= lo && x < hi) counts[static_cast<int>((x - lo) / width)]++;
      }
      for (int b = 0; b < bins; ++b) chi2_sum += (counts[b] - expected[b]) * (counts[b] - expected[b]) / expected[b];
    }
    // Average of `repeats` chi-square(39) statistics: mean 39, sd sqrt(78 / repeats).
    CHECK(std::abs(chi2_sum / repeats - 39.0) < 4.0 * std::sqrt(78.0 / repeats));
  }
}

TEST_CASE("E4 and E5 mode counts") {
  auto modes = [](const SymmetricDensity& d) {
    int count = 0;
    const double h = 1e-3;
    for (double x = -8.0; x < 8.0; x += h)
      if (d.pdf(x) > d.pdf(x - h) && d.pdf(x) > d.pdf(x + h)) ++count;
    return count;
  };
  // Density maxima, counted on the whole line; both laws are symmetric.
  const int m4 = modes(make_error_law(ErrorTag::E4));
  const int m5 = modes(make_error_law(ErrorTag::E5));
  CHECK(m4 == 2);
  CHECK(m5 == 3);
}

}
