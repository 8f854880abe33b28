#include "symbayes/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "symbayes/error.hpp"

namespace symbayes {

double mean(std::span<const double> x) {
  require(!x.empty(), ErrorKind::InvalidArgument, "mean of empty sequence");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  require(x.size() >= 2, ErrorKind::InvalidArgument, "variance needs two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double median(std::vector<double> x) {
  require(!x.empty(), ErrorKind::InvalidArgument, "median of empty sequence");
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + mid, x.end());
  if (x.size() % 2 == 1) return x[mid];
  const double hi = x[mid];
  const double lo = *std::max_element(x.begin(), x.begin() + mid);
  return 0.5 * (lo + hi);
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  require(!sample.empty(), ErrorKind::InvalidArgument, "KS of empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::InvalidArgument, "KS of empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_pvalue(double statistic, double effective_n) {
  const double sn = std::sqrt(effective_n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * statistic;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  require(n >= 4, ErrorKind::InvalidArgument, "chain too short for ESS");
  const double m = mean(chain);
  std::vector<double> c(chain.begin(), chain.end());
  for (double& v : c) v -= m;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += c[t] * c[t + lag];
    return s / static_cast<double>(n);
  };
  const double gamma0 = autocov(0);
  if (gamma0 <= 0.0) return static_cast<double>(n);
  // Sum of paired autocorrelations Gamma_k = rho_{2k} + rho_{2k+1} while positive and monotone.
  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (autocov(2 * k) + autocov(2 * k + 1)) / gamma0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n));
}

double batch_means_se(std::span<const double> chain, int batches) {
  require(batches >= 2 && chain.size() >= static_cast<std::size_t>(batches), ErrorKind::InvalidArgument,
          "chain too short for batch means");
  const std::size_t len = chain.size() / static_cast<std::size_t>(batches);
  std::vector<double> means(batches);
  for (int b = 0; b < batches; ++b) means[b] = mean(chain.subspan(b * len, len));
  return std::sqrt(variance(means) / batches);
}

}  // namespace symbayes
