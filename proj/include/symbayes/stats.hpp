#ifndef SYMBAYES_STATS_HPP
#define SYMBAYES_STATS_HPP

#include <functional>
#include <span>
#include <vector>

namespace symbayes {

double mean(std::span<const double> x);
// Unbiased sample variance.
double variance(std::span<const double> x);
double median(std::vector<double> x);

// sup_x |F_n(x) - F(x)| for the empirical CDF of `sample`.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
double ks_two_sample(std::vector<double> a, std::vector<double> b);

// Asymptotic Kolmogorov tail P(sqrt(n_eff) D > d sqrt(n_eff)) with the
// Stephens small-sample correction.
double ks_pvalue(double statistic, double effective_n);

// Geyer initial monotone sequence estimator. Returns a value in (0, n].
double effective_sample_size(std::span<const double> chain);

// Standard error of the mean from non-overlapping batch means.
double batch_means_se(std::span<const double> chain, int batches = 25);

}  // namespace symbayes

#endif  // SYMBAYES_STATS_HPP
