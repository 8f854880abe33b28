#include "symbayes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "symbayes/error.hpp"
#include "symbayes/stats.hpp"

namespace symbayes {
namespace {

double expect_under(const SymmetricDensity& eta0, const std::function<double(double)>& g,
                    const QuadratureScheme& scheme, const std::vector<double>& extra_breaks) {
  const Range r = eta0.effective_range();
  double lo = r.lo, hi = r.hi;
  if (std::isfinite(scheme.truncation_radius)) {
    lo = std::max(lo, -scheme.truncation_radius);
    hi = std::min(hi, scheme.truncation_radius);
  }
  std::vector<double> breaks = eta0.breakpoints();
  breaks.insert(breaks.end(), extra_breaks.begin(), extra_breaks.end());
  return integrate(
      [&](double x) {
        const double p = eta0.pdf(x);
        return p > 0.0 ? g(x) * p : 0.0;
      },
      lo, hi, breaks, scheme);
}

Eigen::MatrixXd invert_information(const Eigen::MatrixXd& v) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(v);
  const auto d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff())) {
    throw Error(ErrorKind::SingularInformation, "V_n is singular");
  }
  return ldlt.solve(Eigen::MatrixXd::Identity(v.rows(), v.cols()));
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

// Residual offsets d_i = (theta - theta0)^T Z_i, grouped by value.
std::map<double, int> offset_counts(const Eigen::MatrixXd& design, const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& theta0) {
  std::map<double, int> counts;
  const Eigen::VectorXd d = design * (theta - theta0);
  for (Eigen::Index i = 0; i < d.size(); ++i) counts[d[i]]++;
  return counts;
}

}  // namespace

double efficient_information(const SymmetricDensity& eta, const SymmetricDensity& eta0,
                             const QuadratureScheme& scheme) {
  return expect_under(eta0, [&](double x) { return eta.score(x) * eta0.score(x); }, scheme, eta.breakpoints());
}

double score_distance_sq(const SymmetricDensity& eta, const SymmetricDensity& eta0,
                         const QuadratureScheme& scheme) {
  return expect_under(
      eta0,
      [&](double x) {
        const double d = eta.score(x) - eta0.score(x);
        return d * d;
      },
      scheme, eta.breakpoints());
}

FisherInfo fisher_regression(const SymmetricDensity& eta, const SymmetricDensity& eta0,
                             const Eigen::MatrixXd& gram, const QuadratureScheme& scheme) {
  FisherInfo info;
  info.v_eta = efficient_information(eta, eta0, scheme);
  info.information = *info.v_eta * gram;
  info.information_se = Eigen::MatrixXd::Zero(gram.rows(), gram.cols());
  info.eigenvalues = symmetric_eigen_range(info.information);
  return info;
}

FisherInfo fisher_mixed(const Density& f, const RandomEffectLaw& g, const Density& f0,
                        const RandomEffectLaw& g0, const MixedDataset& design, Rng& rng,
                        const FisherMcOptions& options) {
  require(options.draws >= 2, ErrorKind::InvalidArgument, "need at least two Monte Carlo draws");
  FisherInfo info;
  const Eigen::Index n = design.groups(), m = design.group_size(), p = design.dim();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::MatrixXd& w = design.random(i);
    auto it = std::find_if(info.patterns.begin(), info.patterns.end(),
                           [&](const Eigen::MatrixXd& pat) { return same_matrix(pat, w); });
    info.group_pattern.push_back(static_cast<std::size_t>(it - info.patterns.begin()));
    if (it == info.patterns.end()) info.patterns.push_back(w);
  }

  info.information = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd variance = Eigen::MatrixXd::Zero(p, p);
  const double k = static_cast<double>(options.draws);
  for (std::size_t pat = 0; pat < info.patterns.size(); ++pat) {
    const Eigen::MatrixXd& w = info.patterns[pat];
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < n; ++i)
      if (info.group_pattern[i] == pat) members.push_back(i);

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m, m), sum_sq = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd a_sum = Eigen::MatrixXd::Zero(p, p), a_sq = Eigen::MatrixXd::Zero(p, p);
    for (int d = 0; d < options.draws; ++d) {
      const Eigen::VectorXd b = g0.sample(rng);
      Eigen::VectorXd y = w.transpose() * b;
      for (Eigen::Index j = 0; j < m; ++j) y[j] += f0.sample(rng);
      const Eigen::VectorXd s = psi_score(y, w, f, g, options.integrator);
      const Eigen::VectorXd s0 = psi_score(y, w, f0, g0, options.integrator);
      const Eigen::MatrixXd outer = s * s0.transpose();
      sum += outer;
      sum_sq += outer.cwiseProduct(outer);
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
      for (Eigen::Index i : members) a += design.fixed(i) * outer * design.fixed(i).transpose();
      a /= static_cast<double>(n);
      a_sum += a;
      a_sq += a.cwiseProduct(a);
    }
    const Eigen::MatrixXd mean = sum / k;
    info.v_eta_of_w.push_back(mean);
    info.v_eta_of_w_se.push_back(((sum_sq / k - mean.cwiseProduct(mean)) / (k - 1.0)).cwiseMax(0.0).cwiseSqrt());
    const Eigen::MatrixXd a_mean = a_sum / k;
    info.information += a_mean;
    variance += ((a_sq / k - a_mean.cwiseProduct(a_mean)) / (k - 1.0)).cwiseMax(0.0);
  }
  info.information = 0.5 * (info.information + info.information.transpose()).eval();
  info.information_se = variance.cwiseSqrt();
  info.eigenvalues = symmetric_eigen_range(info.information);
  const double scale = info.information.cwiseAbs().maxCoeff();
  if (info.information_se.maxCoeff() > options.max_relative_se * scale) {
    throw Error(ErrorKind::InsufficientMcSize, "Monte Carlo SE of V_n is " +
                                                   std::to_string(info.information_se.maxCoeff()) +
                                                   " against entries of size " + std::to_string(scale));
  }
  return info;
}

Eigen::MatrixXd gaussian_mixed_information(const MixedDataset& design, double error_variance,
                                           const Eigen::MatrixXd& random_effect_covariance) {
  const Eigen::Index p = design.dim(), m = design.group_size();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < design.groups(); ++i) {
    const Eigen::MatrixXd& w = design.random(i);
    const Eigen::MatrixXd sigma =
        error_variance * Eigen::MatrixXd::Identity(m, m) + w.transpose() * random_effect_covariance * w;
    v += design.fixed(i) * sigma.ldlt().solve(design.fixed(i).transpose());
  }
  return v / static_cast<double>(design.groups());
}

Eigen::VectorXd delta_n(const RegressionDataset& data, const Eigen::VectorXd& theta0,
                        const SymmetricDensity& eta0, const FisherInfo& info) {
  const Eigen::VectorXd score = score_regression(data, theta0, eta0);
  return invert_information(info.information) * score / std::sqrt(static_cast<double>(data.size()));
}

Eigen::VectorXd delta_n(const MixedDataset& data, const Eigen::VectorXd& theta0, const Density& f0,
                        const RandomEffectLaw& g0, const FisherInfo& info, const PsiIntegrator& integrator) {
  const Eigen::VectorXd score = score_mixed(data, theta0, f0, g0, integrator);
  return invert_information(info.information) * score / std::sqrt(static_cast<double>(data.groups()));
}

std::vector<Eigen::VectorXd> h_grid(Eigen::Index p, double radius, int points_per_axis) {
  require(p >= 1 && points_per_axis >= 2 && radius >= 0.0, ErrorKind::InvalidArgument, "invalid h grid");
  std::vector<Eigen::VectorXd> out;
  std::vector<int> idx(p, 0);
  while (true) {
    Eigen::VectorXd h(p);
    for (Eigen::Index k = 0; k < p; ++k) h[k] = -radius + 2.0 * radius * idx[k] / (points_per_axis - 1);
    if (h.norm() <= radius * (1.0 + 1e-12)) out.push_back(h);
    Eigen::Index k = 0;
    while (k < p && ++idx[k] == points_per_axis) idx[k++] = 0;
    if (k == p) break;
  }
  return out;
}

std::vector<double> lan_remainder(const RegressionDataset& data, const SymmetricDensity& eta,
                                  const Eigen::VectorXd& theta0, const std::vector<Eigen::VectorXd>& grid,
                                  const FisherInfo& info) {
  const double root_n = std::sqrt(static_cast<double>(data.size()));
  const double base = loglik_regression(data, theta0, eta);
  require(std::isfinite(base), ErrorKind::OutOfSupport, "theta0 is outside the model support");
  const Eigen::VectorXd score = score_regression(data, theta0, eta);
  std::vector<double> out;
  out.reserve(grid.size());
  for (const auto& h : grid) {
    if (h.isZero(0.0)) {
      out.push_back(0.0);
      continue;
    }
    const double ll = loglik_regression(data, theta0 + h / root_n, eta);
    out.push_back(ll - base - h.dot(score) / root_n + 0.5 * h.dot(info.information * h));
  }
  return out;
}

KlBall kl_ball_membership(const Eigen::MatrixXd& design, const Eigen::VectorXd& theta,
                          const SymmetricDensity& eta, const Eigen::VectorXd& theta0,
                          const SymmetricDensity& eta0, double epsilon, double c2,
                          const QuadratureScheme& scheme) {
  require(epsilon >= 0.0 && c2 > 0.0, ErrorKind::InvalidArgument, "need epsilon >= 0 and C2 > 0");
  KlBall out;
  const bool same_law = eta.model_ptr() == eta0.model_ptr();
  for (const auto& [offset, count] : offset_counts(design, theta, theta0)) {
    if (same_law && offset == 0.0) continue;
    // Law of X_i - theta0^T Z_i under the candidate is eta shifted by the offset.
    const KlMoments km = kl_mean_and_variation(eta0, shifted(eta, offset), scheme);
    out.sum_k += count * km.mean;
    out.sum_v += count * km.variation;
  }
  const double n = static_cast<double>(design.rows());
  out.in_ball = out.sum_k <= n * epsilon * epsilon && out.sum_v <= c2 * n * epsilon * epsilon;
  return out;
}

double mean_hellinger(const Eigen::MatrixXd& design, const Eigen::VectorXd& theta, const SymmetricDensity& eta,
                      const Eigen::VectorXd& theta0, const SymmetricDensity& eta0,
                      const QuadratureScheme& scheme) {
  double total = 0.0;
  const bool same_law = eta.model_ptr() == eta0.model_ptr();
  for (const auto& [offset, count] : offset_counts(design, theta, theta0)) {
    if (same_law && offset == 0.0) continue;
    total += count * hellinger_sq(eta0, shifted(eta, offset), scheme);
  }
  return std::sqrt(total / static_cast<double>(design.rows()));
}

BvmDistance bvm_distance(const PosteriorChain& chain, Eigen::Index n, const Eigen::VectorXd& theta0,
                         const Eigen::VectorXd& delta, const Eigen::MatrixXd& information,
                         const std::vector<Eigen::VectorXd>& projections, double min_ess) {
  const Eigen::Index p = theta0.size();
  require(chain.theta.cols() == p && delta.size() == p && information.rows() == p, ErrorKind::InvalidArgument,
          "dimension mismatch between chain and reference");
  require(chain.theta.rows() >= 2, ErrorKind::UnreliableChain, "chain has fewer than two draws");
  const Eigen::MatrixXd cov = invert_information(information);
  const double root_n = std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXd local = (chain.theta.rowwise() - theta0.transpose()) * root_n;

  BvmDistance out;
  auto ks_against = [&](const Eigen::VectorXd& values, double center, double sd) {
    std::vector<double> v(values.data(), values.data() + values.size());
    const double ess = effective_sample_size(v);
    out.ess.push_back(ess);
    if (ess < min_ess) {
      throw Error(ErrorKind::UnreliableChain,
                  "effective sample size " + std::to_string(ess) + " below " + std::to_string(min_ess));
    }
    return ks_statistic(std::move(v), [=](double x) { return normal_cdf((x - center) / sd); });
  };
  for (Eigen::Index k = 0; k < p; ++k) {
    out.coordinate_ks.push_back(ks_against(local.col(k), delta[k], std::sqrt(cov(k, k))));
  }
  for (const auto& a : projections) {
    require(a.size() == p, ErrorKind::InvalidArgument, "projection dimension mismatch");
    out.projection_ks.push_back(ks_against(local * a, a.dot(delta), std::sqrt(a.dot(cov * a))));
  }
  return out;
}

}  // namespace symbayes
