#include "symbayes/baselines.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace symbayes {
namespace {

struct Profile {
  Eigen::VectorXd theta;
  double sigma2 = 0.0;
  double value = -kInf;
};

void require_single_effect(const MixedDataset& data) {
  require(data.effect_dim() == 1, ErrorKind::InvalidArgument,
          "Gaussian baselines support one random-effect covariate (q = 1)");
}

// Solves the GLS system for H_i = I + ratio * w_i w_i^T and accumulates the
// pieces of the profile likelihood.
struct GlsPieces {
  Eigen::VectorXd theta;
  Eigen::MatrixXd information;  // sum Z_i H_i^{-1} Z_i^T
  double rss = 0.0;             // sum r_i^T H_i^{-1} r_i
  double log_det_h = 0.0;
};

GlsPieces gls_pieces(const MixedDataset& data, double ratio) {
  const Eigen::Index p = data.dim();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  GlsPieces out;
  std::vector<double> shrink(data.groups());
  for (Eigen::Index i = 0; i < data.groups(); ++i) {
    const Eigen::VectorXd w = data.random(i).row(0).transpose();
    const double ww = w.squaredNorm();
    shrink[i] = ratio / (1.0 + ratio * ww);
    out.log_det_h += std::log1p(ratio * ww);
    const Eigen::MatrixXd& z = data.fixed(i);
    const Eigen::VectorXd zw = z * w;
    a += z * z.transpose() - shrink[i] * zw * zw.transpose();
    const Eigen::VectorXd x = data.response(i);
    b += z * x - shrink[i] * zw * w.dot(x);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
    throw Error(ErrorKind::SingularDesign, "GLS information matrix is singular");
  }
  out.theta = ldlt.solve(b);
  out.information = a;
  for (Eigen::Index i = 0; i < data.groups(); ++i) {
    const Eigen::VectorXd r = data.residual(i, out.theta);
    const Eigen::VectorXd w = data.random(i).row(0).transpose();
    const double rw = r.dot(w);
    out.rss += r.squaredNorm() - shrink[i] * rw * rw;
  }
  return out;
}

Profile profile(const MixedDataset& data, double ratio, bool reml) {
  const GlsPieces g = gls_pieces(data, ratio);
  const double n_obs = static_cast<double>(data.observations());
  const double p = static_cast<double>(data.dim());
  const double log2pi = std::log(2.0 * std::numbers::pi);
  Profile out;
  out.theta = g.theta;
  if (reml) {
    const double dof = n_obs - p;
    out.sigma2 = g.rss / dof;
    const double log_det_a = g.information.ldlt().vectorD().array().log().sum();
    out.value = -0.5 * (dof * (log2pi + std::log(out.sigma2) + 1.0) + g.log_det_h + log_det_a);
  } else {
    out.sigma2 = g.rss / n_obs;
    out.value = -0.5 * (n_obs * (log2pi + std::log(out.sigma2) + 1.0) + g.log_det_h);
  }
  return out;
}

}  // namespace

Eigen::VectorXd gls_mixed(const MixedDataset& data, double error_variance, double random_effect_variance) {
  require_single_effect(data);
  require(error_variance > 0.0 && random_effect_variance >= 0.0, ErrorKind::InvalidArgument,
          "variance components must satisfy sigma_eps^2 > 0, sigma_b^2 >= 0");
  return gls_pieces(data, random_effect_variance / error_variance).theta;
}

double gaussian_loglik_mixed(const MixedDataset& data, const Eigen::VectorXd& theta, double error_variance,
                             double random_effect_variance) {
  require_single_effect(data);
  const double ratio = random_effect_variance / error_variance;
  double value = 0.0;
  const double m = static_cast<double>(data.group_size());
  for (Eigen::Index i = 0; i < data.groups(); ++i) {
    const Eigen::VectorXd w = data.random(i).row(0).transpose();
    const double ww = w.squaredNorm();
    const Eigen::VectorXd r = data.residual(i, theta);
    const double rw = r.dot(w);
    const double quad = (r.squaredNorm() - ratio / (1.0 + ratio * ww) * rw * rw) / error_variance;
    value += -0.5 * (m * std::log(2.0 * std::numbers::pi * error_variance) + std::log1p(ratio * ww) + quad);
  }
  return value;
}

FrequentistFit gaussian_ml_mixed(const MixedDataset& data, const MlOptions& options) {
  require_single_effect(data);
  auto at_log_ratio = [&](double t) { return profile(data, std::exp(t), options.reml); };

  FrequentistFit fit;
  int evaluations = 0;

  // Coarse grid over log lambda, plus the lambda = 0 boundary.
  constexpr double kLo = -20.0, kHi = 10.0;
  constexpr int kGrid = 61;
  Profile boundary = profile(data, 0.0, options.reml);
  double best_t = kLo;
  Profile best = at_log_ratio(kLo);
  for (int k = 1; k < kGrid; ++k) {
    const double t = kLo + (kHi - kLo) * k / (kGrid - 1);
    Profile cand = at_log_ratio(t);
    ++evaluations;
    if (cand.value > best.value) {
      best = std::move(cand);
      best_t = t;
    }
  }
  fit.trace.push_back(std::max(best.value, boundary.value));

  const double step = (kHi - kLo) / (kGrid - 1);
  double lambda = std::exp(best_t);
  double gradient = 0.0;
  if (boundary.value >= best.value && best_t == kLo) {
    // Maximum at sigma_b^2 = 0.
    best = boundary;
    lambda = 0.0;
  } else {
    // Golden section inside the bracketing grid cell pair.
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::max(kLo, best_t - step), b = std::min(kHi, best_t + step);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = at_log_ratio(c).value, fd = at_log_ratio(d).value;
    int iter = 0;
    while (b - a > 1e-9 && iter < options.max_iterations) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = at_log_ratio(c).value;
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = at_log_ratio(d).value;
      }
      ++iter;
      const double current = std::max({fc, fd, fit.trace.back()});
      fit.trace.push_back(current);
    }
    evaluations += iter;
    double t = fc > fd ? c : d;
    Profile current = at_log_ratio(t);
    if (current.value < best.value) {
      current = best;
      t = best_t;
    }
    // Newton polish on log lambda with central differences.
    constexpr double h = 1e-4;
    for (int k = 0; k < 20; ++k) {
      const double fp = at_log_ratio(t + h).value;
      const double fm = at_log_ratio(t - h).value;
      gradient = (fp - fm) / (2.0 * h);
      const double curvature = (fp - 2.0 * current.value + fm) / (h * h);
      if (!(curvature < 0.0) || std::abs(gradient) < 1e-9) break;
      const double t_new = t - gradient / curvature;
      Profile cand = at_log_ratio(t_new);
      if (!(cand.value >= current.value)) break;
      const double gain = cand.value - current.value;
      t = t_new;
      current = std::move(cand);
      fit.trace.push_back(current.value);
      if (gain < options.tolerance) break;
    }
    {
      const double fp = at_log_ratio(t + h).value;
      const double fm = at_log_ratio(t - h).value;
      gradient = (fp - fm) / (2.0 * h);
    }
    evaluations += 2;
    best = std::move(current);
    lambda = std::exp(t);
    if (boundary.value > best.value) {
      best = boundary;
      lambda = 0.0;
      gradient = 0.0;
    } else if (t >= kHi - 1e-6) {
      std::ostringstream os;
      os << "variance ratio diverged (log lambda reached " << t << "); trace size " << fit.trace.size();
      throw Error(ErrorKind::OptimizerFailure, os.str());
    }
  }

  fit.theta = best.theta;
  fit.error_variance = best.sigma2;
  fit.random_effect_variance = lambda * best.sigma2;
  fit.loglik = best.value;
  fit.iterations = evaluations;
  fit.gradient_norm = std::abs(gradient);
  fit.converged = fit.gradient_norm < 1e-5 * std::max(1.0, std::abs(best.value));
  if (!fit.converged) {
    std::ostringstream os;
    os << "profile gradient " << fit.gradient_norm << " after " << evaluations << " evaluations";
    throw Error(ErrorKind::OptimizerFailure, os.str());
  }
  if (fit.trace.empty() || fit.trace.back() < best.value) fit.trace.push_back(best.value);
  return fit;
}

}  // namespace symbayes
