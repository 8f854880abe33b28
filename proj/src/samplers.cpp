#include "symbayes/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "symbayes/baselines.hpp"
#include "symbayes/csv.hpp"
#include "symbayes/error.hpp"
#include "symbayes/stats.hpp"

namespace symbayes {
namespace {

constexpr double kLocationTarget = 0.44;
constexpr double kBlockTarget = 0.3;

double robbins_monro_gain(long count) { return std::min(0.05, 1.0 / std::sqrt(static_cast<double>(count + 1))); }

Eigen::VectorXd draw_gaussian(const Eigen::MatrixXd& precision, const Eigen::VectorXd& linear, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "conditional precision of theta is not positive definite");
  }
  const Eigen::VectorXd mean = llt.solve(linear);
  Eigen::VectorXd eps(mean.size());
  for (Eigen::Index k = 0; k < eps.size(); ++k) eps[k] = std_normal(rng);
  return mean + llt.matrixU().solve(eps);
}

std::vector<double> kmeans_1d(const Eigen::VectorXd& values, int clusters, std::vector<int>& assignment) {
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> centers(clusters);
  for (int k = 0; k < clusters; ++k) {
    centers[k] = sorted[static_cast<std::size_t>((k + 0.5) / clusters * (sorted.size() - 1))];
  }
  assignment.assign(values.size(), 0);
  for (int iter = 0; iter < 50; ++iter) {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      int best = 0;
      for (int k = 1; k < clusters; ++k)
        if (std::abs(values[i] - centers[k]) < std::abs(values[i] - centers[best])) best = k;
      assignment[i] = best;
    }
    std::vector<double> sum(clusters, 0.0);
    std::vector<int> count(clusters, 0);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      sum[assignment[i]] += values[i];
      count[assignment[i]]++;
    }
    for (int k = 0; k < clusters; ++k)
      if (count[k] > 0) centers[k] = sum[k] / count[k];
  }
  return centers;
}

void check_finite(const Eigen::VectorXd& v, int iteration, const char* what) {
  if (!v.allFinite()) {
    throw Error(ErrorKind::NumericalFailure,
                std::string("non-finite ") + what + " at iteration " + std::to_string(iteration));
  }
}

std::vector<std::string> theta_names(Eigen::Index p) {
  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < p; ++k) names.push_back("theta" + std::to_string(k + 1));
  return names;
}

void finalize_ess(PosteriorChain& chain) {
  chain.ess.resize(chain.theta.cols());
  for (Eigen::Index k = 0; k < chain.theta.cols(); ++k) {
    const Eigen::VectorXd col = chain.theta.col(k);
    chain.ess[k] = col.size() >= 4 ? effective_sample_size({col.data(), static_cast<std::size_t>(col.size())})
                                   : static_cast<double>(col.size());
  }
}

}  // namespace

void SamplerConfig::validate() const {
  require(iterations > burn_in && burn_in >= 0, ErrorKind::InvalidArgument, "need iterations > burn_in >= 0");
  require(thin >= 1, ErrorKind::InvalidArgument, "thin must be at least 1");
  require(theta_prior_variance > 0.0, ErrorKind::InvalidArgument, "theta prior variance must be positive");
  require(error_variance_prior.shape > 0.0 && error_variance_prior.rate > 0.0 &&
              random_effect_variance_prior.shape > 0.0 && random_effect_variance_prior.rate > 0.0,
          ErrorKind::InvalidArgument, "inverse-gamma hyperparameters must be positive");
  require(atom_location_step > 0.0 && atom_scale_step > 0.0 && theta_step > 0.0 && coefficient_step > 0.0,
          ErrorKind::InvalidArgument, "proposal scales must be positive");
  require(coefficient_block >= 1 && dpm_snapshot_every >= 1 && initial_clusters >= 1,
          ErrorKind::InvalidArgument, "block sizes must be positive");
  require(!fixed_error_variance || *fixed_error_variance > 0.0, ErrorKind::InvalidArgument,
          "fixed error variance must be positive");
  dpm.validate();
  series.validate();
}

Eigen::VectorXd PosteriorChain::posterior_sd() const {
  Eigen::VectorXd sd(theta.cols());
  for (Eigen::Index k = 0; k < theta.cols(); ++k) {
    const Eigen::VectorXd col = theta.col(k);
    sd[k] = std::sqrt(variance({col.data(), static_cast<std::size_t>(col.size())}));
  }
  return sd;
}

SymmetricDensity PosteriorChain::posterior_predictive_density() const {
  require(!dpm_snapshots.empty(), ErrorKind::InvalidArgument, "chain holds no DPM snapshots");
  std::vector<NormalComponent> atoms;
  const double share = 1.0 / static_cast<double>(dpm_snapshots.size());
  for (const auto& draw : dpm_snapshots)
    for (const auto& a : draw.atoms)
      if (a.weight * share > 1e-12) atoms.push_back({a.weight * share, a.location, a.scale});
  return mirrored_normal_mixture(atoms);
}

void write_chain_csv(std::ostream& out, const PosteriorChain& chain) {
  std::vector<std::string> header{"draw"};
  header.insert(header.end(), chain.theta_names.begin(), chain.theta_names.end());
  for (const auto& [name, values] : chain.hyper) header.push_back(name);
  CsvTable table(header);
  for (Eigen::Index d = 0; d < chain.theta.rows(); ++d) {
    std::vector<double> row{static_cast<double>(d)};
    for (Eigen::Index k = 0; k < chain.theta.cols(); ++k) row.push_back(chain.theta(d, k));
    for (const auto& [name, values] : chain.hyper) row.push_back(values.at(d));
    table.add_row(row);
  }
  table.write(out);
}

PosteriorChain read_chain_csv(std::istream& in) {
  const CsvTable table = CsvTable::read(in);
  PosteriorChain chain;
  const auto& header = table.header();
  require(!header.empty() && header[0] == "draw", ErrorKind::IoError, "chain CSV must start with draw");
  std::vector<std::size_t> theta_cols;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].rfind("theta", 0) == 0) {
      chain.theta_names.push_back(header[c]);
      theta_cols.push_back(c);
    } else {
      chain.hyper[header[c]].reserve(table.rows());
    }
  }
  chain.theta.resize(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(theta_cols.size()));
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t k = 0; k < theta_cols.size(); ++k) chain.theta(r, k) = table.at(r, theta_cols[k]);
    for (std::size_t c = 1; c < header.size(); ++c)
      if (header[c].rfind("theta", 0) != 0) chain.hyper[header[c]].push_back(table.at(r, c));
  }
  finalize_ess(chain);
  return chain;
}

// --- GibbsSampler -------------------------------------------------------------

GibbsSampler::GibbsSampler(const MixedDataset& data, const SamplerConfig& config, ErrorModel model, Rng& rng)
    : config_(config), model_(model), has_random_effects_(true) {
  config_.validate();
  require(data.effect_dim() == 1, ErrorKind::InvalidArgument, "sampler supports one random-effect covariate");
  const Eigen::Index n = data.groups(), m = data.group_size(), p = data.dim();
  x_.resize(n * m);
  z_.resize(n * m, p);
  w_.resize(n * m);
  group_.resize(n * m);
  groups_ = n;
  members_.assign(n, {});
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index o = i * m + j;
      x_[o] = data.responses()(i, j);
      z_.row(o) = data.fixed(i).col(j).transpose();
      w_[o] = data.random(i)(0, j);
      group_[o] = i;
      members_[i].push_back(o);
    }
  }
  initialize(rng);
}

GibbsSampler::GibbsSampler(const RegressionDataset& data, const SamplerConfig& config, ErrorModel model, Rng& rng)
    : config_(config), model_(model), has_random_effects_(false) {
  config_.validate();
  x_ = data.responses();
  z_ = data.covariates();
  w_ = Eigen::VectorXd::Zero(x_.size());
  group_.assign(x_.size(), 0);
  groups_ = 0;
  initialize(rng);
}

void GibbsSampler::initialize(Rng& rng) {
  const Eigen::Index n_obs = x_.size();
  theta_ = least_squares(z_, x_);
  Eigen::VectorXd resid = x_ - z_ * theta_;
  b_ = Eigen::VectorXd::Zero(groups_);
  if (has_random_effects_) {
    for (Eigen::Index i = 0; i < groups_; ++i) {
      double num = 0.0, den = 0.0;
      for (Eigen::Index o : members_[i]) {
        num += w_[o] * resid[o];
        den += w_[o] * w_[o];
      }
      b_[i] = den > 0.0 ? num / den : 0.0;
    }
    sigma_b2_ = std::max(0.05, b_.squaredNorm() / static_cast<double>(groups_));
    for (Eigen::Index o = 0; o < n_obs; ++o) resid[o] -= w_[o] * b_[group_[o]];
  }
  sigma_e2_ = config_.fixed_error_variance.value_or(std::max(1e-6, resid.squaredNorm() / n_obs));

  log_location_step_ = std::log(config_.atom_location_step);
  log_scale_step_ = std::log(config_.atom_scale_step);
  label_.assign(n_obs, 0);
  sign_.assign(n_obs, 1);
  if (model_ != ErrorModel::Dpm) return;

  const DpmSpec& spec = config_.dpm;
  const int clusters = std::min({spec.truncation, config_.initial_clusters, static_cast<int>(n_obs)});
  std::vector<int> assignment;
  const std::vector<double> centers = kmeans_1d(resid, clusters, assignment);
  std::vector<double> sum(clusters, 0.0), sq(clusters, 0.0);
  std::vector<int> count(clusters, 0);
  for (Eigen::Index o = 0; o < n_obs; ++o) {
    const int k = assignment[o];
    sum[k] += resid[o];
    sq[k] += resid[o] * resid[o];
    count[k]++;
  }
  atoms_.clear();
  double total = 0.0;
  for (int k = 0; k < spec.truncation; ++k) {
    if (k < clusters) {
      const double mu = count[k] > 0 ? sum[k] / count[k] : centers[k];
      const double var = count[k] > 1 ? sq[k] / count[k] - mu * mu : 1.0;
      atoms_.push_back({count[k] + 0.01, std::clamp(mu, -spec.location_bound, spec.location_bound),
                        std::clamp(std::sqrt(std::max(var, 0.0)), spec.scale_lo, spec.scale_hi)});
    } else {
      const auto [loc, sc] = spec.base_sample(rng);
      atoms_.push_back({0.01, loc, sc});
    }
    total += atoms_.back().weight;
  }
  for (auto& a : atoms_) a.weight /= total;
  for (Eigen::Index o = 0; o < n_obs; ++o) label_[o] = assignment[o];
}

double GibbsSampler::obs_mean_shift(Eigen::Index o) const {
  if (model_ == ErrorModel::Gaussian) return 0.0;
  return sign_[o] * atoms_[label_[o]].location;
}

double GibbsSampler::obs_variance(Eigen::Index o) const {
  if (model_ == ErrorModel::Gaussian) return sigma_e2_;
  const double s = atoms_[label_[o]].scale;
  return s * s;
}

void GibbsSampler::update_labels(Rng& rng) {
  const std::size_t t = atoms_.size();
  scratch_.resize(2 * t);
  std::vector<double> log_w(t), inv_var(t);
  for (std::size_t k = 0; k < t; ++k) {
    log_w[k] = atoms_[k].weight > 0.0 ? std::log(atoms_[k].weight) - std::log(atoms_[k].scale) : -kInf;
    inv_var[k] = 1.0 / (atoms_[k].scale * atoms_[k].scale);
  }
  for (Eigen::Index o = 0; o < x_.size(); ++o) {
    const double r = x_[o] - z_.row(o).dot(theta_) - w_[o] * (has_random_effects_ ? b_[group_[o]] : 0.0);
    double m = -kInf;
    for (std::size_t k = 0; k < t; ++k) {
      const double dp = r - atoms_[k].location;
      const double dm = r + atoms_[k].location;
      scratch_[2 * k] = log_w[k] - 0.5 * dp * dp * inv_var[k];
      scratch_[2 * k + 1] = log_w[k] - 0.5 * dm * dm * inv_var[k];
      m = std::max({m, scratch_[2 * k], scratch_[2 * k + 1]});
    }
    double total = 0.0;
    for (double& v : scratch_) {
      v = std::exp(v - m);
      total += v;
    }
    double u = uniform01(rng) * total;
    std::size_t pick = 2 * t - 1;
    for (std::size_t c = 0; c < 2 * t; ++c) {
      if (u < scratch_[c]) {
        pick = c;
        break;
      }
      u -= scratch_[c];
    }
    label_[o] = static_cast<int>(pick / 2);
    sign_[o] = (pick % 2 == 0) ? 1 : -1;
  }
}

void GibbsSampler::update_weights(Rng& rng) {
  const int t = static_cast<int>(atoms_.size());
  std::vector<double> count(t, 0.0);
  for (int k : label_) count[k] += 1.0;
  double tail = std::accumulate(count.begin(), count.end(), 0.0);
  double remaining = 1.0;
  for (int k = 0; k < t; ++k) {
    tail -= count[k];
    const double v = (k + 1 == t) ? 1.0 : beta_draw(rng, 1.0 + count[k], config_.dpm.precision + tail);
    atoms_[k].weight = remaining * v;
    remaining -= atoms_[k].weight;
    remaining = std::max(remaining, 0.0);
  }
}

void GibbsSampler::update_atoms(Rng& rng, bool adapting) {
  const DpmSpec& spec = config_.dpm;
  const std::size_t t = atoms_.size();
  std::vector<double> cnt(t, 0.0), s1(t, 0.0), s2(t, 0.0);
  for (Eigen::Index o = 0; o < x_.size(); ++o) {
    const double r = x_[o] - z_.row(o).dot(theta_) - w_[o] * (has_random_effects_ ? b_[group_[o]] : 0.0);
    const double u = sign_[o] * r;
    const int k = label_[o];
    cnt[k] += 1.0;
    s1[k] += u;
    s2[k] += u * u;
  }
  for (std::size_t k = 0; k < t; ++k) {
    DpmAtom& a = atoms_[k];
    if (cnt[k] == 0.0) {
      const auto [loc, sc] = spec.base_sample(rng);
      a.location = loc;
      a.scale = sc;
      continue;
    }
    auto log_target = [&](double loc, double sc) {
      const double prior = spec.base_log_density(loc, sc);
      if (prior == -kInf) return -kInf;
      return prior - cnt[k] * std::log(sc) - (s2[k] - 2.0 * loc * s1[k] + cnt[k] * loc * loc) / (2.0 * sc * sc);
    };
    const double current = log_target(a.location, a.scale);
    // Location: proposal scale proportional to sigma / sqrt(count), fixed during the move.
    {
      const double step = std::exp(log_location_step_) * a.scale / std::sqrt(cnt[k]);
      const double prop = a.location + step * std_normal(rng);
      const double lp = log_target(prop, a.scale);
      const bool accept = std::log(uniform01(rng)) < lp - current;
      if (accept) a.location = prop;
      ++location_tries_;
      location_accepts_ += accept;
      if (adapting) log_location_step_ += robbins_monro_gain(adapt_count_) * ((accept ? 1.0 : 0.0) - kLocationTarget);
    }
    // Scale: random walk on log sigma; the Jacobian adds log sigma to the target.
    {
      const double here = log_target(a.location, a.scale) + std::log(a.scale);
      const double step = std::exp(log_scale_step_) / std::sqrt(2.0 * cnt[k]);
      const double prop = a.scale * std::exp(step * std_normal(rng));
      const double lp = log_target(a.location, prop) + std::log(prop);
      const bool accept = std::log(uniform01(rng)) < lp - here;
      if (accept) a.scale = prop;
      ++scale_tries_;
      scale_accepts_ += accept;
      if (adapting) log_scale_step_ += robbins_monro_gain(adapt_count_) * ((accept ? 1.0 : 0.0) - kLocationTarget);
    }
    if (adapting) ++adapt_count_;
  }
}

void GibbsSampler::update_theta(Rng& rng) {
  const Eigen::Index p = z_.cols();
  const double tau2 = config_.theta_prior_variance;
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(p, p) / tau2;
  Eigen::VectorXd linear = Eigen::VectorXd::Constant(p, config_.theta_prior_mean / tau2);
  if (model_ == ErrorModel::Gaussian) {
    Eigen::VectorXd y = x_;
    if (has_random_effects_)
      for (Eigen::Index o = 0; o < x_.size(); ++o) y[o] -= w_[o] * b_[group_[o]];
    precision.noalias() += z_.transpose() * z_ / sigma_e2_;
    linear.noalias() += z_.transpose() * y / sigma_e2_;
  } else {
    for (Eigen::Index o = 0; o < x_.size(); ++o) {
      const double inv_v = 1.0 / obs_variance(o);
      const double y = x_[o] - (has_random_effects_ ? w_[o] * b_[group_[o]] : 0.0) - obs_mean_shift(o);
      precision.noalias() += inv_v * z_.row(o).transpose() * z_.row(o);
      linear.noalias() += (inv_v * y) * z_.row(o).transpose();
    }
  }
  theta_ = draw_gaussian(precision, linear, rng);
}

void GibbsSampler::update_random_effects(Rng& rng) {
  for (Eigen::Index i = 0; i < groups_; ++i) {
    double precision = 1.0 / sigma_b2_;
    double linear = 0.0;
    for (Eigen::Index o : members_[i]) {
      const double inv_v = 1.0 / obs_variance(o);
      precision += w_[o] * w_[o] * inv_v;
      linear += w_[o] * inv_v * (x_[o] - z_.row(o).dot(theta_) - obs_mean_shift(o));
    }
    b_[i] = linear / precision + std_normal(rng) / std::sqrt(precision);
  }
}

void GibbsSampler::update_variances(Rng& rng) {
  if (has_random_effects_) {
    const auto& prior = config_.random_effect_variance_prior;
    sigma_b2_ = inverse_gamma_draw(rng, prior.shape + 0.5 * static_cast<double>(groups_),
                                   prior.rate + 0.5 * b_.squaredNorm());
  }
  if (model_ == ErrorModel::Gaussian && !config_.fixed_error_variance) {
    double ssr = 0.0;
    for (Eigen::Index o = 0; o < x_.size(); ++o) {
      const double r = x_[o] - z_.row(o).dot(theta_) - (has_random_effects_ ? w_[o] * b_[group_[o]] : 0.0);
      ssr += r * r;
    }
    const auto& prior = config_.error_variance_prior;
    sigma_e2_ = inverse_gamma_draw(rng, prior.shape + 0.5 * static_cast<double>(x_.size()), prior.rate + 0.5 * ssr);
  }
}

void GibbsSampler::sweep(Rng& rng, bool adapting) {
  if (model_ == ErrorModel::Dpm) {
    update_labels(rng);
    update_weights(rng);
    update_atoms(rng, adapting);
  }
  update_theta(rng);
  if (has_random_effects_) update_random_effects(rng);
  update_variances(rng);
}

void GibbsSampler::draw_from_prior(Rng& rng) {
  const double sd = std::sqrt(config_.theta_prior_variance);
  for (Eigen::Index k = 0; k < theta_.size(); ++k) theta_[k] = config_.theta_prior_mean + sd * std_normal(rng);
  if (has_random_effects_) {
    const auto& prior = config_.random_effect_variance_prior;
    sigma_b2_ = inverse_gamma_draw(rng, prior.shape, prior.rate);
    for (Eigen::Index i = 0; i < groups_; ++i) b_[i] = std::sqrt(sigma_b2_) * std_normal(rng);
  }
  if (model_ == ErrorModel::Gaussian) {
    if (!config_.fixed_error_variance) {
      sigma_e2_ = inverse_gamma_draw(rng, config_.error_variance_prior.shape, config_.error_variance_prior.rate);
    }
    return;
  }
  atoms_ = dpm_prior_draw(config_.dpm, rng).atoms;
  for (Eigen::Index o = 0; o < x_.size(); ++o) {
    double u = uniform01(rng);
    int pick = static_cast<int>(atoms_.size()) - 1;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      if (u < atoms_[k].weight) {
        pick = static_cast<int>(k);
        break;
      }
      u -= atoms_[k].weight;
    }
    label_[o] = pick;
    sign_[o] = uniform01(rng) < 0.5 ? 1 : -1;
  }
}

void GibbsSampler::regenerate_responses(Rng& rng) {
  for (Eigen::Index o = 0; o < x_.size(); ++o) {
    x_[o] = z_.row(o).dot(theta_) + (has_random_effects_ ? w_[o] * b_[group_[o]] : 0.0) + obs_mean_shift(o) +
            std::sqrt(obs_variance(o)) * std_normal(rng);
  }
}

int GibbsSampler::occupied_components() const {
  std::vector<char> used(atoms_.size(), 0);
  for (int k : label_) used[k] = 1;
  return static_cast<int>(std::count(used.begin(), used.end(), 1));
}

double GibbsSampler::location_acceptance() const {
  return location_tries_ ? static_cast<double>(location_accepts_) / location_tries_ : 0.0;
}

double GibbsSampler::scale_acceptance() const {
  return scale_tries_ ? static_cast<double>(scale_accepts_) / scale_tries_ : 0.0;
}

void GibbsSampler::reset_acceptance() { location_accepts_ = location_tries_ = scale_accepts_ = scale_tries_ = 0; }

PosteriorChain GibbsSampler::run(Rng& rng, const std::string& estimator) {
  PosteriorChain chain;
  chain.estimator = estimator;
  chain.seed = config_.seed;
  chain.theta_names = theta_names(theta_.size());
  const int kept = config_.kept_draws();
  chain.theta.resize(kept, theta_.size());
  int row = 0;
  for (int it = 0; it < config_.iterations && row < kept; ++it) {
    const bool burning = it < config_.burn_in;
    sweep(rng, config_.adapt && burning);
    check_finite(theta_, it, "theta");
    if (it + 1 == config_.burn_in) reset_acceptance();
    if (burning || (it - config_.burn_in + 1) % config_.thin != 0) continue;
    chain.theta.row(row) = theta_.transpose();
    if (has_random_effects_) chain.hyper["sigma_b2"].push_back(sigma_b2_);
    if (model_ == ErrorModel::Gaussian) {
      chain.hyper["sigma_eps2"].push_back(sigma_e2_);
    } else {
      chain.hyper["occupied_components"].push_back(occupied_components());
      if (row % config_.dpm_snapshot_every == 0) chain.dpm_snapshots.push_back(dpm_draw());
    }
    ++row;
  }
  if (model_ == ErrorModel::Dpm) {
    chain.acceptance["atom_location"] = location_acceptance();
    chain.acceptance["atom_scale"] = scale_acceptance();
  }
  finalize_ess(chain);
  return chain;
}

PosteriorChain fit_b1_mixed(const MixedDataset& data, const SamplerConfig& config) {
  Rng rng = make_rng(config.seed);
  GibbsSampler sampler(data, config, GibbsSampler::ErrorModel::Gaussian, rng);
  return sampler.run(rng, "B1");
}

PosteriorChain fit_b2_mixed(const MixedDataset& data, const SamplerConfig& config) {
  Rng rng = make_rng(config.seed);
  GibbsSampler sampler(data, config, GibbsSampler::ErrorModel::Dpm, rng);
  return sampler.run(rng, "B2");
}

PosteriorChain fit_b2_regression(const RegressionDataset& data, const SamplerConfig& config) {
  Rng rng = make_rng(config.seed);
  GibbsSampler sampler(data, config, GibbsSampler::ErrorModel::Dpm, rng);
  return sampler.run(rng, "B2");
}

PosteriorChain fit_gaussian_regression(const RegressionDataset& data, const SamplerConfig& config) {
  Rng rng = make_rng(config.seed);
  GibbsSampler sampler(data, config, GibbsSampler::ErrorModel::Gaussian, rng);
  return sampler.run(rng, "B1");
}

// --- Random series regression ---------------------------------------------------

namespace {

class SeriesSampler {
 public:
  SeriesSampler(const RegressionDataset& data, const SamplerConfig& config)
      : config_(config), spec_(config.series), z_(data.covariates()) {
    config_.validate();
    const Eigen::VectorXd theta_ols = ols(data);
    const Eigen::VectorXd resid = data.residuals(theta_ols);
    const double span = resid.cwiseAbs().maxCoeff();
    scale_ = span > 0.0 ? span / config_.series_initial_span : 1.0;
    x_ = data.responses() / scale_;
    theta_ = theta_ols / scale_;
    coeff_ = Eigen::VectorXd::Zero(spec_.truncation);
    decay_ = Eigen::VectorXd(spec_.truncation);
    for (int j = 0; j < spec_.truncation; ++j) decay_[j] = std::pow(static_cast<double>(j + 1), -spec_.decay);
    const QuadratureRule rule = gauss_legendre(spec_.normalizer_nodes, -0.5, 0.5);
    node_basis_ = basis_matrix(rule.nodes);
    node_log_weights_ = rule.weights.array().log().matrix();
    // Proposal shape from the OLS covariance in rescaled units.
    const Eigen::MatrixXd cov = (z_.transpose() * z_).inverse() * resid.squaredNorm() /
                                std::max<double>(1.0, static_cast<double>(z_.rows() - z_.cols())) /
                                (scale_ * scale_);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    proposal_chol_ = llt.matrixL();
    log_theta_step_ = std::log(config_.theta_step / 0.1);
    log_block_step_.assign((spec_.truncation + config_.coefficient_block - 1) / config_.coefficient_block,
                           std::log(config_.coefficient_step));
    refresh_residual_basis();
    loglik_ = loglik(coeff_);
    if (loglik_ == -kInf) {
      throw Error(ErrorKind::OutOfSupport, "initial residuals fall outside (-1/2, 1/2)");
    }
  }

  PosteriorChain run(Rng& rng) {
    PosteriorChain chain;
    chain.estimator = "series";
    chain.seed = config_.seed;
    chain.response_scale = scale_;
    chain.theta_names = theta_names(theta_.size());
    const int kept = config_.kept_draws();
    chain.theta.resize(kept, theta_.size());
    int row = 0;
    long theta_acc = 0, theta_tries = 0, coef_acc = 0, coef_tries = 0, adapt = 0;
    for (int it = 0; it < config_.iterations && row < kept; ++it) {
      const bool adapting = config_.adapt && it < config_.burn_in;
      if (it == config_.burn_in) theta_acc = theta_tries = coef_acc = coef_tries = 0;
      const bool ta = update_theta(rng);
      ++theta_tries;
      theta_acc += ta;
      if (adapting) log_theta_step_ += robbins_monro_gain(adapt) * ((ta ? 1.0 : 0.0) - kBlockTarget);
      if (!config_.fix_series_coefficients) {
        for (std::size_t b = 0; b < log_block_step_.size(); ++b) {
          const bool ca = update_block(rng, b);
          ++coef_tries;
          coef_acc += ca;
          if (adapting) log_block_step_[b] += robbins_monro_gain(adapt) * ((ca ? 1.0 : 0.0) - kBlockTarget);
        }
      }
      if (adapting) ++adapt;
      check_finite(theta_, it, "theta");
      if (it < config_.burn_in || (it - config_.burn_in + 1) % config_.thin != 0) continue;
      chain.theta.row(row) = (theta_ * scale_).transpose();
      chain.hyper["log_normalizer"].push_back(log_normalizer(coeff_));
      chain.hyper["loglik"].push_back(loglik_);
      ++row;
    }
    chain.acceptance["theta"] = theta_tries ? static_cast<double>(theta_acc) / theta_tries : 0.0;
    if (!config_.fix_series_coefficients) {
      chain.acceptance["coefficients"] = coef_tries ? static_cast<double>(coef_acc) / coef_tries : 0.0;
    }
    finalize_ess(chain);
    return chain;
  }

 private:
  Eigen::MatrixXd basis_matrix(const Eigen::VectorXd& t) const {
    Eigen::MatrixXd out(t.size(), spec_.truncation);
    for (Eigen::Index i = 0; i < t.size(); ++i)
      for (int j = 0; j < spec_.truncation; ++j) out(i, j) = series_basis(j + 1, t[i]);
    return out;
  }

  void refresh_residual_basis() {
    resid_ = x_ - z_ * theta_;
    plus_basis_ = basis_matrix(resid_);
    minus_basis_ = basis_matrix(-resid_);
  }

  double log_normalizer(const Eigen::VectorXd& c) const {
    const Eigen::VectorXd v = node_basis_ * c.cwiseProduct(decay_) + node_log_weights_;
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
  }

  double log_prior_coefficients(const Eigen::VectorXd& c) const {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      if (std::abs(c[j]) > spec_.coefficient_bound) return -kInf;
      if (spec_.coefficient_log_density) lp += spec_.coefficient_log_density(c[j]);
    }
    return lp;
  }

  // sum_i log pbar_w(r_i) against the cached residual basis.
  double loglik(const Eigen::VectorXd& c) const {
    if (resid_.cwiseAbs().maxCoeff() >= 0.5) return -kInf;
    const Eigen::VectorXd a = c.cwiseProduct(decay_);
    const Eigen::VectorXd wp = plus_basis_ * a;
    const Eigen::VectorXd wm = minus_basis_ * a;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < wp.size(); ++i) {
      const double hi = std::max(wp[i], wm[i]);
      sum += hi + std::log1p(std::exp(-std::abs(wp[i] - wm[i]))) - std::log(2.0);
    }
    return sum - static_cast<double>(wp.size()) * log_normalizer(c);
  }

  double log_prior_theta(const Eigen::VectorXd& theta) const {
    return -(theta * scale_ - Eigen::VectorXd::Constant(theta.size(), config_.theta_prior_mean)).squaredNorm() /
           (2.0 * config_.theta_prior_variance);
  }

  bool update_theta(Rng& rng) {
    Eigen::VectorXd eps(theta_.size());
    for (Eigen::Index k = 0; k < eps.size(); ++k) eps[k] = std_normal(rng);
    const Eigen::VectorXd prop = theta_ + std::exp(log_theta_step_) * (proposal_chol_ * eps);
    const Eigen::VectorXd prop_resid = x_ - z_ * prop;
    if (prop_resid.cwiseAbs().maxCoeff() >= 0.5) return false;
    const Eigen::VectorXd saved_theta = theta_;
    const Eigen::MatrixXd saved_plus = plus_basis_, saved_minus = minus_basis_;
    const Eigen::VectorXd saved_resid = resid_;
    theta_ = prop;
    refresh_residual_basis();
    const double ll = loglik(coeff_);
    const double log_ratio = ll + log_prior_theta(prop) - loglik_ - log_prior_theta(saved_theta);
    if (std::log(uniform01(rng)) < log_ratio) {
      loglik_ = ll;
      return true;
    }
    theta_ = saved_theta;
    plus_basis_ = saved_plus;
    minus_basis_ = saved_minus;
    resid_ = saved_resid;
    return false;
  }

  bool update_block(Rng& rng, std::size_t block) {
    const int begin = static_cast<int>(block) * config_.coefficient_block;
    const int end = std::min(spec_.truncation, begin + config_.coefficient_block);
    Eigen::VectorXd prop = coeff_;
    const double step = std::exp(log_block_step_[block]);
    for (int j = begin; j < end; ++j) prop[j] += step * std_normal(rng);
    const double prior = log_prior_coefficients(prop);
    if (prior == -kInf) return false;
    const double ll = loglik(prop);
    if (std::log(uniform01(rng)) < ll + prior - loglik_ - log_prior_coefficients(coeff_)) {
      coeff_ = prop;
      loglik_ = ll;
      return true;
    }
    return false;
  }

  SamplerConfig config_;
  SeriesSpec spec_;
  Eigen::MatrixXd z_;
  Eigen::VectorXd x_;
  double scale_ = 1.0;
  Eigen::VectorXd theta_;
  Eigen::VectorXd coeff_;
  Eigen::VectorXd decay_;
  Eigen::MatrixXd node_basis_;
  Eigen::VectorXd node_log_weights_;
  Eigen::MatrixXd proposal_chol_;
  Eigen::VectorXd resid_;
  Eigen::MatrixXd plus_basis_, minus_basis_;
  double log_theta_step_ = 0.0;
  std::vector<double> log_block_step_;
  double loglik_ = 0.0;
};

}  // namespace

PosteriorChain fit_series_regression(const RegressionDataset& data, const SamplerConfig& config) {
  Rng rng = make_rng(config.seed);
  SeriesSampler sampler(data, config);
  return sampler.run(rng);
}

}  // namespace symbayes
