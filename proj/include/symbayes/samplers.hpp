#ifndef SYMBAYES_SAMPLERS_HPP
#define SYMBAYES_SAMPLERS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "symbayes/mixed.hpp"
#include "symbayes/nuisance_priors.hpp"
#include "symbayes/regression.hpp"

namespace symbayes {

struct InverseGammaPrior {
  double shape = 0.01;
  double rate = 0.01;
};

struct SamplerConfig {
  int iterations = 5000;
  int burn_in = 2000;
  int thin = 1;

  double theta_prior_mean = 0.0;
  double theta_prior_variance = 1e4;
  InverseGammaPrior error_variance_prior;
  InverseGammaPrior random_effect_variance_prior;
  // Holds sigma_eps^2 fixed in the Gaussian-error sampler when set.
  std::optional<double> fixed_error_variance;

  DpmSpec dpm;
  SeriesSpec series;

  // Random-walk proposal scales; adapted during burn-in, frozen afterwards.
  double atom_location_step = 0.5;
  double atom_scale_step = 0.2;
  double theta_step = 0.1;   // series sampler, in rescaled units
  double coefficient_step = 0.5;
  int coefficient_block = 5;
  bool adapt = true;

  // Series sampler: keep the coefficients at their initial value.
  bool fix_series_coefficients = false;
  // Series sampler: maximum |residual| after rescaling, at the initial theta.
  double series_initial_span = 0.4;

  // Every k-th kept draw of the DPM mixture is stored for predictive checks.
  int dpm_snapshot_every = 10;
  // k-means initialization of DPM atoms into min(T, clusters) clusters.
  int initial_clusters = 5;

  std::uint64_t seed = 1;

  // Throws InvalidArgument.
  void validate() const;
  int kept_draws() const { return (iterations - burn_in) / thin; }
};

struct PosteriorChain {
  std::string estimator;
  std::vector<std::string> theta_names;
  Eigen::MatrixXd theta;  // kept draws x p
  std::map<std::string, std::vector<double>> hyper;
  std::map<std::string, double> acceptance;
  Eigen::VectorXd ess;
  std::vector<DpmDraw> dpm_snapshots;
  double response_scale = 1.0;  // series sampler rescaling
  std::uint64_t seed = 0;

  Eigen::VectorXd posterior_mean() const { return theta.colwise().mean().transpose(); }
  Eigen::VectorXd posterior_sd() const;
  // Mixture of all stored DPM snapshots; requires at least one snapshot.
  SymmetricDensity posterior_predictive_density() const;
};

// Draw index plus one column per theta and hyperparameter.
void write_chain_csv(std::ostream& out, const PosteriorChain& chain);
PosteriorChain read_chain_csv(std::istream& in);

// ---------------------------------------------------------------------------
// Gibbs engine for Gaussian and DPM errors, with or without a random intercept.
//
// DPM errors use blocked Gibbs with data augmentation: each observation carries
// a component label k and a sign s in {-1, +1}; given both, its residual is
// s z_k + sigma_k e with e standard normal, so theta and b are conjugate normal.
// ---------------------------------------------------------------------------
class GibbsSampler {
 public:
  enum class ErrorModel { Gaussian, Dpm };

  GibbsSampler(const MixedDataset& data, const SamplerConfig& config, ErrorModel model, Rng& rng);
  GibbsSampler(const RegressionDataset& data, const SamplerConfig& config, ErrorModel model, Rng& rng);

  // One full sweep. `adapting` enables Robbins-Monro updates of the atom
  // proposal scales.
  void sweep(Rng& rng, bool adapting = false);

  // Replaces the whole state by a draw from the prior; responses untouched.
  void draw_from_prior(Rng& rng);
  // Redraws the responses from the model given the current state
  // (latent labels included).
  void regenerate_responses(Rng& rng);

  const Eigen::VectorXd& theta() const { return theta_; }
  const Eigen::VectorXd& random_effects() const { return b_; }
  double random_effect_variance() const { return sigma_b2_; }
  double error_variance() const { return sigma_e2_; }
  const std::vector<DpmAtom>& atoms() const { return atoms_; }
  int occupied_components() const;
  bool has_random_effects() const { return has_random_effects_; }
  DpmDraw dpm_draw() const { return DpmDraw{atoms_}; }
  double location_acceptance() const;
  double scale_acceptance() const;
  void reset_acceptance();

  // Runs the configured schedule and collects the chain.
  PosteriorChain run(Rng& rng, const std::string& estimator);

 private:
  void initialize(Rng& rng);
  void update_labels(Rng& rng);
  void update_weights(Rng& rng);
  void update_atoms(Rng& rng, bool adapting);
  void update_theta(Rng& rng);
  void update_random_effects(Rng& rng);
  void update_variances(Rng& rng);
  double obs_mean_shift(Eigen::Index o) const;  // s z_k for DPM, 0 for Gaussian
  double obs_variance(Eigen::Index o) const;

  SamplerConfig config_;
  ErrorModel model_;
  bool has_random_effects_;
  // Flattened observations.
  Eigen::VectorXd x_;
  Eigen::MatrixXd z_;  // N x p
  Eigen::VectorXd w_;  // random-effect covariate per observation
  std::vector<Eigen::Index> group_;
  Eigen::Index groups_;
  std::vector<std::vector<Eigen::Index>> members_;

  Eigen::VectorXd theta_;
  Eigen::VectorXd b_;
  double sigma_b2_ = 1.0;
  double sigma_e2_ = 1.0;
  std::vector<DpmAtom> atoms_;
  std::vector<int> label_;
  std::vector<int> sign_;

  double log_location_step_;
  double log_scale_step_;
  long adapt_count_ = 0;
  long location_accepts_ = 0, location_tries_ = 0;
  long scale_accepts_ = 0, scale_tries_ = 0;
  std::vector<double> scratch_;
};

// B1: Gaussian f and Gaussian G, conjugate Gibbs.
PosteriorChain fit_b1_mixed(const MixedDataset& data, const SamplerConfig& config);
// B2: symmetrized DPM f and Gaussian G.
PosteriorChain fit_b2_mixed(const MixedDataset& data, const SamplerConfig& config);
PosteriorChain fit_b2_regression(const RegressionDataset& data, const SamplerConfig& config);
// Gaussian-error regression, conjugate Gibbs.
PosteriorChain fit_gaussian_regression(const RegressionDataset& data, const SamplerConfig& config);
// Symmetrized random-series prior; responses are rescaled so that residuals
// at the initial theta lie inside (-1/2, 1/2). Draws are reported in the
// original units. Throws OutOfSupport if the initial state is infeasible.
PosteriorChain fit_series_regression(const RegressionDataset& data, const SamplerConfig& config);

}  // namespace symbayes

#endif  // SYMBAYES_SAMPLERS_HPP
