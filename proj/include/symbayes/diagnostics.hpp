#ifndef SYMBAYES_DIAGNOSTICS_HPP
#define SYMBAYES_DIAGNOSTICS_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "symbayes/density.hpp"
#include "symbayes/mixed.hpp"
#include "symbayes/quadrature.hpp"
#include "symbayes/regression.hpp"
#include "symbayes/samplers.hpp"

namespace symbayes {

struct FisherInfo {
  // Regression: v_eta = P_eta0[s_eta s_eta0].
  std::optional<double> v_eta;
  // Mixed model: one m x m matrix per distinct random-effect design W, with MC
  // standard errors, and the index of the pattern used by each group.
  std::vector<Eigen::MatrixXd> patterns;
  std::vector<Eigen::MatrixXd> v_eta_of_w;
  std::vector<Eigen::MatrixXd> v_eta_of_w_se;
  std::vector<std::size_t> group_pattern;

  Eigen::MatrixXd information;     // V_n, p x p
  Eigen::MatrixXd information_se;  // zero for quadrature
  EigenRange eigenvalues{};
};

// int s_eta s_eta0 dP_eta0 over the effective range of eta0.
double efficient_information(const SymmetricDensity& eta, const SymmetricDensity& eta0,
                             const QuadratureScheme& scheme = {});

// d_2^2(eta, eta0) = P_eta0 (s_eta - s_eta0)^2.
double score_distance_sq(const SymmetricDensity& eta, const SymmetricDensity& eta0,
                         const QuadratureScheme& scheme = {});

// V_n = v_eta Z_n.
FisherInfo fisher_regression(const SymmetricDensity& eta, const SymmetricDensity& eta0,
                             const Eigen::MatrixXd& gram, const QuadratureScheme& scheme = {});

struct FisherMcOptions {
  int draws = 4000;
  // InsufficientMcSize when max entry SE of V_n exceeds this fraction of
  // the largest |entry|.
  double max_relative_se = 0.05;
  PsiIntegrator integrator;
};

// v_eta(W) = E[s_eta(y|W) s_eta0(y|W)^T], y ~ psi_eta0(.|W), by Monte Carlo;
// V_n = n^{-1} sum_i Z_i v_eta(W_i) Z_i^T.
FisherInfo fisher_mixed(const Density& f, const RandomEffectLaw& g, const Density& f0,
                        const RandomEffectLaw& g0, const MixedDataset& design, Rng& rng,
                        const FisherMcOptions& options = {});

// Closed-form V_n for Gaussian f and G: n^{-1} sum Z_i Sigma_i^{-1} Z_i^T with
// Sigma_i = sigma_eps^2 I + W_i^T Cov(b) W_i.
Eigen::MatrixXd gaussian_mixed_information(const MixedDataset& design, double error_variance,
                                           const Eigen::MatrixXd& random_effect_covariance);

// Delta_n = n^{-1/2} V^{-1} ldot. Throws SingularInformation.
Eigen::VectorXd delta_n(const RegressionDataset& data, const Eigen::VectorXd& theta0,
                        const SymmetricDensity& eta0, const FisherInfo& info);
Eigen::VectorXd delta_n(const MixedDataset& data, const Eigen::VectorXd& theta0, const Density& f0,
                        const RandomEffectLaw& g0, const FisherInfo& info,
                        const PsiIntegrator& integrator = {});

// Points of a per-axis lattice on [-radius, radius]^p restricted to |h| <= radius.
std::vector<Eigen::VectorXd> h_grid(Eigen::Index p, double radius, int points_per_axis);

// log p(theta0 + h/sqrt n) - log p(theta0) - h^T ldot / sqrt n + h^T V h / 2 for
// each h. Entries are +-inf / NaN when theta0 + h/sqrt n leaves the support.
std::vector<double> lan_remainder(const RegressionDataset& data, const SymmetricDensity& eta,
                                  const Eigen::VectorXd& theta0, const std::vector<Eigen::VectorXd>& grid,
                                  const FisherInfo& info);

struct KlBall {
  double sum_k = 0.0;
  double sum_v = 0.0;
  bool in_ball = false;
};

// Per-observation sums of K and V between the true and candidate laws of X_i
// against n eps^2 and C2 n eps^2.
KlBall kl_ball_membership(const Eigen::MatrixXd& design, const Eigen::VectorXd& theta,
                          const SymmetricDensity& eta, const Eigen::VectorXd& theta0,
                          const SymmetricDensity& eta0, double epsilon, double c2 = 1.0,
                          const QuadratureScheme& scheme = {});

// sqrt of the average per-observation squared Hellinger distance.
double mean_hellinger(const Eigen::MatrixXd& design, const Eigen::VectorXd& theta, const SymmetricDensity& eta,
                      const Eigen::VectorXd& theta0, const SymmetricDensity& eta0,
                      const QuadratureScheme& scheme = {});

struct BvmDistance {
  std::vector<double> coordinate_ks;
  std::vector<double> projection_ks;
  std::vector<double> ess;
};

// One-sample KS of sqrt n (theta - theta0) coordinates and of a^T projections
// against the matching marginals of N(Delta_n, V^{-1}); the KS statistic stands
// in for total variation, which is not estimable from draws.
// Throws UnreliableChain when a coordinate ESS is below `min_ess`.
BvmDistance bvm_distance(const PosteriorChain& chain, Eigen::Index n, const Eigen::VectorXd& theta0,
                         const Eigen::VectorXd& delta, const Eigen::MatrixXd& information,
                         const std::vector<Eigen::VectorXd>& projections = {}, double min_ess = 100.0);

struct BvmReport {
  Eigen::Index n = 0;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd delta;
  Eigen::MatrixXd information;
  std::vector<double> ks;
  std::vector<double> projection_ks;
  std::vector<double> ess;
  std::vector<Eigen::VectorXd> h;
  std::vector<double> remainder;
  KlBall kl;
  double mean_hellinger = 0.0;
  Eigen::VectorXd posterior_mean;
};

}  // namespace symbayes

#endif  // SYMBAYES_DIAGNOSTICS_HPP
