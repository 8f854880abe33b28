#ifndef SYMBAYES_MIXED_HPP
#define SYMBAYES_MIXED_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "symbayes/density.hpp"
#include "symbayes/regression.hpp"

namespace symbayes {

struct MixedTruth {
  Eigen::VectorXd theta;
  double random_effect_variance;
  std::string error_law;
};

// X_ij = theta^T Z_ij + b_i^T W_ij + eps_ij, i = 1..n groups of equal size m.
class MixedDataset {
 public:
  // responses: n x m; fixed[i]: p x m (column j is Z_ij); random[i]: q x m.
  MixedDataset(Eigen::MatrixXd responses, std::vector<Eigen::MatrixXd> fixed,
               std::vector<Eigen::MatrixXd> random, std::optional<MixedTruth> truth = std::nullopt);

  Eigen::Index groups() const { return responses_.rows(); }
  Eigen::Index group_size() const { return responses_.cols(); }
  Eigen::Index dim() const { return fixed_.front().rows(); }
  Eigen::Index effect_dim() const { return random_.front().rows(); }
  Eigen::Index observations() const { return groups() * group_size(); }

  Eigen::VectorXd response(Eigen::Index i) const { return responses_.row(i).transpose(); }
  const Eigen::MatrixXd& responses() const { return responses_; }
  const Eigen::MatrixXd& fixed(Eigen::Index i) const { return fixed_[i]; }
  const Eigen::MatrixXd& random(Eigen::Index i) const { return random_[i]; }
  const std::optional<MixedTruth>& truth() const { return truth_; }

  // L = max(|Z_ij|, |W_ij|) over all entries.
  double covariate_bound() const { return covariate_bound_; }
  // True when every W_ij is the scalar 1.
  bool is_random_intercept() const;

  // X_i - Z_i^T theta.
  Eigen::VectorXd residual(Eigen::Index i, const Eigen::VectorXd& theta) const {
    return response(i) - fixed_[i].transpose() * theta;
  }

  // All n*m observations as one regression dataset (rows Z_ij, response X_ij).
  RegressionDataset stacked() const;

 private:
  Eigen::MatrixXd responses_;
  std::vector<Eigen::MatrixXd> fixed_;
  std::vector<Eigen::MatrixXd> random_;
  std::optional<MixedTruth> truth_;
  double covariate_bound_ = 0.0;
};

// Finite-sample surrogate of the design-richness condition: each distinct
// random-effect pattern W_i must occur in at least `floor` of the groups.
struct DesignPatternSummary {
  std::size_t distinct_patterns;
  double min_frequency;
};
DesignPatternSummary design_patterns(const MixedDataset& data);
bool satisfies_design_floor(const MixedDataset& data, double floor);

// Law G of b in R^q, symmetric about zero.
struct RandomEffectLaw {
  enum class Kind { Gaussian, PointMass, TruncatedGaussian, SymmetricDiscrete };

  Kind kind = Kind::Gaussian;
  Eigen::MatrixXd covariance;  // q x q; Gaussian and TruncatedGaussian
  double bound = 10.0;         // M_b; TruncatedGaussian support [-M_b, M_b]^q
  std::vector<Eigen::VectorXd> atoms;  // SymmetricDiscrete; mirrored automatically
  std::vector<double> weights;

  static RandomEffectLaw gaussian(double variance);
  static RandomEffectLaw gaussian(Eigen::MatrixXd covariance);
  static RandomEffectLaw point_mass(Eigen::Index q = 1);
  static RandomEffectLaw truncated_gaussian(Eigen::MatrixXd covariance, double bound);
  // Each atom a gets weight w/2 at a and -a.
  static RandomEffectLaw symmetric_discrete(std::vector<Eigen::VectorXd> atoms, std::vector<double> weights);

  Eigen::Index dim() const;
  Eigen::VectorXd sample(Rng& rng) const;
};

struct PsiIntegrator {
  // Gauss-Legendre / Gauss-Hermite nodes for q = 1.
  int nodes = 64;
  // Relative disagreement allowed between `nodes` and 2 * `nodes`.
  double refinement_tolerance = 1e-4;
  bool check_refinement = true;
  // Monte Carlo over b for q > 1: antithetic pairs, fixed seed.
  int mc_pairs = 2048;
  std::uint64_t mc_seed = 0x5eed;
};

// log psi_eta(y | w) = log int prod_j f(y_j - b^T w_j) dG(b).
double psi_log_density(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Density& f,
                       const RandomEffectLaw& g, const PsiIntegrator& integrator = {});
inline double psi_density(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Density& f,
                          const RandomEffectLaw& g, const PsiIntegrator& integrator = {}) {
  return std::exp(psi_log_density(y, w, f, g, integrator));
}

// s_eta(y | w) = -d/dy log psi_eta(y | w), as a ratio of integrals.
Eigen::VectorXd psi_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Density& f,
                          const RandomEffectLaw& g, const PsiIntegrator& integrator = {});

// sum_i log psi(X_i - Z_i^T theta | W_i)
double loglik_mixed(const MixedDataset& data, const Eigen::VectorXd& theta, const Density& f,
                    const RandomEffectLaw& g, const PsiIntegrator& integrator = {});

// sum_i Z_i s(X_i - Z_i^T theta | W_i)
Eigen::VectorXd score_mixed(const MixedDataset& data, const Eigen::VectorXd& theta, const Density& f,
                            const RandomEffectLaw& g, const PsiIntegrator& integrator = {});

// Random-intercept data: Z_ijk ~ Bernoulli(1/2), W_ij = 1, b_i ~ N(0, sigma_b^2).
MixedDataset generate_mixed(Eigen::Index groups, Eigen::Index group_size, const Eigen::VectorXd& theta0,
                            double random_effect_variance, const SymmetricDensity& law, Rng& rng);

// CSV columns group,j,x,z1..zp,w1..wq.
void write_mixed_csv(std::ostream& out, const MixedDataset& data);
MixedDataset read_mixed_csv(std::istream& in);

}  // namespace symbayes

#endif  // SYMBAYES_MIXED_HPP
