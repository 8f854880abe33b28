#ifndef SYMBAYES_DENSITY_HPP
#define SYMBAYES_DENSITY_HPP

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "symbayes/quadrature.hpp"
#include "symbayes/rng.hpp"

namespace symbayes {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Open interval (lo, hi); either end may be infinite.
struct Support {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double x) const { return x > lo && x < hi; }
  bool bounded() const { return lo > -kInf && hi < kInf; }
};

// Finite interval outside of which a density is negligible (below 1e-12 of
// its mode) or zero.
struct Range {
  double lo;
  double hi;
};

// A univariate Lebesgue density. Implementations are immutable.
class DensityModel {
 public:
  virtual ~DensityModel() = default;

  // -inf outside the support.
  virtual double log_density(double x) const = 0;
  // -d/dx log density.
  virtual double score(double x) const = 0;
  virtual double sample(Rng& rng) const = 0;
  virtual Support support() const = 0;
  virtual Range effective_range() const = 0;
  // Points where the density or its derivatives are discontinuous.
  virtual std::vector<double> breakpoints() const { return {}; }
  virtual bool is_symmetric() const { return false; }
  virtual std::string describe() const = 0;
};

// Shared handle to an immutable DensityModel; cheap to copy.
class Density {
 public:
  explicit Density(std::shared_ptr<const DensityModel> model);

  double log_pdf(double x) const { return model_->log_density(x); }
  double pdf(double x) const;
  double score(double x) const { return model_->score(x); }
  double sample(Rng& rng) const { return model_->sample(rng); }
  std::vector<double> sample(Rng& rng, std::size_t n) const;

  Support support() const { return model_->support(); }
  Range effective_range() const { return model_->effective_range(); }
  std::vector<double> breakpoints() const { return model_->breakpoints(); }
  std::string describe() const { return model_->describe(); }

  const DensityModel& model() const { return *model_; }
  const std::shared_ptr<const DensityModel>& model_ptr() const { return model_; }

 private:
  std::shared_ptr<const DensityModel> model_;
};

// A density symmetric about zero with an antisymmetric score; the nuisance
// parameter of the symmetric-error models.
class SymmetricDensity : public Density {
 public:
  // Probes symmetry of density and score on a grid over the effective range;
  // throws InvalidArgument on failure.
  static SymmetricDensity checked(const Density& density, double tol = 1e-10);
  // For constructions that are symmetric by definition.
  static SymmetricDensity unchecked(const Density& density) { return SymmetricDensity(density); }

  // Half-width r of the support (-r, r); infinity when unbounded.
  double support_halfwidth() const { return support().hi; }

 private:
  explicit SymmetricDensity(const Density& density) : Density(density) {}
};

// --- Standard families -------------------------------------------------------

double normal_pdf(double x, double mean = 0.0, double sd = 1.0);
double normal_log_pdf(double x, double mean = 0.0, double sd = 1.0);
double normal_cdf(double x);

Density normal(double mean, double sd);
SymmetricDensity centered_normal(double sd);
Density uniform(double lo, double hi);
SymmetricDensity centered_uniform(double halfwidth);
SymmetricDensity student_t(double df, double scale = 1.0);

struct NormalComponent {
  double weight;
  double mean;
  double sd;
};

// Finite normal mixture; weights are normalized on construction.
Density normal_mixture(std::vector<NormalComponent> components);

// sum_k w_k (phi_{sd_k}(x - mean_k) + phi_{sd_k}(x + mean_k)) / 2.
SymmetricDensity mirrored_normal_mixture(const std::vector<NormalComponent>& atoms);

// Degenerate law at zero; only the sampler is usable. Intended as a noiseless
// data-generation stub.
SymmetricDensity point_mass_zero();

// Density of Y = X + shift for X ~ density.
Density shifted(const Density& density, double shift);

// User-supplied density; the score must be -d/dx of log_density.
struct DensityFunctions {
  std::function<double(double)> log_density;
  std::function<double(double)> score;
  std::function<double(Rng&)> sample;
  Support support;
  Range effective_range;
  std::vector<double> breakpoints;
  std::string name = "custom";
};
Density custom_density(DensityFunctions functions);

// p_bar = (p + p^-)/2 with p^-(x) = p(-x). Normal mixtures are symmetrized
// exactly by mirroring each kernel; other densities are wrapped. Already
// symmetric inputs are returned unchanged.
SymmetricDensity symmetrize(const Density& density);

// --- Divergences ------------------------------------------------------------

// Integration interval for a pair: union of effective ranges, optionally
// clipped by scheme.truncation_radius.
Range common_range(const Density& p, const Density& q, const QuadratureScheme& scheme);

double normalization(const Density& p, const QuadratureScheme& scheme = {});

// h^2(p, q) = int (sqrt p - sqrt q)^2, un-halved, so the value lies in [0, 2].
double hellinger_sq(const Density& p, const Density& q, const QuadratureScheme& scheme = {});

// d_V(p, q) = int |p - q|.
double total_variation(const Density& p, const Density& q, const QuadratureScheme& scheme = {});

struct KlMoments {
  double mean;       // K(p, q) = int log(p/q) dP
  double variation;  // V(p, q) = int (log(p/q) - K)^2 dP
};

// Throws DivergenceInfinite when q vanishes on a set where p is positive.
KlMoments kl_mean_and_variation(const Density& p, const Density& q,
                                const QuadratureScheme& scheme = {});

// Maximum of |score(x) + (log p(x+h) - log p(x-h)) / 2h| relative to
// max(1, |score(x)|) over the given points.
double score_fd_discrepancy(const Density& p, const std::vector<double>& points, double step = 1e-5);

}  // namespace symbayes

#endif  // SYMBAYES_DENSITY_HPP
