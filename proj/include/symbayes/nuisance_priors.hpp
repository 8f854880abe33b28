#ifndef SYMBAYES_NUISANCE_PRIORS_HPP
#define SYMBAYES_NUISANCE_PRIORS_HPP

#include <functional>
#include <vector>

#include "symbayes/density.hpp"

namespace symbayes {

// ---------------------------------------------------------------------------
// Symmetrized Dirichlet process mixture of normals.
//
// F ~ DP(alpha, H) with H on [-M, M] x [sigma_lo, sigma_hi]; the error density
// is the mirrored mixture sum_k w_k (phi_{s_k}(x - z_k) + phi_{s_k}(x + z_k)) / 2.
// F is represented by truncated stick-breaking with T atoms.
// ---------------------------------------------------------------------------

struct DpmBaseMeasure {
  // Log density on the rectangle up to a constant; defaults to uniform.
  std::function<double(double location, double scale)> log_density;
  std::function<std::pair<double, double>(Rng&)> sample;
};

struct DpmSpec {
  double precision = 1.0;       // alpha
  double location_bound = 4.0;  // M
  double scale_lo = 0.2;        // sigma_1
  double scale_hi = 3.0;        // sigma_2
  int truncation = 30;          // T
  DpmBaseMeasure base;          // empty members mean uniform on the rectangle

  // Throws InvalidArgument. `strict` additionally enforces T >= 10.
  void validate(bool strict = false) const;

  double base_log_density(double location, double scale) const;
  std::pair<double, double> base_sample(Rng& rng) const;
  bool in_rectangle(double location, double scale) const {
    return location >= -location_bound && location <= location_bound && scale >= scale_lo &&
           scale <= scale_hi;
  }
};

struct DpmAtom {
  double weight;
  double location;
  double scale;
};

struct DpmDraw {
  std::vector<DpmAtom> atoms;
};

// Stick-breaking: V_k ~ Beta(1, alpha) for k < T, the last stick takes the
// remainder; atoms i.i.d. from the base measure.
DpmDraw dpm_prior_draw(const DpmSpec& spec, Rng& rng);

// Symmetrized mixture density with closed-form score.
SymmetricDensity dpm_density(const DpmDraw& draw);

// ---------------------------------------------------------------------------
// Symmetrized random series prior on (-1/2, 1/2).
//
// w(t) = sum_{j<=J} j^{-alpha} c_j b_j(t) with b_1 = 1, b_{2k} = cos(2 pi k t),
// b_{2k+1} = sin(2 pi k t); p_w = e^w / int e^w, and the prior draw is p_w bar.
// ---------------------------------------------------------------------------

struct SeriesSpec {
  double decay = 3.5;              // alpha, must exceed 3
  double coefficient_bound = 5.0;  // M
  int truncation = 25;             // J
  // Density of c_j on [-M, M]; both empty means uniform. The posterior
  // sampler uses the log density, the prior draw uses the sampler.
  std::function<double(Rng&)> coefficient_sampler;
  std::function<double(double)> coefficient_log_density;
  int normalizer_nodes = 256;

  void validate() const;
};

// b_j(t) for 1-based j.
double series_basis(int j, double t);

// Periodic log-density evaluator for a fixed coefficient vector.
class SeriesFunction {
 public:
  SeriesFunction(std::vector<double> coefficients, double decay);

  double value(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;

  // a_j = j^{-alpha} c_j
  const std::vector<double>& scaled_coefficients() const { return scaled_; }

 private:
  std::vector<double> scaled_;
};

struct SeriesDraw {
  std::vector<double> coefficients;  // c_1..c_J, |c_j| <= M
  double decay = 3.5;

  SeriesFunction function() const { return SeriesFunction(coefficients, decay); }
};

SeriesDraw series_prior_draw(const SeriesSpec& spec, Rng& rng);

// The unsymmetrized p_w.
Density series_raw_density(const SeriesDraw& draw, int normalizer_nodes = 256);

// p_w bar, supported on (-1/2, 1/2).
SymmetricDensity series_density(const SeriesDraw& draw, int normalizer_nodes = 256);

// log int_{-1/2}^{1/2} e^{w(t)} dt by Gauss-Legendre.
double series_log_normalizer(const SeriesFunction& w, int nodes);

// M * sum_{j<=J} j^{-alpha}: a bound on sup |w| for every draw.
double series_sup_bound(const SeriesSpec& spec);

}  // namespace symbayes

#endif  // SYMBAYES_NUISANCE_PRIORS_HPP
