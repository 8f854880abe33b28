#include "symbayes/nuisance_priors.hpp"

#include <cmath>
#include <numbers>

#include "symbayes/error.hpp"

namespace symbayes {

void DpmSpec::validate(bool strict) const {
  require(precision > 0.0, ErrorKind::InvalidArgument, "DP precision must be positive");
  require(location_bound > 0.0, ErrorKind::InvalidArgument, "location bound M must be positive");
  require(scale_lo > 0.0 && scale_lo < scale_hi, ErrorKind::InvalidArgument,
          "scale bounds need 0 < sigma_1 < sigma_2");
  require(truncation >= 1, ErrorKind::InvalidArgument, "truncation level must be positive");
  if (strict) {
    require(truncation >= 10, ErrorKind::InvalidArgument, "truncation level below 10");
  }
}

double DpmSpec::base_log_density(double location, double scale) const {
  if (!in_rectangle(location, scale)) return -kInf;
  if (base.log_density) return base.log_density(location, scale);
  return 0.0;
}

std::pair<double, double> DpmSpec::base_sample(Rng& rng) const {
  if (base.sample) return base.sample(rng);
  const double z = uniform(rng, -location_bound, location_bound);
  const double s = uniform(rng, scale_lo, scale_hi);
  return {z, s};
}

DpmDraw dpm_prior_draw(const DpmSpec& spec, Rng& rng) {
  spec.validate();
  DpmDraw draw;
  draw.atoms.reserve(spec.truncation);
  double remaining = 1.0;
  for (int k = 0; k < spec.truncation; ++k) {
    const double v = (k + 1 == spec.truncation) ? 1.0 : beta_draw(rng, 1.0, spec.precision);
    const double w = remaining * v;
    remaining -= w;
    const auto [z, s] = spec.base_sample(rng);
    draw.atoms.push_back({w, z, s});
  }
  return draw;
}

SymmetricDensity dpm_density(const DpmDraw& draw) {
  std::vector<NormalComponent> atoms;
  atoms.reserve(draw.atoms.size());
  for (const auto& a : draw.atoms) atoms.push_back({a.weight, a.location, a.scale});
  return mirrored_normal_mixture(atoms);
}

void SeriesSpec::validate() const {
  require(decay > 3.0, ErrorKind::InvalidArgument, "series decay must exceed 3");
  require(coefficient_bound > 0.0, ErrorKind::InvalidArgument, "coefficient bound must be positive");
  require(truncation >= 1, ErrorKind::InvalidArgument, "series truncation must be positive");
  require(normalizer_nodes >= 8, ErrorKind::InvalidArgument, "too few normalizer nodes");
}

SeriesFunction::SeriesFunction(std::vector<double> coefficients, double decay)
    : scaled_(std::move(coefficients)) {
  for (std::size_t j = 0; j < scaled_.size(); ++j) {
    scaled_[j] *= std::pow(static_cast<double>(j + 1), -decay);
  }
}

double series_basis(int j, double t) {
  if (j == 1) return 1.0;
  const double freq = 2.0 * std::numbers::pi * static_cast<double>(j / 2);
  return (j % 2 == 0) ? std::cos(freq * t) : std::sin(freq * t);
}

// Basis index j (1-based): 1 -> constant, even 2k -> cos(2 pi k t), odd 2k+1 -> sin(2 pi k t).
double SeriesFunction::value(double t) const {
  double sum = scaled_.empty() ? 0.0 : scaled_[0];
  for (std::size_t i = 1; i < scaled_.size(); ++i) {
    const std::size_t j = i + 1;
    const double freq = 2.0 * std::numbers::pi * static_cast<double>(j / 2);
    sum += scaled_[i] * ((j % 2 == 0) ? std::cos(freq * t) : std::sin(freq * t));
  }
  return sum;
}

double SeriesFunction::derivative(double t) const {
  double sum = 0.0;
  for (std::size_t i = 1; i < scaled_.size(); ++i) {
    const std::size_t j = i + 1;
    const double freq = 2.0 * std::numbers::pi * static_cast<double>(j / 2);
    sum += scaled_[i] * freq * ((j % 2 == 0) ? -std::sin(freq * t) : std::cos(freq * t));
  }
  return sum;
}

double SeriesFunction::second_derivative(double t) const {
  double sum = 0.0;
  for (std::size_t i = 1; i < scaled_.size(); ++i) {
    const std::size_t j = i + 1;
    const double freq = 2.0 * std::numbers::pi * static_cast<double>(j / 2);
    sum -= scaled_[i] * freq * freq * ((j % 2 == 0) ? std::cos(freq * t) : std::sin(freq * t));
  }
  return sum;
}

double series_log_normalizer(const SeriesFunction& w, int nodes) {
  const QuadratureRule rule = gauss_legendre(nodes, -0.5, 0.5);
  double m = -kInf;
  std::vector<double> values(nodes);
  for (int i = 0; i < nodes; ++i) {
    values[i] = w.value(rule.nodes[i]);
    m = std::max(m, values[i]);
  }
  double sum = 0.0;
  for (int i = 0; i < nodes; ++i) sum += rule.weights[i] * std::exp(values[i] - m);
  return m + std::log(sum);
}

SeriesDraw series_prior_draw(const SeriesSpec& spec, Rng& rng) {
  spec.validate();
  SeriesDraw draw;
  draw.decay = spec.decay;
  draw.coefficients.resize(spec.truncation);
  for (auto& c : draw.coefficients) {
    c = spec.coefficient_sampler ? spec.coefficient_sampler(rng)
                                 : uniform(rng, -spec.coefficient_bound, spec.coefficient_bound);
    require(std::abs(c) <= spec.coefficient_bound, ErrorKind::InvalidArgument,
            "coefficient sampler left [-M, M]");
  }
  return draw;
}

namespace {

class SeriesRawModel final : public DensityModel {
 public:
  SeriesRawModel(const SeriesDraw& draw, int nodes)
      : w_(draw.function()), log_norm_(series_log_normalizer(w_, nodes)) {
    log_envelope_ = -kInf;
    for (int i = 0; i <= 1024; ++i) log_envelope_ = std::max(log_envelope_, w_.value(-0.5 + i / 1024.0));
    log_envelope_ += 1e-3;
  }

  double log_density(double x) const override {
    return (x > -0.5 && x < 0.5) ? w_.value(x) - log_norm_ : -kInf;
  }
  double score(double x) const override { return -w_.derivative(x); }
  double sample(Rng& rng) const override {
    // Rejection from the uniform envelope.
    for (;;) {
      const double x = uniform(rng, -0.5, 0.5);
      if (std::log(uniform01(rng)) < w_.value(x) - log_envelope_) return x;
    }
  }
  Support support() const override { return {-0.5, 0.5}; }
  Range effective_range() const override { return {-0.5, 0.5}; }
  std::vector<double> breakpoints() const override { return {-0.5, 0.5}; }
  std::string describe() const override { return "series density"; }

 private:
  SeriesFunction w_;
  double log_norm_;
  double log_envelope_;
};

}  // namespace

Density series_raw_density(const SeriesDraw& draw, int normalizer_nodes) {
  return Density(std::make_shared<SeriesRawModel>(draw, normalizer_nodes));
}

SymmetricDensity series_density(const SeriesDraw& draw, int normalizer_nodes) {
  return symmetrize(series_raw_density(draw, normalizer_nodes));
}

double series_sup_bound(const SeriesSpec& spec) {
  double sum = 0.0;
  for (int j = 1; j <= spec.truncation; ++j) sum += std::pow(static_cast<double>(j), -spec.decay);
  return spec.coefficient_bound * sum;
}

}  // namespace symbayes
