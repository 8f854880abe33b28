#include "symbayes/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "symbayes/error.hpp"

namespace symbayes {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))
constexpr double kNegligibleRatio = 1e-12;

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

class NormalModel final : public DensityModel {
 public:
  NormalModel(double mean, double sd) : mean_(mean), sd_(sd) {
    require(sd > 0.0 && std::isfinite(sd), ErrorKind::InvalidArgument, "normal sd must be positive");
  }
  double log_density(double x) const override { return normal_log_pdf(x, mean_, sd_); }
  double score(double x) const override { return (x - mean_) / (sd_ * sd_); }
  double sample(Rng& rng) const override { return mean_ + sd_ * std_normal(rng); }
  Support support() const override { return {}; }
  Range effective_range() const override { return {mean_ - 10.0 * sd_, mean_ + 10.0 * sd_}; }
  bool is_symmetric() const override { return mean_ == 0.0; }
  std::string describe() const override {
    std::ostringstream os;
    os << "normal(" << mean_ << ", " << sd_ << ")";
    return os.str();
  }
  double mean() const { return mean_; }
  double sd() const { return sd_; }

 private:
  double mean_;
  double sd_;
};

class UniformModel final : public DensityModel {
 public:
  UniformModel(double lo, double hi) : lo_(lo), hi_(hi), log_height_(-std::log(hi - lo)) {
    require(lo < hi && std::isfinite(lo) && std::isfinite(hi), ErrorKind::InvalidArgument,
            "uniform needs finite lo < hi");
  }
  double log_density(double x) const override { return (x > lo_ && x < hi_) ? log_height_ : -kInf; }
  double score(double) const override { return 0.0; }
  double sample(Rng& rng) const override { return uniform(rng, lo_, hi_); }
  Support support() const override { return {lo_, hi_}; }
  Range effective_range() const override { return {lo_, hi_}; }
  std::vector<double> breakpoints() const override { return {lo_, hi_}; }
  bool is_symmetric() const override { return lo_ == -hi_; }
  std::string describe() const override {
    std::ostringstream os;
    os << "uniform(" << lo_ << ", " << hi_ << ")";
    return os.str();
  }

 private:
  double lo_;
  double hi_;
  double log_height_;
};

class StudentTModel final : public DensityModel {
 public:
  StudentTModel(double df, double scale) : df_(df), scale_(scale) {
    require(df > 0.0 && scale > 0.0, ErrorKind::InvalidArgument, "student t needs df, scale > 0");
    log_norm_ = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                0.5 * std::log(df * std::numbers::pi) - std::log(scale);
    radius_ = scale * std::sqrt(df * (std::pow(kNegligibleRatio, -2.0 / (df + 1.0)) - 1.0));
  }
  double log_density(double x) const override {
    const double u = x / scale_;
    return log_norm_ - 0.5 * (df_ + 1.0) * std::log1p(u * u / df_);
  }
  double score(double x) const override { return (df_ + 1.0) * x / (df_ * scale_ * scale_ + x * x); }
  double sample(Rng& rng) const override {
    return scale_ * std::student_t_distribution<double>(df_)(rng);
  }
  Support support() const override { return {}; }
  Range effective_range() const override { return {-radius_, radius_}; }
  bool is_symmetric() const override { return true; }
  std::string describe() const override {
    std::ostringstream os;
    os << "student_t(" << df_ << ", " << scale_ << ")";
    return os.str();
  }

 private:
  double df_;
  double scale_;
  double log_norm_;
  double radius_;
};

// Sum of weighted Gaussian kernels, evaluated with log-sum-exp.
class KernelSum {
 public:
  explicit KernelSum(std::vector<NormalComponent> kernels) : kernels_(std::move(kernels)) {
    double total = 0.0;
    for (const auto& k : kernels_) {
      require(k.weight >= 0.0 && k.sd > 0.0, ErrorKind::InvalidArgument,
              "mixture needs nonnegative weights and positive sds");
      total += k.weight;
    }
    require(total > 0.0, ErrorKind::InvalidArgument, "mixture weights sum to zero");
    std::erase_if(kernels_, [](const NormalComponent& k) { return k.weight == 0.0; });
    log_weights_.reserve(kernels_.size());
    for (auto& k : kernels_) {
      k.weight /= total;
      log_weights_.push_back(std::log(k.weight));
    }
  }

  double log_density(double x) const {
    double m = -kInf;
    for (std::size_t i = 0; i < kernels_.size(); ++i) m = std::max(m, term(i, x));
    double sum = 0.0;
    for (std::size_t i = 0; i < kernels_.size(); ++i) sum += std::exp(term(i, x) - m);
    return m + std::log(sum);
  }

  double score(double x) const {
    double m = -kInf;
    for (std::size_t i = 0; i < kernels_.size(); ++i) m = std::max(m, term(i, x));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
      const auto& k = kernels_[i];
      const double r = std::exp(term(i, x) - m);
      num += r * (x - k.mean) / (k.sd * k.sd);
      den += r;
    }
    return num / den;
  }

  double sample(Rng& rng) const {
    double u = uniform01(rng);
    for (const auto& k : kernels_) {
      if (u < k.weight) return k.mean + k.sd * std_normal(rng);
      u -= k.weight;
    }
    const auto& k = kernels_.back();
    return k.mean + k.sd * std_normal(rng);
  }

  Range effective_range() const {
    Range r{kInf, -kInf};
    for (const auto& k : kernels_) {
      r.lo = std::min(r.lo, k.mean - 10.0 * k.sd);
      r.hi = std::max(r.hi, k.mean + 10.0 * k.sd);
    }
    return r;
  }

  const std::vector<NormalComponent>& kernels() const { return kernels_; }

 private:
  double term(std::size_t i, double x) const {
    return log_weights_[i] + normal_log_pdf(x, kernels_[i].mean, kernels_[i].sd);
  }

  std::vector<NormalComponent> kernels_;
  std::vector<double> log_weights_;
};

class MixtureModel final : public DensityModel {
 public:
  explicit MixtureModel(std::vector<NormalComponent> components) : sum_(std::move(components)) {}
  double log_density(double x) const override { return sum_.log_density(x); }
  double score(double x) const override { return sum_.score(x); }
  double sample(Rng& rng) const override { return sum_.sample(rng); }
  Support support() const override { return {}; }
  Range effective_range() const override { return sum_.effective_range(); }
  std::string describe() const override {
    return "normal_mixture(" + std::to_string(sum_.kernels().size()) + ")";
  }
  const std::vector<NormalComponent>& components() const { return sum_.kernels(); }

 private:
  KernelSum sum_;
};

// Mixture of mirrored kernel pairs w/2 (phi(x - z) + phi(x + z)); evaluated at
// |x| so that symmetry holds bitwise.
class MirroredMixtureModel final : public DensityModel {
 public:
  explicit MirroredMixtureModel(const std::vector<NormalComponent>& atoms) : sum_(mirror(atoms)) {}
  double log_density(double x) const override { return sum_.log_density(std::abs(x)); }
  double score(double x) const override {
    const double s = sum_.score(std::abs(x));
    return x < 0.0 ? -s : s;
  }
  double sample(Rng& rng) const override { return sum_.sample(rng); }
  Support support() const override { return {}; }
  Range effective_range() const override {
    const Range r = sum_.effective_range();
    const double h = std::max(std::abs(r.lo), std::abs(r.hi));
    return {-h, h};
  }
  bool is_symmetric() const override { return true; }
  std::string describe() const override {
    return "symmetric_normal_mixture(" + std::to_string(sum_.kernels().size()) + ")";
  }

 private:
  static std::vector<NormalComponent> mirror(const std::vector<NormalComponent>& atoms) {
    std::vector<NormalComponent> out;
    out.reserve(2 * atoms.size());
    for (const auto& a : atoms) {
      if (a.mean == 0.0) {
        out.push_back(a);
      } else {
        out.push_back({0.5 * a.weight, a.mean, a.sd});
        out.push_back({0.5 * a.weight, -a.mean, a.sd});
      }
    }
    return out;
  }

  KernelSum sum_;
};

class PointMassModel final : public DensityModel {
 public:
  double log_density(double) const override {
    throw Error(ErrorKind::InvalidArgument, "point mass has no Lebesgue density");
  }
  double score(double) const override {
    throw Error(ErrorKind::InvalidArgument, "point mass has no score");
  }
  double sample(Rng&) const override { return 0.0; }
  Support support() const override { return {}; }
  Range effective_range() const override { return {-1.0, 1.0}; }
  bool is_symmetric() const override { return true; }
  std::string describe() const override { return "point_mass(0)"; }
};

class ShiftedModel final : public DensityModel {
 public:
  ShiftedModel(Density base, double shift) : base_(std::move(base)), shift_(shift) {}
  double log_density(double x) const override { return base_.log_pdf(x - shift_); }
  double score(double x) const override { return base_.score(x - shift_); }
  double sample(Rng& rng) const override { return base_.sample(rng) + shift_; }
  Support support() const override {
    const Support s = base_.support();
    return {s.lo + shift_, s.hi + shift_};
  }
  Range effective_range() const override {
    const Range r = base_.effective_range();
    return {r.lo + shift_, r.hi + shift_};
  }
  std::vector<double> breakpoints() const override {
    auto b = base_.breakpoints();
    for (double& x : b) x += shift_;
    return b;
  }
  bool is_symmetric() const override { return shift_ == 0.0 && base_.model().is_symmetric(); }
  std::string describe() const override {
    return base_.describe() + " shifted by " + std::to_string(shift_);
  }

 private:
  Density base_;
  double shift_;
};

class CustomModel final : public DensityModel {
 public:
  explicit CustomModel(DensityFunctions f) : f_(std::move(f)) {
    require(static_cast<bool>(f_.log_density) && static_cast<bool>(f_.score), ErrorKind::InvalidArgument,
            "custom density needs log_density and score");
  }
  double log_density(double x) const override {
    return f_.support.contains(x) ? f_.log_density(x) : -kInf;
  }
  double score(double x) const override { return f_.score(x); }
  double sample(Rng& rng) const override {
    require(static_cast<bool>(f_.sample), ErrorKind::InvalidArgument, "custom density has no sampler");
    return f_.sample(rng);
  }
  Support support() const override { return f_.support; }
  Range effective_range() const override { return f_.effective_range; }
  std::vector<double> breakpoints() const override { return f_.breakpoints; }
  std::string describe() const override { return f_.name; }

 private:
  DensityFunctions f_;
};

class SymmetrizedModel final : public DensityModel {
 public:
  explicit SymmetrizedModel(Density base) : base_(std::move(base)) {}
  double log_density(double x) const override {
    const double a = std::abs(x);
    return log_add_exp(base_.log_pdf(a), base_.log_pdf(-a)) - std::numbers::ln2;
  }
  double score(double x) const override {
    const double a = std::abs(x);
    const double lp = base_.log_pdf(a);
    const double lm = base_.log_pdf(-a);
    if (lp == -kInf && lm == -kInf) return 0.0;
    const double m = std::max(lp, lm);
    const double wp = std::exp(lp - m);
    const double wm = std::exp(lm - m);
    double num = 0.0;
    if (wp > 0.0) num += wp * base_.score(a);
    if (wm > 0.0) num -= wm * base_.score(-a);
    const double s = num / (wp + wm);
    return x < 0.0 ? -s : s;
  }
  double sample(Rng& rng) const override {
    const double x = base_.sample(rng);
    return uniform01(rng) < 0.5 ? -x : x;
  }
  Support support() const override {
    const Support s = base_.support();
    const double h = std::max(std::abs(s.lo), std::abs(s.hi));
    return {-h, h};
  }
  Range effective_range() const override {
    const Range r = base_.effective_range();
    const double h = std::max(std::abs(r.lo), std::abs(r.hi));
    return {-h, h};
  }
  std::vector<double> breakpoints() const override {
    auto b = base_.breakpoints();
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n; ++i) b.push_back(-b[i]);
    return b;
  }
  bool is_symmetric() const override { return true; }
  std::string describe() const override { return "symmetrized " + base_.describe(); }

 private:
  Density base_;
};

std::vector<double> pair_breakpoints(const Density& p, const Density& q) {
  std::vector<double> b = p.breakpoints();
  const auto bq = q.breakpoints();
  b.insert(b.end(), bq.begin(), bq.end());
  for (const Support s : {p.support(), q.support()}) {
    if (std::isfinite(s.lo)) b.push_back(s.lo);
    if (std::isfinite(s.hi)) b.push_back(s.hi);
  }
  return b;
}

}  // namespace

Density::Density(std::shared_ptr<const DensityModel> model) : model_(std::move(model)) {
  require(model_ != nullptr, ErrorKind::InvalidArgument, "null density model");
}

double Density::pdf(double x) const { return std::exp(log_pdf(x)); }

std::vector<double> Density::sample(Rng& rng, std::size_t n) const {
  std::vector<double> out(n);
  for (auto& x : out) x = sample(rng);
  return out;
}

SymmetricDensity SymmetricDensity::checked(const Density& density, double tol) {
  const Range r = density.effective_range();
  const double h = std::min(std::max(std::abs(r.lo), std::abs(r.hi)), density.support().hi);
  for (int i = 1; i <= 100; ++i) {
    const double x = h * i / 101.0;
    const double a = density.log_pdf(x);
    const double b = density.log_pdf(-x);
    if (a == -kInf && b == -kInf) continue;
    if (!(std::abs(a - b) <= tol * std::max(1.0, std::abs(a)))) {
      throw Error(ErrorKind::InvalidArgument, density.describe() + " is not symmetric at " + std::to_string(x));
    }
    const double sa = density.score(x);
    const double sb = density.score(-x);
    if (!(std::abs(sa + sb) <= tol * std::max(1.0, std::abs(sa)))) {
      throw Error(ErrorKind::InvalidArgument,
                  density.describe() + " has a non-antisymmetric score at " + std::to_string(x));
    }
  }
  return SymmetricDensity(density);
}

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - kLogSqrt2Pi - std::log(sd);
}

double normal_pdf(double x, double mean, double sd) { return std::exp(normal_log_pdf(x, mean, sd)); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

Density normal(double mean, double sd) { return Density(std::make_shared<NormalModel>(mean, sd)); }

SymmetricDensity centered_normal(double sd) { return SymmetricDensity::unchecked(normal(0.0, sd)); }

Density uniform(double lo, double hi) { return Density(std::make_shared<UniformModel>(lo, hi)); }

SymmetricDensity centered_uniform(double halfwidth) {
  return SymmetricDensity::unchecked(uniform(-halfwidth, halfwidth));
}

SymmetricDensity student_t(double df, double scale) {
  return SymmetricDensity::unchecked(Density(std::make_shared<StudentTModel>(df, scale)));
}

Density normal_mixture(std::vector<NormalComponent> components) {
  require(!components.empty(), ErrorKind::InvalidArgument, "empty mixture");
  return Density(std::make_shared<MixtureModel>(std::move(components)));
}

SymmetricDensity point_mass_zero() {
  return SymmetricDensity::unchecked(Density(std::make_shared<PointMassModel>()));
}

Density shifted(const Density& density, double shift) {
  if (shift == 0.0) return density;
  return Density(std::make_shared<ShiftedModel>(density, shift));
}

Density custom_density(DensityFunctions functions) {
  return Density(std::make_shared<CustomModel>(std::move(functions)));
}

SymmetricDensity symmetrize(const Density& density) {
  const DensityModel& model = density.model();
  if (model.is_symmetric()) return SymmetricDensity::unchecked(density);
  if (const auto* n = dynamic_cast<const NormalModel*>(&model)) {
    return SymmetricDensity::unchecked(
        Density(std::make_shared<MirroredMixtureModel>(std::vector{NormalComponent{1.0, n->mean(), n->sd()}})));
  }
  if (const auto* m = dynamic_cast<const MixtureModel*>(&model)) {
    return SymmetricDensity::unchecked(Density(std::make_shared<MirroredMixtureModel>(m->components())));
  }
  return SymmetricDensity::unchecked(Density(std::make_shared<SymmetrizedModel>(density)));
}

SymmetricDensity mirrored_normal_mixture(const std::vector<NormalComponent>& atoms) {
  require(!atoms.empty(), ErrorKind::InvalidArgument, "empty mixture");
  return SymmetricDensity::unchecked(Density(std::make_shared<MirroredMixtureModel>(atoms)));
}

Range common_range(const Density& p, const Density& q, const QuadratureScheme& scheme) {
  const Range rp = p.effective_range();
  const Range rq = q.effective_range();
  Range r{std::min(rp.lo, rq.lo), std::max(rp.hi, rq.hi)};
  if (std::isfinite(scheme.truncation_radius)) {
    r.lo = std::max(r.lo, -scheme.truncation_radius);
    r.hi = std::min(r.hi, scheme.truncation_radius);
  }
  return r;
}

double normalization(const Density& p, const QuadratureScheme& scheme) {
  const Range r = common_range(p, p, scheme);
  const auto b = pair_breakpoints(p, p);
  return integrate([&](double x) { return p.pdf(x); }, r.lo, r.hi, b, scheme);
}

double hellinger_sq(const Density& p, const Density& q, const QuadratureScheme& scheme) {
  if (p.model_ptr() == q.model_ptr()) return 0.0;
  const Range r = common_range(p, q, scheme);
  const auto b = pair_breakpoints(p, q);
  const double h2 = integrate(
      [&](double x) {
        const double d = std::exp(0.5 * p.log_pdf(x)) - std::exp(0.5 * q.log_pdf(x));
        return d * d;
      },
      r.lo, r.hi, b, scheme);
  return std::clamp(h2, 0.0, 2.0);
}

double total_variation(const Density& p, const Density& q, const QuadratureScheme& scheme) {
  const Range r = common_range(p, q, scheme);
  auto b = pair_breakpoints(p, q);
  // |p - q| has kinks where the densities cross.
  const auto diff = [&](double x) { return p.pdf(x) - q.pdf(x); };
  const int cells = 4000;
  const double step = (r.hi - r.lo) / cells;
  double prev_x = r.lo, prev = diff(r.lo);
  for (int i = 1; i <= cells; ++i) {
    const double x = r.lo + i * step;
    const double cur = diff(x);
    if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
      double a = prev_x, c = x, fa = prev;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + c);
        const double fm = diff(mid);
        if ((fm < 0.0) == (fa < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          c = mid;
        }
      }
      b.push_back(0.5 * (a + c));
    }
    prev_x = x;
    prev = cur;
  }
  return integrate([&](double x) { return std::abs(diff(x)); }, r.lo, r.hi, b, scheme);
}

KlMoments kl_mean_and_variation(const Density& p, const Density& q, const QuadratureScheme& scheme) {
  if (p.model_ptr() == q.model_ptr()) return {0.0, 0.0};
  const Range r = common_range(p, q, scheme);
  const auto b = pair_breakpoints(p, q);
  auto log_ratio = [&](double x, double lp) {
    const double lq = q.log_pdf(x);
    if (lq == -kInf) {
      throw Error(ErrorKind::DivergenceInfinite,
                  "q vanishes at " + std::to_string(x) + " where p is positive");
    }
    return lp - lq;
  };
  const double k = integrate(
      [&](double x) {
        const double lp = p.log_pdf(x);
        if (lp == -kInf) return 0.0;
        return std::exp(lp) * log_ratio(x, lp);
      },
      r.lo, r.hi, b, scheme);
  const double v = integrate(
      [&](double x) {
        const double lp = p.log_pdf(x);
        if (lp == -kInf) return 0.0;
        const double d = log_ratio(x, lp) - k;
        return std::exp(lp) * d * d;
      },
      r.lo, r.hi, b, scheme);
  return {k, std::max(v, 0.0)};
}

double score_fd_discrepancy(const Density& p, const std::vector<double>& points, double step) {
  double worst = 0.0;
  for (double x : points) {
    const double fd = -(p.log_pdf(x + step) - p.log_pdf(x - step)) / (2.0 * step);
    const double s = p.score(x);
    worst = std::max(worst, std::abs(s - fd) / std::max(1.0, std::abs(s)));
  }
  return worst;
}

}  // namespace symbayes
