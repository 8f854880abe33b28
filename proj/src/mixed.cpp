#include "symbayes/mixed.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "symbayes/csv.hpp"
#include "symbayes/error.hpp"

namespace symbayes {

MixedDataset::MixedDataset(Eigen::MatrixXd responses, std::vector<Eigen::MatrixXd> fixed,
                           std::vector<Eigen::MatrixXd> random, std::optional<MixedTruth> truth)
    : responses_(std::move(responses)), fixed_(std::move(fixed)), random_(std::move(random)),
      truth_(std::move(truth)) {
  const Eigen::Index n = responses_.rows();
  const Eigen::Index m = responses_.cols();
  require(n >= 1 && m >= 1, ErrorKind::InvalidArgument, "need at least one group and observation");
  require(static_cast<Eigen::Index>(fixed_.size()) == n && static_cast<Eigen::Index>(random_.size()) == n,
          ErrorKind::InvalidArgument, "one Z_i and W_i per group required");
  const Eigen::Index p = fixed_.front().rows();
  const Eigen::Index q = random_.front().rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    require(fixed_[i].rows() == p && fixed_[i].cols() == m, ErrorKind::InvalidArgument,
            "Z_i must be p x m with equal group sizes");
    require(random_[i].rows() == q && random_[i].cols() == m, ErrorKind::InvalidArgument,
            "W_i must be q x m with equal group sizes");
    covariate_bound_ =
        std::max({covariate_bound_, fixed_[i].cwiseAbs().maxCoeff(), random_[i].cwiseAbs().maxCoeff()});
  }
  if (truth_) {
    require(truth_->theta.size() == p, ErrorKind::InvalidArgument, "truth dimension does not match Z");
  }
}

bool MixedDataset::is_random_intercept() const {
  if (effect_dim() != 1) return false;
  return std::all_of(random_.begin(), random_.end(),
                     [](const Eigen::MatrixXd& w) { return (w.array() == 1.0).all(); });
}

RegressionDataset MixedDataset::stacked() const {
  const Eigen::Index n = groups(), m = group_size(), p = dim();
  Eigen::VectorXd x(n * m);
  Eigen::MatrixXd z(n * m, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      x[i * m + j] = responses_(i, j);
      z.row(i * m + j) = fixed_[i].col(j).transpose();
    }
  }
  return RegressionDataset(std::move(x), std::move(z));
}

DesignPatternSummary design_patterns(const MixedDataset& data) {
  std::map<std::vector<double>, std::size_t> counts;
  for (Eigen::Index i = 0; i < data.groups(); ++i) {
    const auto& w = data.random(i);
    counts[std::vector<double>(w.data(), w.data() + w.size())]++;
  }
  std::size_t min_count = static_cast<std::size_t>(data.groups());
  for (const auto& [pattern, count] : counts) min_count = std::min(min_count, count);
  return {counts.size(), static_cast<double>(min_count) / static_cast<double>(data.groups())};
}

bool satisfies_design_floor(const MixedDataset& data, double floor) {
  return design_patterns(data).min_frequency >= floor;
}

RandomEffectLaw RandomEffectLaw::gaussian(double variance) {
  return gaussian(Eigen::MatrixXd::Constant(1, 1, variance));
}

RandomEffectLaw RandomEffectLaw::gaussian(Eigen::MatrixXd covariance) {
  require(covariance.rows() == covariance.cols() && covariance.rows() >= 1, ErrorKind::InvalidArgument,
          "covariance must be square");
  RandomEffectLaw g;
  g.kind = Kind::Gaussian;
  g.covariance = std::move(covariance);
  return g;
}

RandomEffectLaw RandomEffectLaw::point_mass(Eigen::Index q) {
  RandomEffectLaw g;
  g.kind = Kind::PointMass;
  g.covariance = Eigen::MatrixXd::Zero(q, q);
  return g;
}

RandomEffectLaw RandomEffectLaw::truncated_gaussian(Eigen::MatrixXd covariance, double bound) {
  RandomEffectLaw g = gaussian(std::move(covariance));
  require(bound > 0.0, ErrorKind::InvalidArgument, "truncation bound must be positive");
  g.kind = Kind::TruncatedGaussian;
  g.bound = bound;
  return g;
}

RandomEffectLaw RandomEffectLaw::symmetric_discrete(std::vector<Eigen::VectorXd> atoms,
                                                    std::vector<double> weights) {
  require(!atoms.empty() && atoms.size() == weights.size(), ErrorKind::InvalidArgument,
          "discrete law needs matching atoms and weights");
  RandomEffectLaw g;
  g.kind = Kind::SymmetricDiscrete;
  const double total = [&] {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }();
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    require(atoms[k].size() == atoms.front().size(), ErrorKind::InvalidArgument, "atoms differ in dimension");
    g.atoms.push_back(atoms[k]);
    g.weights.push_back(0.5 * weights[k] / total);
    g.atoms.push_back(-atoms[k]);
    g.weights.push_back(0.5 * weights[k] / total);
  }
  g.bound = 0.0;
  for (const auto& a : g.atoms) g.bound = std::max(g.bound, a.cwiseAbs().maxCoeff());
  g.covariance = Eigen::MatrixXd::Zero(atoms.front().size(), atoms.front().size());
  return g;
}

Eigen::Index RandomEffectLaw::dim() const {
  if (kind == Kind::SymmetricDiscrete) return atoms.front().size();
  return covariance.rows();
}

Eigen::VectorXd RandomEffectLaw::sample(Rng& rng) const {
  const Eigen::Index q = dim();
  switch (kind) {
    case Kind::PointMass:
      return Eigen::VectorXd::Zero(q);
    case Kind::SymmetricDiscrete: {
      double u = uniform01(rng);
      for (std::size_t k = 0; k < atoms.size(); ++k) {
        if (u < weights[k]) return atoms[k];
        u -= weights[k];
      }
      return atoms.back();
    }
    case Kind::Gaussian:
    case Kind::TruncatedGaussian: {
      const Eigen::MatrixXd chol = covariance.llt().matrixL();
      for (;;) {
        Eigen::VectorXd z(q);
        for (Eigen::Index k = 0; k < q; ++k) z[k] = std_normal(rng);
        Eigen::VectorXd b = chol * z;
        if (kind == Kind::Gaussian || b.cwiseAbs().maxCoeff() <= bound) return b;
      }
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown random-effect law");
}

namespace {

// Integration nodes b_k with log weights; the weights sum to one.
struct EffectNodes {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> log_weights;
  bool refinable = false;
};

EffectNodes effect_nodes(const RandomEffectLaw& g, const PsiIntegrator& integ, int nodes) {
  EffectNodes out;
  const Eigen::Index q = g.dim();
  if (g.kind == RandomEffectLaw::Kind::PointMass ||
      (g.kind == RandomEffectLaw::Kind::Gaussian && g.covariance.isZero(0.0))) {
    out.points.push_back(Eigen::VectorXd::Zero(q));
    out.log_weights.push_back(0.0);
    return out;
  }
  if (g.kind == RandomEffectLaw::Kind::SymmetricDiscrete) {
    for (std::size_t k = 0; k < g.atoms.size(); ++k) {
      out.points.push_back(g.atoms[k]);
      out.log_weights.push_back(std::log(g.weights[k]));
    }
    return out;
  }
  if (q == 1) {
    const double sd = std::sqrt(g.covariance(0, 0));
    out.refinable = true;
    if (g.kind == RandomEffectLaw::Kind::Gaussian) {
      const QuadratureRule rule = gauss_hermite_normal(nodes);
      for (int k = 0; k < nodes; ++k) {
        out.points.push_back(Eigen::VectorXd::Constant(1, sd * rule.nodes[k]));
        out.log_weights.push_back(std::log(rule.weights[k]));
      }
    } else {
      const QuadratureRule rule = gauss_legendre(nodes, -g.bound, g.bound);
      double total = 0.0;
      for (int k = 0; k < nodes; ++k) total += rule.weights[k] * normal_pdf(rule.nodes[k], 0.0, sd);
      for (int k = 0; k < nodes; ++k) {
        out.points.push_back(Eigen::VectorXd::Constant(1, rule.nodes[k]));
        out.log_weights.push_back(std::log(rule.weights[k]) + normal_log_pdf(rule.nodes[k], 0.0, sd) -
                                  std::log(total));
      }
    }
    return out;
  }
  Rng rng(integ.mc_seed);
  const double lw = -std::log(2.0 * integ.mc_pairs);
  for (int k = 0; k < integ.mc_pairs; ++k) {
    const Eigen::VectorXd b = g.sample(rng);
    out.points.push_back(b);
    out.points.push_back(-b);
    out.log_weights.push_back(lw);
    out.log_weights.push_back(lw);
  }
  return out;
}

// Per-node log of w_k prod_j f(y_j - b_k^T w_j).
std::vector<double> node_log_terms(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Density& f,
                                   const EffectNodes& nodes) {
  std::vector<double> terms(nodes.points.size());
  for (std::size_t k = 0; k < nodes.points.size(); ++k) {
    const Eigen::VectorXd shift = w.transpose() * nodes.points[k];
    double s = nodes.log_weights[k];
    for (Eigen::Index j = 0; j < y.size() && s > -kInf; ++j) s += f.log_pdf(y[j] - shift[j]);
    terms[k] = s;
  }
  return terms;
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void check_inputs(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const RandomEffectLaw& g) {
  require(w.cols() == y.size(), ErrorKind::InvalidArgument, "w must have one column per observation");
  require(w.rows() == g.dim(), ErrorKind::InvalidArgument, "w rows must match random-effect dimension");
}

}  // namespace

double psi_log_density(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Density& f,
                       const RandomEffectLaw& g, const PsiIntegrator& integrator) {
  check_inputs(y, w, g);
  const EffectNodes nodes = effect_nodes(g, integrator, integrator.nodes);
  const double value = log_sum_exp(node_log_terms(y, w, f, nodes));
  if (nodes.refinable && integrator.check_refinement && value > -kInf) {
    const EffectNodes fine = effect_nodes(g, integrator, 2 * integrator.nodes);
    const double fine_value = log_sum_exp(node_log_terms(y, w, f, fine));
    const double rel = std::abs(std::expm1(value - fine_value));
    if (!(rel <= integrator.refinement_tolerance)) {
      throw Error(ErrorKind::ImpreciseIntegration,
                  "psi refinement levels disagree by " + std::to_string(rel));
    }
    return fine_value;
  }
  return value;
}

Eigen::VectorXd psi_score(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Density& f,
                          const RandomEffectLaw& g, const PsiIntegrator& integrator) {
  check_inputs(y, w, g);
  auto evaluate = [&](int count, double& log_psi) {
    const EffectNodes nodes = effect_nodes(g, integrator, count);
    const std::vector<double> terms = node_log_terms(y, w, f, nodes);
    log_psi = log_sum_exp(terms);
    if (log_psi == -kInf) throw Error(ErrorKind::OutOfSupport, "psi vanishes at y");
    Eigen::VectorXd s = Eigen::VectorXd::Zero(y.size());
    for (std::size_t k = 0; k < nodes.points.size(); ++k) {
      const double post = std::exp(terms[k] - log_psi);
      if (post == 0.0) continue;
      const Eigen::VectorXd shift = w.transpose() * nodes.points[k];
      for (Eigen::Index j = 0; j < y.size(); ++j) s[j] += post * f.score(y[j] - shift[j]);
    }
    return std::pair{s, nodes.refinable};
  };
  double log_psi = 0.0;
  auto [score, refinable] = evaluate(integrator.nodes, log_psi);
  if (refinable && integrator.check_refinement) {
    double fine_log_psi = 0.0;
    auto [fine_score, unused] = evaluate(2 * integrator.nodes, fine_log_psi);
    (void)unused;
    const double rel = std::abs(std::expm1(log_psi - fine_log_psi));
    const double score_diff = (score - fine_score).norm() / std::max(1.0, fine_score.norm());
    if (!(rel <= integrator.refinement_tolerance) || !(score_diff <= integrator.refinement_tolerance)) {
      throw Error(ErrorKind::ImpreciseIntegration,
                  "psi score refinement levels disagree by " + std::to_string(std::max(rel, score_diff)));
    }
    return fine_score;
  }
  return score;
}

double loglik_mixed(const MixedDataset& data, const Eigen::VectorXd& theta, const Density& f,
                    const RandomEffectLaw& g, const PsiIntegrator& integrator) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < data.groups(); ++i) {
    sum += psi_log_density(data.residual(i, theta), data.random(i), f, g, integrator);
    if (sum == -kInf) return sum;
  }
  return sum;
}

Eigen::VectorXd score_mixed(const MixedDataset& data, const Eigen::VectorXd& theta, const Density& f,
                            const RandomEffectLaw& g, const PsiIntegrator& integrator) {
  Eigen::VectorXd score = Eigen::VectorXd::Zero(data.dim());
  for (Eigen::Index i = 0; i < data.groups(); ++i) {
    score += data.fixed(i) * psi_score(data.residual(i, theta), data.random(i), f, g, integrator);
  }
  return score;
}

MixedDataset generate_mixed(Eigen::Index groups, Eigen::Index group_size, const Eigen::VectorXd& theta0,
                            double random_effect_variance, const SymmetricDensity& law, Rng& rng) {
  require(groups >= 1 && group_size >= 1, ErrorKind::InvalidArgument, "need n, m >= 1");
  require(random_effect_variance >= 0.0, ErrorKind::InvalidArgument, "sigma_b^2 must be nonnegative");
  const Eigen::Index p = theta0.size();
  const double sd_b = std::sqrt(random_effect_variance);
  std::bernoulli_distribution coin(0.5);
  Eigen::MatrixXd x(groups, group_size);
  std::vector<Eigen::MatrixXd> fixed(groups, Eigen::MatrixXd(p, group_size));
  std::vector<Eigen::MatrixXd> random(groups, Eigen::MatrixXd::Ones(1, group_size));
  for (Eigen::Index i = 0; i < groups; ++i) {
    for (Eigen::Index j = 0; j < group_size; ++j)
      for (Eigen::Index k = 0; k < p; ++k) fixed[i](k, j) = coin(rng) ? 1.0 : 0.0;
    const double b = sd_b > 0.0 ? sd_b * std_normal(rng) : 0.0;
    for (Eigen::Index j = 0; j < group_size; ++j) {
      x(i, j) = fixed[i].col(j).dot(theta0) + b + law.sample(rng);
    }
  }
  return MixedDataset(std::move(x), std::move(fixed), std::move(random),
                      MixedTruth{theta0, random_effect_variance, law.describe()});
}

void write_mixed_csv(std::ostream& out, const MixedDataset& data) {
  std::vector<std::string> header{"group", "j", "x"};
  for (Eigen::Index k = 0; k < data.dim(); ++k) header.push_back("z" + std::to_string(k + 1));
  for (Eigen::Index k = 0; k < data.effect_dim(); ++k) header.push_back("w" + std::to_string(k + 1));
  CsvTable table(header);
  for (Eigen::Index i = 0; i < data.groups(); ++i) {
    for (Eigen::Index j = 0; j < data.group_size(); ++j) {
      std::vector<double> row{static_cast<double>(i), static_cast<double>(j), data.responses()(i, j)};
      for (Eigen::Index k = 0; k < data.dim(); ++k) row.push_back(data.fixed(i)(k, j));
      for (Eigen::Index k = 0; k < data.effect_dim(); ++k) row.push_back(data.random(i)(k, j));
      table.add_row(row);
    }
  }
  table.write(out);
}

MixedDataset read_mixed_csv(std::istream& in) {
  const CsvTable table = CsvTable::read(in);
  const auto& header = table.header();
  require(header.size() >= 5 && header[0] == "group" && header[1] == "j" && header[2] == "x",
          ErrorKind::IoError, "mixed CSV must start with group,j,x");
  Eigen::Index p = 0, q = 0;
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (header[c] == "z" + std::to_string(p + 1) && q == 0) {
      ++p;
    } else if (header[c] == "w" + std::to_string(q + 1)) {
      ++q;
    } else {
      throw Error(ErrorKind::IoError, "unexpected column '" + header[c] + "'");
    }
  }
  require(p >= 1 && q >= 1, ErrorKind::IoError, "mixed CSV needs z and w columns");
  Eigen::Index groups = 0, m = 0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    groups = std::max(groups, static_cast<Eigen::Index>(table.at(r, 0)) + 1);
    m = std::max(m, static_cast<Eigen::Index>(table.at(r, 1)) + 1);
  }
  require(static_cast<Eigen::Index>(table.rows()) == groups * m, ErrorKind::IoError,
          "mixed CSV must have equal group sizes");
  Eigen::MatrixXd x(groups, m);
  std::vector<Eigen::MatrixXd> fixed(groups, Eigen::MatrixXd(p, m));
  std::vector<Eigen::MatrixXd> random(groups, Eigen::MatrixXd(q, m));
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto i = static_cast<Eigen::Index>(table.at(r, 0));
    const auto j = static_cast<Eigen::Index>(table.at(r, 1));
    x(i, j) = table.at(r, 2);
    for (Eigen::Index k = 0; k < p; ++k) fixed[i](k, j) = table.at(r, 3 + k);
    for (Eigen::Index k = 0; k < q; ++k) random[i](k, j) = table.at(r, 3 + p + k);
  }
  return MixedDataset(std::move(x), std::move(fixed), std::move(random));
}

}  // namespace symbayes
