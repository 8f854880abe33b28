#include "symbayes/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "symbayes/error.hpp"

namespace symbayes {
namespace {

QuadratureRule compute_gauss_legendre(int n) {
  QuadratureRule rule{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

const QuadratureRule& cached_gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
QuadratureRule compute_gauss_hermite(int n) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  QuadratureRule rule{solver.eigenvalues(), solver.eigenvectors().row(0).transpose().array().square()};
  rule.weights /= rule.weights.sum();
  return rule;
}

double apply_rule(const std::function<double(double)>& f, const QuadratureRule& unit, double lo,
                  double hi) {
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < unit.nodes.size(); ++i) {
    sum += unit.weights[i] * f(mid + half * unit.nodes[i]);
  }
  return half * sum;
}

double panel_estimate(const std::function<double(double)>& f, const QuadratureScheme& scheme,
                      int nodes, double lo, double hi) {
  if (scheme.kind == QuadratureScheme::Kind::GaussLegendre) {
    return apply_rule(f, cached_gauss_legendre(nodes), lo, hi);
  }
  const QuadratureRule rule = trapezoid(nodes, lo, hi);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(rule.nodes[i]);
  return sum;
}

double integrate_panel(const std::function<double(double)>& f, const QuadratureScheme& scheme,
                       double lo, double hi, double abs_tol, int depth) {
  const int n = scheme.node_count;
  const int fine = scheme.kind == QuadratureScheme::Kind::GaussLegendre ? 2 * n : 2 * n - 1;
  const double coarse_value = panel_estimate(f, scheme, n, lo, hi);
  const double fine_value = panel_estimate(f, scheme, fine, lo, hi);
  if (!std::isfinite(fine_value)) {
    throw Error(ErrorKind::ImpreciseIntegration, "non-finite integrand on panel");
  }
  const double diff = std::abs(fine_value - coarse_value);
  if (diff <= std::max(abs_tol, scheme.tolerance * std::abs(fine_value))) return fine_value;
  if (depth >= scheme.max_bisections) {
    throw Error(ErrorKind::ImpreciseIntegration,
                "node doubling disagrees by " + std::to_string(diff) + " on [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  const double mid = 0.5 * (lo + hi);
  return integrate_panel(f, scheme, lo, mid, 0.5 * abs_tol, depth + 1) +
         integrate_panel(f, scheme, mid, hi, 0.5 * abs_tol, depth + 1);
}

}  // namespace

QuadratureRule gauss_legendre(int node_count, double lo, double hi) {
  require(node_count >= 1, ErrorKind::InvalidArgument, "node_count must be positive");
  QuadratureRule rule = cached_gauss_legendre(node_count);
  const double half = 0.5 * (hi - lo);
  rule.nodes = (rule.nodes.array() * half + 0.5 * (hi + lo)).matrix();
  rule.weights *= half;
  return rule;
}

QuadratureRule gauss_hermite_normal(int node_count) {
  require(node_count >= 1, ErrorKind::InvalidArgument, "node_count must be positive");
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(node_count);
  if (it == cache.end()) it = cache.emplace(node_count, compute_gauss_hermite(node_count)).first;
  return it->second;
}

QuadratureRule trapezoid(int node_count, double lo, double hi) {
  require(node_count >= 2, ErrorKind::InvalidArgument, "trapezoid needs at least two nodes");
  QuadratureRule rule{Eigen::VectorXd::LinSpaced(node_count, lo, hi),
                      Eigen::VectorXd::Constant(node_count, (hi - lo) / (node_count - 1))};
  rule.weights[0] *= 0.5;
  rule.weights[node_count - 1] *= 0.5;
  return rule;
}

std::vector<double> panel_edges(double lo, double hi, std::span<const double> breakpoints) {
  std::vector<double> edges{lo, hi};
  for (double b : breakpoints) {
    if (b > lo && b < hi) edges.push_back(b);
  }
  if (lo < 0.0 && hi > 0.0) edges.push_back(0.0);
  for (double decade = 10.0; decade < std::max(std::abs(lo), std::abs(hi)); decade *= 10.0) {
    if (decade < hi) edges.push_back(decade);
    if (-decade > lo) edges.push_back(-decade);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

double integrate(const std::function<double(double)>& f, double lo, double hi,
                 std::span<const double> breakpoints, const QuadratureScheme& scheme) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, ErrorKind::InvalidArgument,
          "integration interval must be finite and nonempty");
  const std::vector<double> edges = panel_edges(lo, hi, breakpoints);
  const double total = hi - lo;
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double len = edges[k + 1] - edges[k];
    sum += integrate_panel(f, scheme, edges[k], edges[k + 1], scheme.tolerance * len / total, 0);
  }
  return sum;
}

}  // namespace symbayes
