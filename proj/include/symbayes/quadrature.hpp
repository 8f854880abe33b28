#ifndef SYMBAYES_QUADRATURE_HPP
#define SYMBAYES_QUADRATURE_HPP

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace symbayes {

// Nodes and weights of a one-dimensional rule.
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

// Gauss-Legendre rule on [lo, hi]. Nodes are cached per count on [-1, 1].
QuadratureRule gauss_legendre(int node_count, double lo = -1.0, double hi = 1.0);

// Gauss-Hermite rule for the standard normal weight: sum_i w_i f(x_i) ~ E f(Z).
// Weights sum to one.
QuadratureRule gauss_hermite_normal(int node_count);

// Composite trapezoid with node_count equally spaced points on [lo, hi].
QuadratureRule trapezoid(int node_count, double lo, double hi);

struct QuadratureScheme {
  enum class Kind { GaussLegendre, CompositeTrapezoid };

  Kind kind = Kind::GaussLegendre;
  int node_count = 256;
  // Replaces the densities' own tail radius when finite.
  double truncation_radius = std::numeric_limits<double>::infinity();
  // Agreement required between node_count and 2*node_count on each panel.
  double tolerance = 1e-9;
  // Panels that fail the agreement check are bisected at most this many times.
  int max_bisections = 12;

  static QuadratureScheme gauss_legendre(int nodes = 256) { return {Kind::GaussLegendre, nodes}; }
  static QuadratureScheme trapezoid(int nodes = 4097) {
    QuadratureScheme s{Kind::CompositeTrapezoid, nodes};
    s.tolerance = 1e-7;
    return s;
  }
};

// Integrates f over [lo, hi], splitting at the given breakpoints.
// Throws Error(ImpreciseIntegration) when refinement cannot meet the tolerance.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 std::span<const double> breakpoints, const QuadratureScheme& scheme);

inline double integrate(const std::function<double(double)>& f, double lo, double hi,
                        const QuadratureScheme& scheme) {
  return integrate(f, lo, hi, {}, scheme);
}

// Panel boundaries used by integrate(): breakpoints inside (lo, hi) plus
// decade splits at +-10, +-100, ... so that heavy tails get their own panels.
std::vector<double> panel_edges(double lo, double hi, std::span<const double> breakpoints);

}  // namespace symbayes

#endif  // SYMBAYES_QUADRATURE_HPP
