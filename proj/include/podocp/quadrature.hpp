#ifndef PODOCP_QUADRATURE_HPP
#define PODOCP_QUADRATURE_HPP

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace podocp {

/// Quadrature on the reference triangle {(s,t): s,t >= 0, s+t <= 1}.
/// Weights sum to the reference area 1/2.
struct TriangleRule {
  std::vector<Eigen::Vector2d> points;
  std::vector<double> weights;
};

/// Exact for polynomials of total degree 2.
inline const TriangleRule& triangle_rule_degree2() {
  static const TriangleRule rule{
      {{1.0 / 6.0, 1.0 / 6.0}, {2.0 / 3.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 3.0}},
      {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0}};
  return rule;
}

/// Six-point symmetric rule, exact for total degree 4.
inline const TriangleRule& triangle_rule_degree4() {
  static const TriangleRule rule = [] {
    const double a = 0.44594849091596488632;
    const double wa = 0.22338158967801146570;
    const double b = 0.09157621350977074346;
    const double wb = 0.10995174365532186764;
    TriangleRule r;
    r.points = {{a, a}, {1.0 - 2.0 * a, a}, {a, 1.0 - 2.0 * a},
                {b, b}, {1.0 - 2.0 * b, b}, {b, 1.0 - 2.0 * b}};
    r.weights = {0.5 * wa, 0.5 * wa, 0.5 * wa, 0.5 * wb, 0.5 * wb, 0.5 * wb};
    return r;
  }();
  return rule;
}

/// Three-point Gauss rule on [0,1], exact for degree 5.
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};

inline const LineRule& line_rule_gauss3() {
  static const LineRule rule{{0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)},
                             {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
  return rule;
}

}  // namespace podocp

#endif  // PODOCP_QUADRATURE_HPP
