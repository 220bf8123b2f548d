#pragma once

#include <vector>

namespace parest {

/// Gauss-Legendre rule with n points on [-1,1]; exact through degree 2n-1.
struct GaussRule {
  std::vector<double> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

GaussRule gauss_legendre(int n);

/// Gauss-Legendre rule mapped to (a,b).
GaussRule gauss_on_interval(int n, double a, double b);

/// Quadrature on the reference triangle {l0,l1,l2 >= 0, sum = 1}, stored in
/// barycentric coordinates. Weights sum to 1/2; integration over a physical
/// triangle K multiplies each weight by 2*|K|.
struct TriangleRule {
  struct Point {
    double l0, l1, l2, w;
  };
  std::vector<Point> points;
  int degree = 0;
  int size() const { return static_cast<int>(points.size()); }
};

/// Conical-product rule exact for polynomials of total degree <= degree.
/// Results are cached; the returned reference stays valid for the program
/// lifetime.
const TriangleRule& triangle_rule(int degree);

}  // namespace parest
