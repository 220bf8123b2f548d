#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "parest/quadrature.hpp"

#include <cmath>

using namespace parest;

namespace {
double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}
// int over the reference triangle of x^i y^j
double tri_monomial_exact(int i, int j) {
  return factorial(i) * factorial(j) / factorial(i + j + 2);
}
}  // namespace

TEST_CASE("gauss-legendre integrates monomials exactly") {
  for (int n = 1; n <= 12; ++n) {
    GaussRule r = gauss_legendre(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int i = 0; i < r.size(); ++i)
        s += r.weights[i] * std::pow(r.points[i], k);
      const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      CHECK(std::abs(s - exact) <= 1e-13 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST_CASE("gauss rule maps to arbitrary intervals") {
  GaussRule r = gauss_on_interval(6, 0.25, 0.75);
  double s = 0.0, s3 = 0.0;
  for (int i = 0; i < r.size(); ++i) {
    s += r.weights[i];
    s3 += r.weights[i] * std::pow(r.points[i], 3);
  }
  CHECK(s == doctest::Approx(0.5).epsilon(1e-14));
  const double exact = (std::pow(0.75, 4) - std::pow(0.25, 4)) / 4.0;
  CHECK(s3 == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("triangle rules integrate monomials to declared degree") {
  for (int deg = 1; deg <= 16; ++deg) {
    const TriangleRule& rule = triangle_rule(deg);
    for (int i = 0; i + 0 <= deg; ++i)
      for (int j = 0; i + j <= deg; ++j) {
        double s = 0.0;
        for (const auto& p : rule.points)
          s += p.w * std::pow(p.l1, i) * std::pow(p.l2, j);
        const double exact = tri_monomial_exact(i, j);
        CHECK(std::abs(s - exact) <= 1e-13 * std::max(1.0, std::abs(exact)));
      }
  }
}

TEST_CASE("triangle rule weights are positive and sum to the area") {
  for (int deg : {2, 7, 12}) {
    const TriangleRule& rule = triangle_rule(deg);
    double s = 0.0;
    for (const auto& p : rule.points) {
      CHECK(p.w > 0.0);
      s += p.w;
    }
    CHECK(s == doctest::Approx(0.5).epsilon(1e-14));
  }
}

TEST_CASE("invalid rule sizes are rejected") {
  CHECK_THROWS(gauss_legendre(0));
}
