#include "parest/quadrature.hpp"

#include <Eigen/Dense>

#include <map>
#include <mutex>
#include <stdexcept>

namespace parest {

namespace {

// Nodes/weights of a Gauss rule from the three-term recurrence
//   p_{k+1} = (x - a_k) p_k - b_k p_{k-1}
// via the Golub-Welsch eigenvalue problem. mu0 is the total mass of the
// weight function.
void golub_welsch(const std::vector<double>& a, const std::vector<double>& b,
                  double mu0, std::vector<double>& points,
                  std::vector<double>& weights) {
  const int n = static_cast<int>(a.size());
  Eigen::VectorXd diag(n), sub(n - 1 > 0 ? n - 1 : 0);
  for (int i = 0; i < n; ++i) diag[i] = a[i];
  for (int i = 0; i + 1 < n; ++i) sub[i] = std::sqrt(b[i + 1]);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("golub_welsch: eigen solve failed");

  points.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    points[i] = es.eigenvalues()[i];
    const double v0 = es.eigenvectors()(0, i);
    weights[i] = mu0 * v0 * v0;
  }
}

// Gauss-Jacobi rule with weight (1-x) on [-1,1].
void gauss_jacobi10(int n, std::vector<double>& points,
                    std::vector<double>& weights) {
  std::vector<double> a(n), b(n, 0.0);
  for (int k = 0; k < n; ++k) {
    a[k] = (k == 0) ? -1.0 / 3.0
                    : -1.0 / double((2 * k + 1) * (2 * k + 3));
    if (k >= 1) b[k] = double(k) * double(k + 1) /
                       (double(2 * k + 1) * double(2 * k + 1));
  }
  golub_welsch(a, b, 2.0, points, weights);
}

}  // namespace

GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  std::vector<double> a(n, 0.0), b(n, 0.0);
  for (int k = 1; k < n; ++k)
    b[k] = double(k) * double(k) / (4.0 * double(k) * double(k) - 1.0);
  GaussRule rule;
  golub_welsch(a, b, 2.0, rule.points, rule.weights);
  return rule;
}

GaussRule gauss_on_interval(int n, double t0, double t1) {
  GaussRule base = gauss_legendre(n);
  const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
  for (int i = 0; i < n; ++i) {
    base.points[i] = mid + half * base.points[i];
    base.weights[i] *= half;
  }
  return base;
}

const TriangleRule& triangle_rule(int degree) {
  static std::map<int, TriangleRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(degree);
  if (it != cache.end()) return it->second;

  const int m = std::max(1, (degree + 2) / 2);  // 2m-1 >= degree

  // Conical product: int_T f = int_0^1 (1-x) int_0^1 f(x, s(1-x)) ds dx,
  // with Gauss-Jacobi(1,0) in x and Gauss-Legendre in s.
  std::vector<double> xj, wj;
  gauss_jacobi10(m, xj, wj);
  GaussRule gl = gauss_legendre(m);

  TriangleRule rule;
  rule.degree = degree;
  rule.points.reserve(static_cast<size_t>(m) * m);
  for (int j = 0; j < m; ++j) {
    const double x = 0.5 * (1.0 + xj[j]);
    for (int i = 0; i < m; ++i) {
      const double s = 0.5 * (1.0 + gl.points[i]);
      const double y = s * (1.0 - x);
      TriangleRule::Point p;
      p.l1 = x;
      p.l2 = y;
      p.l0 = 1.0 - x - y;
      p.w = 0.25 * wj[j] * 0.5 * gl.weights[i];
      rule.points.push_back(p);
    }
  }
  return cache.emplace(degree, std::move(rule)).first->second;
}

}  // namespace parest
