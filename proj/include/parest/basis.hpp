#pragma once

#include "parest/common.hpp"
#include "parest/quadrature.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace parest {

// ---------------------------------------------------------------------------
// Legendre polynomials on [-1,1]
// ---------------------------------------------------------------------------

/// Fills out[0..q] with P_0(x)..P_q(x).
void legendre_values(int q, double x, double* out);
double legendre_value(int q, double x);
double legendre_derivative(int q, double x);

/// Exact value of int_{-1}^{1} P_j'(x) P_k(x) dx  (2 if k<j and j-k odd).
inline double legendre_dphi_phi(int j, int k) {
  return (k < j && (j - k) % 2 == 1) ? 2.0 : 0.0;
}

/// Mapped Legendre polynomials L_q on an interval I=(t0,t1) together with the
/// L2(I)-orthonormal family phi_j = sqrt((2j+1)/tau) L_j. The mapped family
/// satisfies L_q(t1)=1, L_q(t0)=(-1)^q and int_I L_q^2 = tau/(2q+1).
class LegendreTimeBasis {
 public:
  LegendreTimeBasis(double t0, double t1, int degree);

  double t0() const { return t0_; }
  double t1() const { return t1_; }
  double tau() const { return t1_ - t0_; }
  int degree() const { return degree_; }

  double reference_coord(double t) const {
    return (2.0 * t - t0_ - t1_) / (t1_ - t0_);
  }

  double legendre(int q, double t) const;
  double legendre_dt(int q, double t) const;
  double l2_norm_sq(int q) const;

  double orthonormal_scale(int j) const {
    return std::sqrt(double(2 * j + 1) / tau());
  }
  double orthonormal(int j, double t) const {
    return orthonormal_scale(j) * legendre(j, t);
  }
  double orthonormal_dt(int j, double t) const {
    return orthonormal_scale(j) * legendre_dt(j, t);
  }
  /// phi_j at the left endpoint, phi_j(t0) = (-1)^j sqrt((2j+1)/tau).
  double orthonormal_start(int j) const {
    return (j % 2 == 0 ? 1.0 : -1.0) * orthonormal_scale(j);
  }
  double orthonormal_end(int j) const { return orthonormal_scale(j); }

  /// Given coefficients a[0..m] on the mapped Legendre basis, returns the
  /// coefficients of d/dt sum a_m L_m on the same basis (degree m-1).
  std::vector<double> derivative_coeffs(const std::vector<double>& a) const;

 private:
  double t0_, t1_;
  int degree_;
};

// ---------------------------------------------------------------------------
// Scalar hp basis on a triangle
// ---------------------------------------------------------------------------

/// Shape-function set for P_p on a triangle, written in barycentric
/// coordinates so that tables are geometry-independent:
///   vertex i            : l_i
///   edge (a,b), mode k  : l_a l_b P_k(s (l_b - l_a)),  k = 0..pe-2
///   bubble (i,j)        : l_0 l_1 l_2 P_i(l_1-l_0) P_j(2 l_2 - 1), i+j<=p-3
/// Edge signs s come from the global vertex order so traces match across
/// elements; edge degrees pe implement the minimum rule.
struct ScalarBasisSig {
  int p = 1;
  std::array<int, 3> edge_p{1, 1, 1};  // degree carried by each local edge
  std::array<int, 3> edge_sign{1, 1, 1};
  bool operator<(const ScalarBasisSig& o) const {
    if (p != o.p) return p < o.p;
    if (edge_p != o.edge_p) return edge_p < o.edge_p;
    return edge_sign < o.edge_sign;
  }
  int count() const {
    int c = 3;
    for (int e = 0; e < 3; ++e) c += edge_p[e] - 1;
    c += (p - 1) * (p - 2) / 2;
    return c;
  }
};

/// Local edges in order: (0,1), (1,2), (2,0).
inline constexpr int kEdgeVertex[3][2] = {{0, 1}, {1, 2}, {2, 0}};

/// Values and formal barycentric partials of every shape function at one
/// barycentric point. out arrays have sig.count() entries.
void scalar_basis_eval(const ScalarBasisSig& sig, double l0, double l1,
                       double l2, double* val, double* d0, double* d1,
                       double* d2);

/// Tabulated values of a scalar basis at the points of a triangle rule.
struct ScalarBasisTable {
  int nfun = 0, npts = 0;
  Eigen::MatrixXd val, d0, d1, d2;  // nfun x npts
};
const ScalarBasisTable& scalar_basis_table(const ScalarBasisSig& sig,
                                           const TriangleRule& rule);

// ---------------------------------------------------------------------------
// Raviart-Thomas-Nedelec basis on a physical triangle
// ---------------------------------------------------------------------------

/// RTN_p(K) = P_p(K;R^2) + x Pt_p(K), dim (p+1)(p+3). Degrees of freedom are
/// normal moments on the three edges (p+1 each, taken against an orthonormal
/// Legendre family in the arclength parameter oriented by global vertex
/// order, with the edge normal fixed globally as the clockwise rotation of
/// the oriented tangent) followed by interior moments against P_{p-1}(K)^2.
/// Sharing the edge dofs across neighbouring elements yields H(div)
/// conformity.
class RTNElement {
 public:
  /// edge_forward[e] is true when the local orientation of edge e (see
  /// kEdgeVertex) agrees with the global one (lower vertex id first).
  RTNElement(Vec2 v0, Vec2 v1, Vec2 v2, int order,
             std::array<bool, 3> edge_forward);

  int order() const { return p_; }
  int ndofs() const { return (p_ + 1) * (p_ + 3); }
  int edge_dofs() const { return p_ + 1; }
  int interior_dofs() const { return p_ * (p_ + 1); }
  int edge_offset(int e) const { return e * (p_ + 1); }
  int interior_offset() const { return 3 * (p_ + 1); }

  /// Shape function i at physical point x.
  Vec2 shape_value(int i, Vec2 x) const;
  double shape_divergence(int i, Vec2 x) const;

  /// Tabulates all shapes at the given physical points: vx,vy,div are
  /// ndofs x npts.
  void tabulate(const std::vector<Vec2>& pts, Eigen::MatrixXd& vx,
                Eigen::MatrixXd& vy, Eigen::MatrixXd& div) const;

  Vec2 value(const double* coeffs, Vec2 x) const;
  double divergence(const double* coeffs, Vec2 x) const;

  /// Generator-space representation of a dof vector; repeated point
  /// evaluation is cheaper through it.
  Eigen::VectorXd gen_coeffs(const double* coeffs) const;
  Vec2 value_from_gen(const Eigen::VectorXd& gc, Vec2 x) const;
  double divergence_from_gen(const Eigen::VectorXd& gc, Vec2 x) const;

 private:
  int p_;
  Vec2 v_[3];
  Vec2 centroid_;
  double scale_;                 // coordinate scale (diameter)
  Eigen::MatrixXd coeff_;       // generator coefficients of shapes (ngen x ndof)

  int ngen() const { return ndofs(); }
  Vec2 gen_value(int g, Vec2 x) const;
  double gen_divergence(int g, Vec2 x) const;
};

}  // namespace parest
