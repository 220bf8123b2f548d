#pragma once

#include "parest/solver.hpp"

#include <array>
#include <utility>
#include <vector>

namespace parest {

/// Vertex patches of one interval plus, for every element of the common
/// refinement mesh, the three patches it belongs to (one per vertex of its
/// containing coarse element) with the element's position inside each patch.
struct IntervalPatches {
  std::vector<Patch> patches;
  std::vector<std::array<std::pair<int, int>, 3>> elem_patches;
};
IntervalPatches build_interval_patches(const Discretization& disc, int n);

/// Radau reconstruction of the numerical solution together with the temporal
/// jump fields, all evaluated on the common refinement meshes. On interval n,
///   I u = u + ((-1)^q / 2) (L_q - L_{q+1}) [[u]]_{n-1},
/// which matches u(t_{n-1}) at the left endpoint and u(t_n) at the right.
class Reconstruction {
 public:
  Reconstruction(const Discretization& disc, const DiscreteSolution& sol);

  const Discretization& disc() const { return *disc_; }
  const DiscreteSolution& solution() const { return *sol_; }

  /// Solution modes (orthonormal basis, j = 0..q_n) and the jump field at
  /// t_{n-1}, evaluated at x inside element e of the common refinement.
  struct PointModes {
    std::vector<FieldEval> u;
    FieldEval jump;
  };
  PointModes point_modes(int n, int e, Vec2 x) const;

  /// Jump field alone: u(t_{n-1}) - u(t_{n-1}^+) at x in tilde element e.
  FieldEval jump(int n, int e, Vec2 x) const;

  /// Mapped-Legendre coefficients of I u on interval n (m = 0..q_n+1).
  std::vector<FieldEval> iu_legendre(int n, const PointModes& pm) const;
  /// Mapped-Legendre coefficients of dt I u (k = 0..q_n).
  std::vector<FieldEval> dtiu_legendre(int n, const PointModes& pm) const;
  /// Orthonormal-basis moments of dt I u (j = 0..q_n).
  std::vector<FieldEval> dtiu_orthonormal(int n, const PointModes& pm) const;

  FieldEval u_at(int n, const PointModes& pm, double t) const;
  FieldEval iu_at(int n, const PointModes& pm, double t) const;
  FieldEval dtiu_at(int n, const PointModes& pm, double t) const;

 private:
  const Discretization* disc_;
  const DiscreteSolution* sol_;
  std::vector<Eigen::VectorXd> prev_end_;  // u(t_{n-1}) in V^{n-1}
  std::vector<Eigen::VectorXd> start_;     // u(t_{n-1}^+) in V^n
};

/// Weighted projection of the source onto Q_{q_n}(I_n; P_{p_a-1}) over one
/// patch: per temporal mode, the psi_a-weighted normal equations are solved
/// elementwise on the submesh.
class PatchDataProjection {
 public:
  PatchDataProjection(const Discretization& disc, int n, const Patch& patch,
                      const SourceMoments& f);

  int degree() const { return degree_; }  // p_a - 1
  int n_modes() const { return n_modes_; }
  /// Value of mode j of Pi^{a,n} f at x inside patch element i.
  double evaluate(int i, int j, Vec2 x) const;

 private:
  const MeshLevel* fine_;
  const Patch* patch_;
  int degree_, n_modes_, block_;
  std::vector<std::pair<int, int>> monos_;
  std::vector<Vec2> centroid_;
  std::vector<double> scale_;
  std::vector<Eigen::MatrixXd> coeff_;  // per element: block x modes
};

/// All patch projections of one interval plus the assembled approximation
/// f_htau = sum_a psi_a Pi^{a,n} f.
class DataApprox {
 public:
  DataApprox(const Discretization& disc, int n, const SourceMoments& f,
             const IntervalPatches& ip);

  int n_modes() const { return n_modes_; }
  const PatchDataProjection& projection(int a) const { return proj_[a]; }

  /// Mode j of f_htau at x inside tilde element e.
  double f_htau_mode(int e, int j, Vec2 x) const;
  /// f_htau value at (x, t).
  double f_htau(int e, Vec2 x, double t) const;

 private:
  const Discretization* disc_;
  int n_, n_modes_;
  const IntervalPatches* ip_;
  std::vector<PatchDataProjection> proj_;
};

}  // namespace parest
