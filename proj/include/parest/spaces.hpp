#pragma once

#include "parest/basis.hpp"
#include "parest/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <vector>

namespace parest {

using SpMat = Eigen::SparseMatrix<double>;

struct FieldEval {
  double value = 0.0;
  Vec2 grad{0.0, 0.0};
};

/// H1-conforming hp finite element space with per-element degrees. Shared
/// edges carry the minimum of the adjacent degrees; with `dirichlet` the
/// space is constrained to vanish on the domain boundary.
class HpSpace {
 public:
  HpSpace(MeshLevel mesh, std::vector<int> degrees, bool dirichlet = true);
  HpSpace(MeshLevel mesh, int degree, bool dirichlet = true);

  const MeshLevel& mesh() const { return mesh_; }
  bool dirichlet() const { return dirichlet_; }
  int n_dofs() const { return n_dofs_; }
  int degree(int k) const { return degrees_[k]; }
  const std::vector<int>& degrees() const { return degrees_; }
  int max_degree() const { return max_degree_; }
  int edge_degree(int e) const { return edge_degree_[e]; }

  const ScalarBasisSig& signature(int k) const { return sig_[k]; }
  /// Local-to-global dof map; -1 marks Dirichlet-constrained functions.
  const std::vector<int>& element_dofs(int k) const { return elem_dofs_[k]; }

  /// Closed-form dimension from the vertex/edge/interior counts.
  int dimension_formula() const;

  FieldEval evaluate(const Eigen::VectorXd& coeffs, int elem, Vec2 x) const;

  /// Values/gradients of all local shape functions of element `elem` at a
  /// physical point. Buffers are resized as needed.
  void basis_at_point(int elem, Vec2 x, std::vector<double>& val,
                      std::vector<Vec2>& grad) const;

 private:
  void build();

  MeshLevel mesh_;
  std::vector<int> degrees_;
  bool dirichlet_;
  int n_dofs_ = 0;
  int max_degree_ = 1;
  std::vector<int> edge_degree_;
  std::vector<ScalarBasisSig> sig_;
  std::vector<std::vector<int>> elem_dofs_;
};

SpMat assemble_stiffness(const HpSpace& space, int quad_degree = -1);
SpMat assemble_mass(const HpSpace& space, int quad_degree = -1);

/// Load vector (f, N_i) by quadrature on the space's own mesh.
Eigen::VectorXd assemble_load(const HpSpace& space,
                              const std::function<double(Vec2)>& f,
                              int quad_degree);

/// Load vector (f, N_i) integrated over a refinement `on` of the space's
/// mesh; `anc` maps elements of `on` to containing elements of the space's
/// mesh and f is sampled per fine element.
Eigen::VectorXd assemble_load_on_mesh(
    const HpSpace& space, const MeshLevel& on, const std::vector<int>& anc,
    const std::function<double(int, Vec2)>& f, int quad_degree);

/// Gradient load (g, grad N_i) with a vector-valued density g sampled on a
/// refinement of the space's mesh.
Eigen::VectorXd assemble_gradient_load_on_mesh(
    const HpSpace& space, const MeshLevel& on, const std::vector<int>& anc,
    const std::function<Vec2(int, Vec2)>& g, int quad_degree);

/// Several load vectors in one sweep: f fills out[0..ncomp) with the
/// densities at (fine element, point). Returns n_dofs x ncomp.
Eigen::MatrixXd assemble_loads_on_mesh(
    const HpSpace& space, const MeshLevel& on, const std::vector<int>& anc,
    const std::function<void(int, Vec2, double*)>& f, int ncomp,
    int quad_degree);

// ---------------------------------------------------------------------------
// Patch mixed space
// ---------------------------------------------------------------------------

/// H(div)-conforming RTN_{p_a} flux space on the patch submesh with zero
/// normal trace on the constrained part of the patch boundary, paired with a
/// broken pressure space P_{p_a} carrying one L2-orthonormal basis per
/// element (first function constant). Interior patches add a single
/// mean-value constraint through a Lagrange multiplier.
class PatchMixedSpace {
 public:
  PatchMixedSpace(const MeshLevel& fine, const Patch& patch);

  const Patch& patch() const { return *patch_; }
  const MeshLevel& fine_mesh() const { return *fine_; }
  int n_elems() const { return static_cast<int>(patch_->fine_elems.size()); }
  int order() const { return order_; }  // RTN order p_a

  int n_flux_dofs() const { return n_flux_; }
  int n_pressure_dofs() const { return n_pressure_; }
  bool mean_constrained() const { return mean_constrained_; }
  int pressure_block() const { return pressure_block_; }  // dofs per element

  const RTNElement& rtn(int i) const { return rtn_[i]; }
  /// Flux local-to-patch dof map of patch element i (-1 = constrained away).
  const std::vector<int>& flux_dofs(int i) const { return flux_dofs_[i]; }

  /// Pressure basis function r (within element i) evaluated at x.
  double pressure_value(int i, int r, Vec2 x) const;
  /// L2(K)-orthonormalizing transform: row r holds the monomial coefficients
  /// of basis function r (monomials (x-c)/h up to degree p_a).
  const Eigen::MatrixXd& pressure_transform(int i) const {
    return pressure_tf_[i];
  }

  /// (q,1) moments of all pressure basis functions.
  const Eigen::VectorXd& pressure_means() const { return pressure_mean_; }

  /// Flux mass matrix and divergence moment matrix B(q,v) = (div v, q).
  void assemble(Eigen::MatrixXd& flux_mass, Eigen::MatrixXd& divergence) const;

  /// Quadrature points (physical) and weights on patch element i, at the
  /// degree used for all patch assembly.
  int quad_degree() const { return quad_degree_; }

 private:
  const MeshLevel* fine_;
  const Patch* patch_;
  int order_;
  int quad_degree_;
  int n_flux_ = 0, n_pressure_ = 0, pressure_block_ = 0;
  bool mean_constrained_ = false;
  std::vector<RTNElement> rtn_;
  std::vector<std::vector<int>> flux_dofs_;
  std::vector<Eigen::MatrixXd> pressure_tf_;
  std::vector<std::pair<int, int>> pressure_monos_;
  Eigen::VectorXd pressure_mean_;
};

/// Direct factorization of the patch saddle system
///   [ M  -B^T  0 ] [sigma]   [rhs_flux]
///   [ B   0    e ] [  r  ] = [rhs_pressure]
///   [ 0   e^T  0 ] [ mu  ]   [0]
/// (the multiplier row/column is present only for mean-constrained patches).
class SaddleSolver {
 public:
  SaddleSolver(Eigen::MatrixXd flux_mass, Eigen::MatrixXd divergence,
               Eigen::VectorXd pressure_means, bool mean_constrained);

  struct Solution {
    Eigen::VectorXd flux;
    Eigen::VectorXd pressure;
    double multiplier = 0.0;
    double kkt_residual = 0.0;
  };

  /// Solves for one right-hand side; checks compatibility for
  /// mean-constrained patches and the relative KKT residual.
  Solution solve(const Eigen::VectorXd& rhs_flux,
                 const Eigen::VectorXd& rhs_pressure) const;

  const Eigen::MatrixXd& flux_mass() const { return mass_; }
  const Eigen::MatrixXd& divergence() const { return div_; }

 private:
  Eigen::MatrixXd mass_, div_;
  Eigen::VectorXd mean_;
  bool mean_constrained_;
  int nf_, np_, ntot_;
  Eigen::MatrixXd kkt_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace parest
