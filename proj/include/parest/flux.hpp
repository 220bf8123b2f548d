#pragma once

#include "parest/reconstruction.hpp"

#include <iosfwd>

namespace parest {

enum class ExecutionPolicy { serial, openmp };

/// Moment data of one patch problem, one column per temporal mode:
///   tau = -psi_a grad(u),
///   g   = psi_a (Pi^a f - dt I u) - grad(psi_a) . grad(u).
struct PatchRHS {
  Eigen::MatrixXd flux_moments;      // (tau_j, v_i), n_flux x (q+1)
  Eigen::MatrixXd pressure_moments;  // (g_j, q_r),  n_pressure x (q+1)
  Eigen::VectorXd compat;            // (g_j, 1) over the patch, per mode
  Eigen::VectorXd g_norm;            // ||g_j|| over the patch, per mode
};

/// Exact moment assembly on the patch; for interior patches the
/// compatibility |(g_j,1)| <= 1e-9 (||g_j|| + eps) is enforced, a violation
/// signals a scheme/solver defect.
PatchRHS build_patch_rhs(const Discretization& disc, int n,
                         const PatchMixedSpace& pm, const Patch& patch,
                         const Reconstruction& rec,
                         const PatchDataProjection& proj);

/// Space-time mixed solve in a coupled (monomial-in-time) formulation;
/// returns flux coefficients per orthonormal temporal mode. Serves as the
/// two-route check of the decoupled per-mode path.
Eigen::MatrixXd solve_patch_flux_spacetime(const PatchMixedSpace& pm,
                                           const PatchRHS& rhs,
                                           const LegendreTimeBasis& lb);

/// Equilibrated fluxes of one interval: the per-patch minimization problems
/// are solved mode by mode with one factorization per patch, and the
/// resulting zero-extended sum is tabulated on the common refinement mesh.
class IntervalFluxes {
 public:
  IntervalFluxes(const Discretization& disc, int n,
                 const Reconstruction& rec, const IntervalPatches& ip,
                 const DataApprox& data,
                 ExecutionPolicy policy = ExecutionPolicy::openmp);

  int interval() const { return n_; }
  int n_modes() const { return n_modes_; }
  int n_patches() const { return static_cast<int>(spaces_.size()); }

  const PatchMixedSpace& space(int a) const { return spaces_[a]; }
  const Eigen::MatrixXd& coeffs(int a) const { return coeffs_[a]; }

  double max_kkt_residual() const { return max_kkt_; }
  double max_compat() const { return max_compat_; }

  /// sigma mode j at x in tilde element e (sum over the patches of e).
  Vec2 sigma_mode(int e, int j, Vec2 x) const;
  double div_sigma_mode(int e, int j, Vec2 x) const;
  Vec2 sigma_at(int e, Vec2 x, double t) const;

  /// Tabulated values at the points of triangle_rule(disc.quad_degree):
  /// (q+1) x npts each.
  const Eigen::MatrixXd& table_x(int e) const { return tab_x_[e]; }
  const Eigen::MatrixXd& table_y(int e) const { return tab_y_[e]; }
  const Eigen::MatrixXd& table_div(int e) const { return tab_div_[e]; }

  /// Overwrites one raw coefficient (fault-injection hooks for the negative
  /// control) and refreshes the tables.
  void corrupt_coefficient(int a, int dof, int mode, double delta);

 private:
  void rebuild_tables();

  const Discretization* disc_;
  int n_, n_modes_;
  const IntervalPatches* ip_;
  std::vector<PatchMixedSpace> spaces_;
  std::vector<Eigen::MatrixXd> coeffs_;
  std::vector<std::vector<Eigen::VectorXd>> gen_;  // per patch/elem slot: per mode
  double max_kkt_ = 0.0, max_compat_ = 0.0;
  std::vector<Eigen::MatrixXd> tab_x_, tab_y_, tab_div_;
};

/// Pointwise audit of dt(I u) + div sigma = f_htau over the interval.
struct EquilibrationReport {
  double max_relative = 0.0;
  std::vector<double> elem_residual;  // per tilde element, absolute
  std::vector<double> elem_scale;
  bool pass(double tol = 1e-9) const { return max_relative <= tol; }
};
EquilibrationReport check_equilibration(const Discretization& disc, int n,
                                        const Reconstruction& rec,
                                        const IntervalFluxes& fluxes,
                                        const DataApprox& data);

/// Max |[sigma . n]| over sampled interior edges of the common refinement
/// (all temporal modes), a direct H(div)-conformity audit.
double normal_jump_audit(const Discretization& disc, int n,
                         const IntervalFluxes& fluxes, int n_edges = 50,
                         int n_points = 5, unsigned seed = 1234);

void dump_fluxes(std::ostream& os, const Discretization& disc, int n,
                 const IntervalFluxes& fluxes);
void write_flux_vtk(std::ostream& os, const Discretization& disc, int n,
                    const IntervalFluxes& fluxes, double t);

}  // namespace parest
