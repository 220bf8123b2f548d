#pragma once

#include "parest/basis.hpp"
#include "parest/spaces.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>

namespace parest {

/// Time partition 0 = t_0 < ... < t_N = T with a temporal degree per
/// interval. Intervals are indexed 1..N to match node numbering.
struct TimePartition {
  std::vector<double> nodes;
  std::vector<int> degrees;  // size N, degrees[n-1] = q_n

  int n_intervals() const { return static_cast<int>(degrees.size()); }
  double t(int level) const { return nodes[level]; }
  double final_time() const { return nodes.back(); }
  double tau(int n) const { return nodes[n] - nodes[n - 1]; }
  int q(int n) const { return degrees[n - 1]; }
  LegendreTimeBasis time_basis(int n) const {
    return LegendreTimeBasis(nodes[n - 1], nodes[n], q(n));
  }

  static TimePartition uniform(double T, int N, int q);
  void validate() const;
};

/// Spaces of one run: V^0..V^N plus the common refinement of each
/// consecutive pair, with containment maps and merged degrees.
struct Discretization {
  TimePartition partition;
  std::vector<HpSpace> spaces;              // index 0..N
  std::vector<MeshLevel> tilde;             // index 1..N (index 0 unused)
  std::vector<std::vector<int>> to_prev;    // tilde elem -> V^{n-1} elem
  std::vector<std::vector<int>> to_cur;     // tilde elem -> V^n elem
  std::vector<std::vector<int>> tilde_degree;
  int quad_degree = 8;   // shared spatial rule for all run assembly

  int n_steps() const { return partition.n_intervals(); }
  const HpSpace& space(int level) const { return spaces[level]; }

  static Discretization build(TimePartition partition,
                              std::vector<HpSpace> spaces);
};

/// Space-time coefficients of the numerical solution: initial coefficients
/// in V^0 and, per interval, one spatial coefficient vector per orthonormal
/// temporal mode (columns j = 0..q_n).
struct DiscreteSolution {
  Eigen::VectorXd initial;
  std::vector<Eigen::MatrixXd> modes;  // index 1..N

  /// Coefficients of u(t_n) in V^n (left limit; V^0 for n = 0).
  Eigen::VectorXd end_coeffs(const Discretization& disc, int level) const;
  /// Coefficients of u(t_{n-1}^+) in V^n.
  Eigen::VectorXd start_coeffs(const Discretization& disc, int n) const;
  /// Value/gradient at (x, t) with t inside interval n.
  FieldEval evaluate(const Discretization& disc, int n, int elem, Vec2 x,
                     double t) const;
};

using SpaceTimeFn = std::function<double(Vec2, double)>;

/// L2 projection onto V^0; the relative residual of the mass solve is
/// checked against 1e-12.
Eigen::VectorXd project_initial(const HpSpace& space,
                                const std::function<double(Vec2)>& u0,
                                int quad_degree);

/// Temporal Legendre moments of the source, int_{I_n} f(x,t) phi_j(t) dt,
/// integrated with q_n+6 Gauss points per interval. Both the scheme and the
/// data approximations consume f exclusively through these moments, so the
/// discrete compatibility identities hold to roundoff.
class SourceMoments {
 public:
  SourceMoments(const Discretization& disc, SpaceTimeFn f);

  /// Fills out[0..q_n] with the orthonormal-basis moments at x.
  void moments(int n, Vec2 x, double* out) const;
  double value(Vec2 x, double t) const { return f_(x, t); }
  /// f_tau(x,t) = sum_j moments_j(x) phi_j(t) on interval n.
  double f_tau(int n, Vec2 x, double t) const;
  int n_modes(int n) const { return disc_->partition.q(n) + 1; }
  const Discretization& disc() const { return *disc_; }

 private:
  const Discretization* disc_;
  SpaceTimeFn f_;
  std::vector<GaussRule> time_rules_;
};

/// DG(q)-in-time / hp-in-space solver for the heat equation. The per-step
/// block matrices are factorized once and reused whenever the space, the
/// step size, and the temporal degree repeat. The source enters through its
/// temporal Legendre moments, integrated with q_n+6 Gauss points.
class HeatSolver {
 public:
  HeatSolver(const Discretization& disc, SpaceTimeFn f);

  struct StepResult {
    Eigen::MatrixXd modes;     // n_dofs x (q_n+1)
    double residual = 0.0;     // relative residual of the block solve
    double condition = 0.0;    // one-sample condition estimate
  };
  StepResult solve_step(int n, const Eigen::VectorXd& prev_end);

  DiscreteSolution solve(const std::function<double(Vec2)>& u0);

  const SourceMoments& source() const { return source_; }
  const Discretization& disc() const { return *disc_; }

 private:
  struct Step {
    std::unique_ptr<Eigen::SparseLU<SpMat>> lu;
    double norm_inf = 0.0;
    SpMat matrix;
  };
  Step& factorized_step(int n);

  const Discretization* disc_;
  SourceMoments source_;
  std::map<std::tuple<int, int, double>, Step> cache_;  // (mesh id, q, tau)
};

/// Implicit Euler reference: independent of the DG block path, usable when
/// all q_n = 0. Returns the nodal coefficient vectors u^1..u^N.
std::vector<Eigen::VectorXd> backward_euler_oracle(
    const Discretization& disc, const SpaceTimeFn& f,
    const Eigen::VectorXd& u0_coeffs);

void dump_solution(std::ostream& os, const Discretization& disc,
                   const DiscreteSolution& sol);
DiscreteSolution load_solution(std::istream& is, const Discretization& disc);

}  // namespace parest
