#include "parest/solver.hpp"

#include <Eigen/SparseCholesky>

#include <istream>
#include <ostream>

namespace parest {

// ---------------------------------------------------------------------------
// TimePartition / Discretization
// ---------------------------------------------------------------------------

TimePartition TimePartition::uniform(double T, int N, int q) {
  TimePartition p;
  p.nodes.resize(N + 1);
  for (int i = 0; i <= N; ++i) p.nodes[i] = T * double(i) / N;
  p.degrees.assign(N, q);
  p.validate();
  return p;
}

void TimePartition::validate() const {
  require(nodes.size() >= 2, "TimePartition: need at least one interval");
  require(nodes.front() == 0.0, "TimePartition: t_0 must be 0");
  for (size_t i = 1; i < nodes.size(); ++i)
    require(nodes[i] > nodes[i - 1], "TimePartition: nodes must increase");
  require(degrees.size() + 1 == nodes.size(),
          "TimePartition: degree count mismatch");
  for (int q : degrees) require(q >= 0, "TimePartition: q_n must be >= 0");
}

Discretization Discretization::build(TimePartition partition,
                                     std::vector<HpSpace> spaces) {
  partition.validate();
  require(int(spaces.size()) == partition.n_intervals() + 1,
          "Discretization: need one space per time level");
  Discretization d;
  d.partition = std::move(partition);
  d.spaces = std::move(spaces);
  const int N = d.n_steps();
  d.tilde.reserve(N + 1);
  d.to_prev.resize(N + 1);
  d.to_cur.resize(N + 1);
  d.tilde_degree.resize(N + 1);
  d.tilde.push_back(d.spaces[0].mesh());  // placeholder for index 0
  int max_deg = 1;
  for (int n = 1; n <= N; ++n) {
    auto cr = common_refinement(d.spaces[n - 1].mesh(), d.spaces[n].mesh());
    d.to_prev[n] = std::move(cr.to_prev);
    d.to_cur[n] = std::move(cr.to_next);
    auto& deg = d.tilde_degree[n];
    deg.resize(cr.mesh.n_elems());
    for (int e = 0; e < cr.mesh.n_elems(); ++e) {
      deg[e] = std::max(d.spaces[n - 1].degree(d.to_prev[n][e]),
                        d.spaces[n].degree(d.to_cur[n][e]));
      max_deg = std::max(max_deg, deg[e]);
    }
    d.tilde.push_back(std::move(cr.mesh));
  }
  max_deg = std::max(max_deg, d.spaces[0].max_degree());
  d.quad_degree = 2 * max_deg + 6;
  return d;
}

// ---------------------------------------------------------------------------
// DiscreteSolution
// ---------------------------------------------------------------------------

Eigen::VectorXd DiscreteSolution::end_coeffs(const Discretization& disc,
                                             int level) const {
  if (level == 0) return initial;
  const LegendreTimeBasis lb = disc.partition.time_basis(level);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(modes[level].rows());
  for (int j = 0; j < modes[level].cols(); ++j)
    out += lb.orthonormal_end(j) * modes[level].col(j);
  return out;
}

Eigen::VectorXd DiscreteSolution::start_coeffs(const Discretization& disc,
                                               int n) const {
  const LegendreTimeBasis lb = disc.partition.time_basis(n);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(modes[n].rows());
  for (int j = 0; j < modes[n].cols(); ++j)
    out += lb.orthonormal_start(j) * modes[n].col(j);
  return out;
}

FieldEval DiscreteSolution::evaluate(const Discretization& disc, int n,
                                     int elem, Vec2 x, double t) const {
  const LegendreTimeBasis lb = disc.partition.time_basis(n);
  FieldEval out;
  for (int j = 0; j < modes[n].cols(); ++j) {
    const FieldEval fe =
        disc.space(n).evaluate(modes[n].col(j), elem, x);
    const double ph = lb.orthonormal(j, t);
    out.value += ph * fe.value;
    out.grad = out.grad + ph * fe.grad;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initial projection
// ---------------------------------------------------------------------------

Eigen::VectorXd project_initial(const HpSpace& space,
                                const std::function<double(Vec2)>& u0,
                                int quad_degree) {
  if (space.n_dofs() == 0) return Eigen::VectorXd();
  SpMat M = assemble_mass(space);
  Eigen::VectorXd b = assemble_load(space, u0, quad_degree);
  Eigen::SimplicialLDLT<SpMat> ldlt(M);
  require(ldlt.info() == Eigen::Success, "project_initial: mass factorization failed");
  Eigen::VectorXd c = ldlt.solve(b);
  const double res = (M * c - b).norm() / (b.norm() + 1e-300);
  require(res <= 1e-12, "project_initial: mass solve residual above 1e-12");
  return c;
}

// ---------------------------------------------------------------------------
// SourceMoments
// ---------------------------------------------------------------------------

SourceMoments::SourceMoments(const Discretization& disc, SpaceTimeFn f)
    : disc_(&disc), f_(std::move(f)) {
  const int N = disc.n_steps();
  time_rules_.reserve(N + 1);
  time_rules_.push_back(GaussRule{});
  for (int n = 1; n <= N; ++n)
    time_rules_.push_back(gauss_on_interval(disc.partition.q(n) + 6,
                                            disc.partition.t(n - 1),
                                            disc.partition.t(n)));
}

void SourceMoments::moments(int n, Vec2 x, double* out) const {
  const int q = disc_->partition.q(n);
  const LegendreTimeBasis lb = disc_->partition.time_basis(n);
  for (int j = 0; j <= q; ++j) out[j] = 0.0;
  const GaussRule& tr = time_rules_[n];
  double leg[32];
  for (int g = 0; g < tr.size(); ++g) {
    const double fv = f_(x, tr.points[g]);
    legendre_values(q, lb.reference_coord(tr.points[g]), leg);
    for (int j = 0; j <= q; ++j)
      out[j] += tr.weights[g] * fv * leg[j] * lb.orthonormal_scale(j);
  }
}

double SourceMoments::f_tau(int n, Vec2 x, double t) const {
  const int q = disc_->partition.q(n);
  const LegendreTimeBasis lb = disc_->partition.time_basis(n);
  double mom[32];
  moments(n, x, mom);
  double s = 0.0;
  for (int j = 0; j <= q; ++j) s += mom[j] * lb.orthonormal(j, t);
  return s;
}

// ---------------------------------------------------------------------------
// HeatSolver
// ---------------------------------------------------------------------------

HeatSolver::HeatSolver(const Discretization& disc, SpaceTimeFn f)
    : disc_(&disc), source_(disc, std::move(f)) {}

HeatSolver::Step& HeatSolver::factorized_step(int n) {
  const HpSpace& V = disc_->space(n);
  const int q = disc_->partition.q(n);
  const double tau = disc_->partition.tau(n);
  const auto key = std::make_tuple(V.mesh().id(), q, tau);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  // temporal coupling G_kj = int phi_j' phi_k dt + phi_j(t+) phi_k(t+)
  Eigen::MatrixXd G(q + 1, q + 1);
  for (int k = 0; k <= q; ++k)
    for (int j = 0; j <= q; ++j) {
      const double s = std::sqrt(double(2 * j + 1) * double(2 * k + 1)) / tau;
      const double dphi = legendre_dphi_phi(j, k);
      const double jumps = ((j + k) % 2 == 0) ? 1.0 : -1.0;
      G(k, j) = s * (dphi + jumps);
    }

  SpMat A = assemble_stiffness(V);
  SpMat M = assemble_mass(V);
  const int nd = V.n_dofs();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(size_t(q + 1) * (q + 1) * M.nonZeros() +
                size_t(q + 1) * A.nonZeros());
  for (int k = 0; k <= q; ++k)
    for (int j = 0; j <= q; ++j) {
      const double g = G(k, j);
      for (int c = 0; c < M.outerSize(); ++c)
        for (SpMat::InnerIterator itM(M, c); itM; ++itM)
          trips.emplace_back(k * nd + itM.row(), j * nd + itM.col(),
                             g * itM.value());
      if (k == j)
        for (int c = 0; c < A.outerSize(); ++c)
          for (SpMat::InnerIterator itA(A, c); itA; ++itA)
            trips.emplace_back(k * nd + itA.row(), j * nd + itA.col(),
                               itA.value());
    }
  Step step;
  step.matrix.resize((q + 1) * nd, (q + 1) * nd);
  step.matrix.setFromTriplets(trips.begin(), trips.end());
  step.lu = std::make_unique<Eigen::SparseLU<SpMat>>();
  step.lu->compute(step.matrix);
  require(step.lu->info() == Eigen::Success,
          "solve_timestep: singular DG block system");
  double ninf = 0.0;
  for (int c = 0; c < step.matrix.outerSize(); ++c)
    for (SpMat::InnerIterator itK(step.matrix, c); itK; ++itK)
      ninf = std::max(ninf, std::abs(itK.value()));
  step.norm_inf = ninf;
  return cache_.emplace(key, std::move(step)).first->second;
}

HeatSolver::StepResult HeatSolver::solve_step(int n,
                                              const Eigen::VectorXd& prev_end) {
  const HpSpace& V = disc_->space(n);
  const HpSpace& Vprev = disc_->space(n - 1);
  const int q = disc_->partition.q(n);
  const int nd = V.n_dofs();
  const LegendreTimeBasis lb = disc_->partition.time_basis(n);

  // source moment loads, all modes in one sweep over the common refinement
  Eigen::MatrixXd F = assemble_loads_on_mesh(
      V, disc_->tilde[n], disc_->to_cur[n],
      [&](int, Vec2 x, double* out) { source_.moments(n, x, out); },
      q + 1, disc_->quad_degree);

  // upwind coupling to the previous end value through the common refinement
  Eigen::VectorXd jump_load = assemble_load_on_mesh(
      V, disc_->tilde[n], disc_->to_cur[n],
      [&](int e, Vec2 x) {
        return Vprev.evaluate(prev_end, disc_->to_prev[n][e], x).value;
      },
      disc_->quad_degree);

  Eigen::VectorXd rhs((q + 1) * nd);
  for (int k = 0; k <= q; ++k)
    rhs.segment(k * nd, nd) = F.col(k) + lb.orthonormal_start(k) * jump_load;

  Step& step = factorized_step(n);
  Eigen::VectorXd x = step.lu->solve(rhs);
  const double res =
      (step.matrix * x - rhs).norm() / (rhs.norm() + 1e-300);
  require(res <= 1e-10, "solve_timestep: block residual above 1e-10");

  StepResult out;
  out.modes.resize(nd, q + 1);
  for (int k = 0; k <= q; ++k) out.modes.col(k) = x.segment(k * nd, nd);
  out.residual = res;
  // one-sample condition estimate
  Eigen::VectorXd e = Eigen::VectorXd::Ones((q + 1) * nd);
  out.condition = step.norm_inf * step.lu->solve(e).lpNorm<Eigen::Infinity>() /
                  std::max(1.0, e.lpNorm<Eigen::Infinity>());
  return out;
}

DiscreteSolution HeatSolver::solve(const std::function<double(Vec2)>& u0) {
  DiscreteSolution sol;
  sol.initial = project_initial(disc_->space(0), u0, disc_->quad_degree);
  sol.modes.resize(disc_->n_steps() + 1);
  Eigen::VectorXd prev = sol.initial;
  for (int n = 1; n <= disc_->n_steps(); ++n) {
    StepResult r = solve_step(n, prev);
    sol.modes[n] = std::move(r.modes);
    prev = sol.end_coeffs(*disc_, n);
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Backward Euler oracle
// ---------------------------------------------------------------------------

std::vector<Eigen::VectorXd> backward_euler_oracle(
    const Discretization& disc, const SpaceTimeFn& f,
    const Eigen::VectorXd& u0_coeffs) {
  for (int n = 1; n <= disc.n_steps(); ++n)
    require(disc.partition.q(n) == 0,
            "backward_euler_oracle: all q_n must be 0");
  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd prev = u0_coeffs;
  for (int n = 1; n <= disc.n_steps(); ++n) {
    const HpSpace& V = disc.space(n);
    const HpSpace& Vprev = disc.space(n - 1);
    SpMat A = assemble_stiffness(V);
    SpMat M = assemble_mass(V);
    const double tau = disc.partition.tau(n);
    SpMat K = M + tau * A;
    Eigen::SimplicialLDLT<SpMat> ldlt(K);
    require(ldlt.info() == Eigen::Success,
            "backward_euler_oracle: factorization failed");

    Eigen::VectorXd rhs = assemble_load_on_mesh(
        V, disc.tilde[n], disc.to_cur[n],
        [&](int e, Vec2 x) {
          return Vprev.evaluate(prev, disc.to_prev[n][e], x).value;
        },
        disc.quad_degree);
    const GaussRule tr =
        gauss_on_interval(7, disc.partition.t(n - 1), disc.partition.t(n));
    rhs += assemble_load_on_mesh(
        V, disc.tilde[n], disc.to_cur[n],
        [&](int, Vec2 x) {
          double s = 0.0;
          for (int g = 0; g < tr.size(); ++g)
            s += tr.weights[g] * f(x, tr.points[g]);
          return s;
        },
        disc.quad_degree);
    prev = ldlt.solve(rhs);
    out.push_back(prev);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void dump_solution(std::ostream& os, const Discretization& disc,
                   const DiscreteSolution& sol) {
  os << "parest-solution 1\n";
  os.precision(17);
  os << "initial " << sol.initial.size() << "\n";
  for (int i = 0; i < sol.initial.size(); ++i) os << sol.initial[i] << "\n";
  os << "steps " << disc.n_steps() << "\n";
  for (int n = 1; n <= disc.n_steps(); ++n) {
    const auto& m = sol.modes[n];
    os << "step " << n << " " << m.rows() << " " << m.cols() << "\n";
    for (int j = 0; j < m.cols(); ++j)
      for (int i = 0; i < m.rows(); ++i) os << m(i, j) << "\n";
  }
}

DiscreteSolution load_solution(std::istream& is, const Discretization& disc) {
  std::string tag;
  int version = 0;
  is >> tag >> version;
  require(tag == "parest-solution" && version == 1,
          "load_solution: bad header");
  DiscreteSolution sol;
  int count = 0;
  is >> tag >> count;
  require(tag == "initial" && count == disc.space(0).n_dofs(),
          "load_solution: initial size mismatch");
  sol.initial.resize(count);
  for (int i = 0; i < count; ++i) is >> sol.initial[i];
  int nsteps = 0;
  is >> tag >> nsteps;
  require(tag == "steps" && nsteps == disc.n_steps(),
          "load_solution: step count mismatch");
  sol.modes.resize(nsteps + 1);
  for (int n = 1; n <= nsteps; ++n) {
    int idx = 0, rows = 0, cols = 0;
    is >> tag >> idx >> rows >> cols;
    require(tag == "step" && idx == n && rows == disc.space(n).n_dofs() &&
                cols == disc.partition.q(n) + 1,
            "load_solution: step header mismatch");
    sol.modes[n].resize(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) is >> sol.modes[n](i, j);
  }
  return sol;
}

}  // namespace parest
