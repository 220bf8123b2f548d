#include "parest/spaces.hpp"

#include <algorithm>
#include <unordered_map>

namespace parest {

// ---------------------------------------------------------------------------
// HpSpace
// ---------------------------------------------------------------------------

HpSpace::HpSpace(MeshLevel mesh, std::vector<int> degrees, bool dirichlet)
    : mesh_(std::move(mesh)), degrees_(std::move(degrees)),
      dirichlet_(dirichlet) {
  require(int(degrees_.size()) == mesh_.n_elems(),
          "HpSpace: degree vector size mismatch");
  for (int p : degrees_) require(p >= 1, "HpSpace: degrees must be >= 1");
  build();
}

HpSpace::HpSpace(MeshLevel mesh, int degree, bool dirichlet)
    : HpSpace(std::move(mesh),
              std::vector<int>(mesh.n_elems(), degree), dirichlet) {}

void HpSpace::build() {
  const int ne = mesh_.n_elems();
  max_degree_ = *std::max_element(degrees_.begin(), degrees_.end());

  edge_degree_.assign(mesh_.n_edges(), 1 << 20);
  for (int k = 0; k < ne; ++k)
    for (int e : mesh_.elem_edges(k))
      edge_degree_[e] = std::min(edge_degree_[e], degrees_[k]);

  // vertex dofs
  std::vector<int> vertex_dof(mesh_.n_vertices(), -1);
  int next = 0;
  for (int lv = 0; lv < mesh_.n_vertices(); ++lv) {
    const int gv = mesh_.vertex_ids()[lv];
    if (dirichlet_ && mesh_.vertex_on_boundary(gv)) continue;
    vertex_dof[lv] = next++;
  }
  // edge dofs
  std::vector<int> edge_offset(mesh_.n_edges(), -1);
  for (int e = 0; e < mesh_.n_edges(); ++e) {
    const int count = edge_degree_[e] - 1;
    if (count <= 0) continue;
    if (dirichlet_ && mesh_.edge_on_boundary(e)) continue;
    edge_offset[e] = next;
    next += count;
  }
  // interior dofs
  sig_.resize(ne);
  elem_dofs_.resize(ne);
  for (int k = 0; k < ne; ++k) {
    const auto& vv = mesh_.elem_vertices(k);
    ScalarBasisSig sig;
    sig.p = degrees_[k];
    for (int i = 0; i < 3; ++i) {
      sig.edge_p[i] = edge_degree_[mesh_.elem_edges(k)[i]];
      sig.edge_sign[i] = (vv[i] < vv[(i + 1) % 3]) ? 1 : -1;
    }
    sig_[k] = sig;

    auto& dofs = elem_dofs_[k];
    dofs.reserve(sig.count());
    for (int i = 0; i < 3; ++i)
      dofs.push_back(vertex_dof[mesh_.vertex_local(vv[i])]);
    for (int i = 0; i < 3; ++i) {
      const int e = mesh_.elem_edges(k)[i];
      for (int m = 0; m < sig.edge_p[i] - 1; ++m)
        dofs.push_back(edge_offset[e] < 0 ? -1 : edge_offset[e] + m);
    }
    const int nb = (sig.p - 1) * (sig.p - 2) / 2;
    for (int m = 0; m < nb; ++m) dofs.push_back(next + m);
    next += nb;
  }
  n_dofs_ = next;
}

int HpSpace::dimension_formula() const {
  int dim = 0;
  for (int lv = 0; lv < mesh_.n_vertices(); ++lv)
    if (!(dirichlet_ && mesh_.vertex_on_boundary(mesh_.vertex_ids()[lv])))
      ++dim;
  for (int e = 0; e < mesh_.n_edges(); ++e)
    if (!(dirichlet_ && mesh_.edge_on_boundary(e)))
      dim += std::max(0, edge_degree_[e] - 1);
  for (int k = 0; k < mesh_.n_elems(); ++k)
    dim += (degrees_[k] - 1) * (degrees_[k] - 2) / 2;
  return dim;
}

void HpSpace::basis_at_point(int elem, Vec2 x, std::vector<double>& val,
                             std::vector<Vec2>& grad) const {
  const ScalarBasisSig& sig = sig_[elem];
  const int nf = sig.count();
  val.resize(nf);
  grad.resize(nf);
  double d0[64], d1[64], d2[64];
  const auto l = mesh_.barycentric(elem, x);
  scalar_basis_eval(sig, l[0], l[1], l[2], val.data(), d0, d1, d2);
  const auto& gl = mesh_.grad_lambda(elem);
  for (int i = 0; i < nf; ++i)
    grad[i] = d0[i] * gl[0] + d1[i] * gl[1] + d2[i] * gl[2];
}

FieldEval HpSpace::evaluate(const Eigen::VectorXd& coeffs, int elem,
                            Vec2 x) const {
  thread_local std::vector<double> val;
  thread_local std::vector<Vec2> grad;
  basis_at_point(elem, x, val, grad);
  FieldEval out;
  const auto& dofs = elem_dofs_[elem];
  for (size_t i = 0; i < dofs.size(); ++i) {
    if (dofs[i] < 0) continue;
    const double c = coeffs[dofs[i]];
    out.value += c * val[i];
    out.grad = out.grad + c * grad[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

namespace {

template <typename LocalKernel>
SpMat assemble_matrix(const HpSpace& space, int quad_degree,
                      LocalKernel&& kernel) {
  const MeshLevel& mesh = space.mesh();
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::MatrixXd loc;
  for (int k = 0; k < mesh.n_elems(); ++k) {
    const auto& sig = space.signature(k);
    const TriangleRule& rule = triangle_rule(quad_degree);
    const ScalarBasisTable& tab = scalar_basis_table(sig, rule);
    kernel(k, rule, tab, loc);
    const auto& dofs = space.element_dofs(k);
    for (size_t i = 0; i < dofs.size(); ++i) {
      if (dofs[i] < 0) continue;
      for (size_t j = 0; j < dofs.size(); ++j) {
        if (dofs[j] < 0) continue;
        trips.emplace_back(dofs[i], dofs[j], loc(i, j));
      }
    }
  }
  SpMat out(space.n_dofs(), space.n_dofs());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace

SpMat assemble_stiffness(const HpSpace& space, int quad_degree) {
  if (quad_degree < 0) quad_degree = 2 * space.max_degree();
  const MeshLevel& mesh = space.mesh();
  return assemble_matrix(
      space, quad_degree,
      [&](int k, const TriangleRule& rule, const ScalarBasisTable& tab,
          Eigen::MatrixXd& loc) {
        const int nf = tab.nfun;
        loc.setZero(nf, nf);
        const auto& gl = mesh.grad_lambda(k);
        const double jac = 2.0 * mesh.area(k);
        Eigen::MatrixXd gx(nf, rule.size()), gy(nf, rule.size());
        for (int q = 0; q < rule.size(); ++q)
          for (int i = 0; i < nf; ++i) {
            gx(i, q) = tab.d0(i, q) * gl[0].x + tab.d1(i, q) * gl[1].x +
                       tab.d2(i, q) * gl[2].x;
            gy(i, q) = tab.d0(i, q) * gl[0].y + tab.d1(i, q) * gl[1].y +
                       tab.d2(i, q) * gl[2].y;
          }
        for (int q = 0; q < rule.size(); ++q) {
          const double w = rule.points[q].w * jac;
          for (int i = 0; i < nf; ++i)
            for (int j = 0; j < nf; ++j)
              loc(i, j) += w * (gx(i, q) * gx(j, q) + gy(i, q) * gy(j, q));
        }
      });
}

SpMat assemble_mass(const HpSpace& space, int quad_degree) {
  if (quad_degree < 0) quad_degree = 2 * space.max_degree();
  const MeshLevel& mesh = space.mesh();
  return assemble_matrix(
      space, quad_degree,
      [&](int k, const TriangleRule& rule, const ScalarBasisTable& tab,
          Eigen::MatrixXd& loc) {
        const int nf = tab.nfun;
        loc.setZero(nf, nf);
        const double jac = 2.0 * mesh.area(k);
        for (int q = 0; q < rule.size(); ++q) {
          const double w = rule.points[q].w * jac;
          for (int i = 0; i < nf; ++i)
            for (int j = 0; j < nf; ++j)
              loc(i, j) += w * tab.val(i, q) * tab.val(j, q);
        }
      });
}

Eigen::VectorXd assemble_load(const HpSpace& space,
                              const std::function<double(Vec2)>& f,
                              int quad_degree) {
  const MeshLevel& mesh = space.mesh();
  Eigen::VectorXd load = Eigen::VectorXd::Zero(space.n_dofs());
  for (int k = 0; k < mesh.n_elems(); ++k) {
    const TriangleRule& rule = triangle_rule(quad_degree);
    const ScalarBasisTable& tab = scalar_basis_table(space.signature(k), rule);
    const double jac = 2.0 * mesh.area(k);
    const auto& dofs = space.element_dofs(k);
    for (int q = 0; q < rule.size(); ++q) {
      const auto& pt = rule.points[q];
      const double w = pt.w * jac;
      const double fv = f(mesh.point(k, pt.l0, pt.l1, pt.l2));
      for (size_t i = 0; i < dofs.size(); ++i)
        if (dofs[i] >= 0) load[dofs[i]] += w * fv * tab.val(int(i), q);
    }
  }
  return load;
}

Eigen::VectorXd assemble_load_on_mesh(
    const HpSpace& space, const MeshLevel& on, const std::vector<int>& anc,
    const std::function<double(int, Vec2)>& f, int quad_degree) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(space.n_dofs());
  std::vector<double> val;
  std::vector<Vec2> grad;
  const TriangleRule& rule = triangle_rule(quad_degree);
  for (int e = 0; e < on.n_elems(); ++e) {
    const int parent = anc[e];
    const double jac = 2.0 * on.area(e);
    const auto& dofs = space.element_dofs(parent);
    for (const auto& pt : rule.points) {
      const Vec2 x = on.point(e, pt.l0, pt.l1, pt.l2);
      space.basis_at_point(parent, x, val, grad);
      const double w = pt.w * jac * f(e, x);
      for (size_t i = 0; i < dofs.size(); ++i)
        if (dofs[i] >= 0) load[dofs[i]] += w * val[i];
    }
  }
  return load;
}

Eigen::VectorXd assemble_gradient_load_on_mesh(
    const HpSpace& space, const MeshLevel& on, const std::vector<int>& anc,
    const std::function<Vec2(int, Vec2)>& g, int quad_degree) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(space.n_dofs());
  std::vector<double> val;
  std::vector<Vec2> grad;
  const TriangleRule& rule = triangle_rule(quad_degree);
  for (int e = 0; e < on.n_elems(); ++e) {
    const int parent = anc[e];
    const double jac = 2.0 * on.area(e);
    const auto& dofs = space.element_dofs(parent);
    for (const auto& pt : rule.points) {
      const Vec2 x = on.point(e, pt.l0, pt.l1, pt.l2);
      space.basis_at_point(parent, x, val, grad);
      const Vec2 gv = g(e, x);
      const double w = pt.w * jac;
      for (size_t i = 0; i < dofs.size(); ++i)
        if (dofs[i] >= 0) load[dofs[i]] += w * dot(gv, grad[i]);
    }
  }
  return load;
}

Eigen::MatrixXd assemble_loads_on_mesh(
    const HpSpace& space, const MeshLevel& on, const std::vector<int>& anc,
    const std::function<void(int, Vec2, double*)>& f, int ncomp,
    int quad_degree) {
  Eigen::MatrixXd load = Eigen::MatrixXd::Zero(space.n_dofs(), ncomp);
  std::vector<double> val, fv(ncomp);
  std::vector<Vec2> grad;
  const TriangleRule& rule = triangle_rule(quad_degree);
  for (int e = 0; e < on.n_elems(); ++e) {
    const int parent = anc[e];
    const double jac = 2.0 * on.area(e);
    const auto& dofs = space.element_dofs(parent);
    for (const auto& pt : rule.points) {
      const Vec2 x = on.point(e, pt.l0, pt.l1, pt.l2);
      space.basis_at_point(parent, x, val, grad);
      f(e, x, fv.data());
      const double w = pt.w * jac;
      for (size_t i = 0; i < dofs.size(); ++i) {
        if (dofs[i] < 0) continue;
        const double wv = w * val[i];
        for (int c = 0; c < ncomp; ++c) load(dofs[i], c) += wv * fv[c];
      }
    }
  }
  return load;
}

// ---------------------------------------------------------------------------
// PatchMixedSpace
// ---------------------------------------------------------------------------

namespace {
std::vector<std::pair<int, int>> pressure_monomials(int p) {
  std::vector<std::pair<int, int>> m;
  for (int d = 0; d <= p; ++d)
    for (int a = d; a >= 0; --a) m.emplace_back(a, d - a);
  return m;
}

double mono_eval(Vec2 u, std::pair<int, int> e) {
  double r = 1.0;
  for (int i = 0; i < e.first; ++i) r *= u.x;
  for (int i = 0; i < e.second; ++i) r *= u.y;
  return r;
}
}  // namespace

PatchMixedSpace::PatchMixedSpace(const MeshLevel& fine, const Patch& patch)
    : fine_(&fine), patch_(&patch), order_(patch.degree),
      quad_degree_(2 * (patch.degree + 1)) {
  const int nel = n_elems();
  pressure_block_ = (order_ + 1) * (order_ + 2) / 2;
  n_pressure_ = nel * pressure_block_;
  mean_constrained_ = !patch.boundary;
  pressure_monos_ = pressure_monomials(order_);

  // flux dof numbering: shared edge dofs first, then per-element interiors
  std::unordered_map<int, int> edge_offset;
  const int ned = order_ + 1;
  for (int i = 0; i < nel; ++i) {
    const int k = patch.fine_elems[i];
    for (int e = 0; e < 3; ++e) {
      if (patch.zero_trace[i][e]) continue;
      const int eid = fine.elem_edges(k)[e];
      if (edge_offset.count(eid)) continue;
      edge_offset.emplace(eid, n_flux_);
      n_flux_ += ned;
    }
  }
  rtn_.reserve(nel);
  flux_dofs_.resize(nel);
  for (int i = 0; i < nel; ++i) {
    const int k = patch.fine_elems[i];
    const auto& vv = fine.elem_vertices(k);
    std::array<bool, 3> fwd{};
    for (int e = 0; e < 3; ++e) fwd[e] = vv[e] < vv[(e + 1) % 3];
    rtn_.emplace_back(fine.vertex(vv[0]), fine.vertex(vv[1]),
                      fine.vertex(vv[2]), order_, fwd);
    auto& dofs = flux_dofs_[i];
    dofs.assign(rtn_[i].ndofs(), -1);
    for (int e = 0; e < 3; ++e) {
      if (patch.zero_trace[i][e]) continue;
      const int off = edge_offset.at(fine.elem_edges(k)[e]);
      for (int m = 0; m < ned; ++m) dofs[rtn_[i].edge_offset(e) + m] = off + m;
    }
    for (int m = 0; m < rtn_[i].interior_dofs(); ++m)
      dofs[rtn_[i].interior_offset() + m] = n_flux_ + m;
    n_flux_ += rtn_[i].interior_dofs();
  }

  // per-element orthonormal pressure basis via Cholesky of the monomial Gram
  pressure_tf_.resize(nel);
  pressure_mean_ = Eigen::VectorXd::Zero(n_pressure_);
  const TriangleRule& rule = triangle_rule(2 * order_);
  for (int i = 0; i < nel; ++i) {
    const int k = patch.fine_elems[i];
    const auto& vv = fine.elem_vertices(k);
    const Vec2 c = (1.0 / 3.0) *
                   (fine.vertex(vv[0]) + fine.vertex(vv[1]) +
                    fine.vertex(vv[2]));
    const double h = fine.diameter(k);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(pressure_block_,
                                                 pressure_block_);
    const double jac = 2.0 * fine.area(k);
    for (const auto& pt : rule.points) {
      const Vec2 x = fine.point(k, pt.l0, pt.l1, pt.l2);
      const Vec2 u = (1.0 / h) * (x - c);
      Eigen::VectorXd m(pressure_block_);
      for (int r = 0; r < pressure_block_; ++r)
        m[r] = mono_eval(u, pressure_monos_[r]);
      gram += (pt.w * jac) * m * m.transpose();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    require(llt.info() == Eigen::Success,
            "PatchMixedSpace: pressure Gram not positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    pressure_tf_[i] = L.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd::Identity(pressure_block_, pressure_block_));
    // first basis function is the constant 1/sqrt(|K|)
    pressure_mean_[i * pressure_block_] = std::sqrt(fine.area(k));
  }
}

double PatchMixedSpace::pressure_value(int i, int r, Vec2 x) const {
  const int k = patch_->fine_elems[i];
  const auto& vv = fine_->elem_vertices(k);
  const Vec2 c = (1.0 / 3.0) *
                 (fine_->vertex(vv[0]) + fine_->vertex(vv[1]) +
                  fine_->vertex(vv[2]));
  const Vec2 u = (1.0 / fine_->diameter(k)) * (x - c);
  double s = 0.0;
  for (int m = 0; m <= r; ++m)
    s += pressure_tf_[i](r, m) * mono_eval(u, pressure_monos_[m]);
  return s;
}

void PatchMixedSpace::assemble(Eigen::MatrixXd& flux_mass,
                               Eigen::MatrixXd& divergence) const {
  flux_mass.setZero(n_flux_, n_flux_);
  divergence.setZero(n_pressure_, n_flux_);
  const TriangleRule& rule = triangle_rule(quad_degree_);
  for (int i = 0; i < n_elems(); ++i) {
    const int k = patch_->fine_elems[i];
    std::vector<Vec2> pts(rule.size());
    for (int q = 0; q < rule.size(); ++q)
      pts[q] = fine_->point(k, rule.points[q].l0, rule.points[q].l1,
                            rule.points[q].l2);
    Eigen::MatrixXd vx, vy, dv;
    rtn_[i].tabulate(pts, vx, vy, dv);
    const int nd = rtn_[i].ndofs();
    const double jac = 2.0 * fine_->area(k);
    Eigen::MatrixXd mloc = Eigen::MatrixXd::Zero(nd, nd);
    Eigen::MatrixXd bloc = Eigen::MatrixXd::Zero(pressure_block_, nd);
    for (int q = 0; q < rule.size(); ++q) {
      const double w = rule.points[q].w * jac;
      for (int a = 0; a < nd; ++a)
        for (int b = 0; b < nd; ++b)
          mloc(a, b) += w * (vx(a, q) * vx(b, q) + vy(a, q) * vy(b, q));
      for (int r = 0; r < pressure_block_; ++r) {
        const double pv = pressure_value(i, r, pts[q]);
        for (int b = 0; b < nd; ++b) bloc(r, b) += w * pv * dv(b, q);
      }
    }
    const auto& dofs = flux_dofs_[i];
    for (int a = 0; a < nd; ++a) {
      if (dofs[a] < 0) continue;
      for (int b = 0; b < nd; ++b)
        if (dofs[b] >= 0) flux_mass(dofs[a], dofs[b]) += mloc(a, b);
      for (int r = 0; r < pressure_block_; ++r)
        divergence(i * pressure_block_ + r, dofs[a]) += bloc(r, a);
    }
  }
}

// ---------------------------------------------------------------------------
// SaddleSolver
// ---------------------------------------------------------------------------

SaddleSolver::SaddleSolver(Eigen::MatrixXd flux_mass,
                           Eigen::MatrixXd divergence,
                           Eigen::VectorXd pressure_means,
                           bool mean_constrained)
    : mass_(std::move(flux_mass)), div_(std::move(divergence)),
      mean_(std::move(pressure_means)), mean_constrained_(mean_constrained) {
  nf_ = static_cast<int>(mass_.rows());
  np_ = static_cast<int>(div_.rows());
  ntot_ = nf_ + np_ + (mean_constrained_ ? 1 : 0);
  kkt_ = Eigen::MatrixXd::Zero(ntot_, ntot_);
  kkt_.topLeftCorner(nf_, nf_) = mass_;
  kkt_.block(0, nf_, nf_, np_) = -div_.transpose();
  kkt_.block(nf_, 0, np_, nf_) = div_;
  if (mean_constrained_) {
    kkt_.block(nf_, nf_ + np_, np_, 1) = mean_;
    kkt_.block(nf_ + np_, nf_, 1, np_) = mean_.transpose();
  }
  lu_.compute(kkt_);
}

SaddleSolver::Solution SaddleSolver::solve(
    const Eigen::VectorXd& rhs_flux, const Eigen::VectorXd& rhs_pressure) const {
  require(rhs_flux.size() == nf_ && rhs_pressure.size() == np_,
          "solve_saddle: rhs size mismatch");
  if (mean_constrained_) {
    const double incompat = std::abs(mean_.dot(rhs_pressure));
    const double scale = mean_.norm() * rhs_pressure.norm() + 1e-30;
    require(incompat <= 1e-9 * scale + 1e-14,
            "solve_saddle: incompatible divergence datum on an interior "
            "patch (mean not zero)");
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(ntot_);
  b.head(nf_) = rhs_flux;
  b.segment(nf_, np_) = rhs_pressure;
  Eigen::VectorXd z = lu_.solve(b);
  const double kscale = kkt_.cwiseAbs().rowwise().sum().maxCoeff();
  auto rel_residual = [&](const Eigen::VectorXd& zz) {
    return (kkt_ * zz - b).norm() /
           (b.norm() + kscale * zz.norm() + 1e-300);
  };
  double res = rel_residual(z);
  if (res > 1e-13) {
    z += lu_.solve(b - kkt_ * z);  // one step of iterative refinement
    res = rel_residual(z);
  }
  require(res <= 1e-10,
          "solve_saddle: KKT residual above tolerance (singular system?)");
  Solution sol;
  sol.flux = z.head(nf_);
  sol.pressure = z.segment(nf_, np_);
  sol.multiplier = mean_constrained_ ? z[ntot_ - 1] : 0.0;
  sol.kkt_residual = res;
  return sol;
}

}  // namespace parest
