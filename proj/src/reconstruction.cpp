#include "parest/reconstruction.hpp"

namespace parest {

IntervalPatches build_interval_patches(const Discretization& disc, int n) {
  IntervalPatches ip;
  ip.patches = vertex_patches(disc.space(n).mesh(), disc.tilde[n],
                              disc.tilde_degree[n]);
  ip.elem_patches.resize(disc.tilde[n].n_elems(),
                         {std::pair<int, int>{-1, -1},
                          std::pair<int, int>{-1, -1},
                          std::pair<int, int>{-1, -1}});
  std::vector<int> filled(disc.tilde[n].n_elems(), 0);
  for (size_t a = 0; a < ip.patches.size(); ++a)
    for (size_t i = 0; i < ip.patches[a].fine_elems.size(); ++i) {
      const int e = ip.patches[a].fine_elems[i];
      require(filled[e] < 3, "build_interval_patches: element in > 3 patches");
      ip.elem_patches[e][filled[e]++] = {int(a), int(i)};
    }
  for (int c : filled)
    require(c == 3, "build_interval_patches: element not in 3 patches");
  return ip;
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

Reconstruction::Reconstruction(const Discretization& disc,
                               const DiscreteSolution& sol)
    : disc_(&disc), sol_(&sol) {
  const int N = disc.n_steps();
  prev_end_.resize(N + 1);
  start_.resize(N + 1);
  for (int n = 1; n <= N; ++n) {
    prev_end_[n] = sol.end_coeffs(disc, n - 1);
    start_[n] = sol.start_coeffs(disc, n);
  }
}

Reconstruction::PointModes Reconstruction::point_modes(int n, int e,
                                                       Vec2 x) const {
  const int q = disc_->partition.q(n);
  const int cur = disc_->to_cur[n][e];
  const int prev = disc_->to_prev[n][e];
  PointModes pm;
  pm.u.resize(q + 1);
  for (int j = 0; j <= q; ++j)
    pm.u[j] = disc_->space(n).evaluate(sol_->modes[n].col(j), cur, x);
  const FieldEval before =
      disc_->space(n - 1).evaluate(prev_end_[n], prev, x);
  const FieldEval after = disc_->space(n).evaluate(start_[n], cur, x);
  pm.jump.value = before.value - after.value;
  pm.jump.grad = before.grad - after.grad;
  return pm;
}

FieldEval Reconstruction::jump(int n, int e, Vec2 x) const {
  const int cur = disc_->to_cur[n][e];
  const int prev = disc_->to_prev[n][e];
  const FieldEval before =
      disc_->space(n - 1).evaluate(prev_end_[n], prev, x);
  const FieldEval after = disc_->space(n).evaluate(start_[n], cur, x);
  FieldEval out;
  out.value = before.value - after.value;
  out.grad = before.grad - after.grad;
  return out;
}

std::vector<FieldEval> Reconstruction::iu_legendre(
    int n, const PointModes& pm) const {
  const int q = disc_->partition.q(n);
  const LegendreTimeBasis lb = disc_->partition.time_basis(n);
  std::vector<FieldEval> a(q + 2);
  for (int j = 0; j <= q; ++j) {
    const double s = lb.orthonormal_scale(j);
    a[j].value = s * pm.u[j].value;
    a[j].grad = s * pm.u[j].grad;
  }
  const double cq = (q % 2 == 0 ? 0.5 : -0.5);
  a[q].value += cq * pm.jump.value;
  a[q].grad = a[q].grad + cq * pm.jump.grad;
  a[q + 1].value -= cq * pm.jump.value;
  a[q + 1].grad = a[q + 1].grad - cq * pm.jump.grad;
  return a;
}

std::vector<FieldEval> Reconstruction::dtiu_legendre(
    int n, const PointModes& pm) const {
  const int q = disc_->partition.q(n);
  const double tau = disc_->partition.tau(n);
  const std::vector<FieldEval> a = iu_legendre(n, pm);
  std::vector<FieldEval> b(q + 1);
  for (int k = 0; k <= q; ++k) {
    FieldEval s;
    for (int m = k + 1; m <= q + 1; ++m)
      if ((m - k) % 2 == 1) {
        s.value += a[m].value;
        s.grad = s.grad + a[m].grad;
      }
    const double c = (2.0 / tau) * (2 * k + 1);
    b[k].value = c * s.value;
    b[k].grad = c * s.grad;
  }
  return b;
}

std::vector<FieldEval> Reconstruction::dtiu_orthonormal(
    int n, const PointModes& pm) const {
  const int q = disc_->partition.q(n);
  const LegendreTimeBasis lb = disc_->partition.time_basis(n);
  std::vector<FieldEval> b = dtiu_legendre(n, pm);
  for (int j = 0; j <= q; ++j) {
    const double s = 1.0 / lb.orthonormal_scale(j);  // int L_j phi_j dt
    b[j].value *= s;
    b[j].grad = s * b[j].grad;
  }
  return b;
}

FieldEval Reconstruction::u_at(int n, const PointModes& pm, double t) const {
  const LegendreTimeBasis lb = disc_->partition.time_basis(n);
  FieldEval out;
  for (size_t j = 0; j < pm.u.size(); ++j) {
    const double ph = lb.orthonormal(int(j), t);
    out.value += ph * pm.u[j].value;
    out.grad = out.grad + ph * pm.u[j].grad;
  }
  return out;
}

FieldEval Reconstruction::iu_at(int n, const PointModes& pm, double t) const {
  const LegendreTimeBasis lb = disc_->partition.time_basis(n);
  const std::vector<FieldEval> a = iu_legendre(n, pm);
  FieldEval out;
  for (size_t m = 0; m < a.size(); ++m) {
    const double lv = lb.legendre(int(m), t);
    out.value += lv * a[m].value;
    out.grad = out.grad + lv * a[m].grad;
  }
  return out;
}

FieldEval Reconstruction::dtiu_at(int n, const PointModes& pm,
                                  double t) const {
  const LegendreTimeBasis lb = disc_->partition.time_basis(n);
  const std::vector<FieldEval> b = dtiu_legendre(n, pm);
  FieldEval out;
  for (size_t k = 0; k < b.size(); ++k) {
    const double lv = lb.legendre(int(k), t);
    out.value += lv * b[k].value;
    out.grad = out.grad + lv * b[k].grad;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PatchDataProjection
// ---------------------------------------------------------------------------

namespace {
std::vector<std::pair<int, int>> monomials_up_to(int p) {
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

PatchDataProjection::PatchDataProjection(const Discretization& disc, int n,
                                         const Patch& patch,
                                         const SourceMoments& f)
    : fine_(&disc.tilde[n]), patch_(&patch), degree_(patch.degree - 1),
      n_modes_(disc.partition.q(n) + 1) {
  monos_ = monomials_up_to(degree_);
  block_ = static_cast<int>(monos_.size());
  const MeshLevel& coarse = disc.space(n).mesh();
  const MeshLevel& fine = *fine_;
  const int nel = static_cast<int>(patch.fine_elems.size());
  centroid_.resize(nel);
  scale_.resize(nel);
  coeff_.resize(nel);
  const TriangleRule& rule = triangle_rule(disc.quad_degree);
  std::vector<double> mom(n_modes_);
  for (int i = 0; i < nel; ++i) {
    const int k = patch.fine_elems[i];
    const auto& vv = fine.elem_vertices(k);
    centroid_[i] = (1.0 / 3.0) * (fine.vertex(vv[0]) + fine.vertex(vv[1]) +
                                  fine.vertex(vv[2]));
    scale_[i] = fine.diameter(k);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(block_, block_);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(block_, n_modes_);
    const double jac = 2.0 * fine.area(k);
    Eigen::VectorXd m(block_);
    for (const auto& pt : rule.points) {
      const Vec2 x = fine.point(k, pt.l0, pt.l1, pt.l2);
      const double psi = patch_hat_value(coarse, patch, i, x);
      const Vec2 u = (1.0 / scale_[i]) * (x - centroid_[i]);
      for (int r = 0; r < block_; ++r) m[r] = mono_eval(u, monos_[r]);
      const double w = pt.w * jac;
      W += (w * psi) * m * m.transpose();
      f.moments(n, x, mom.data());
      for (int j = 0; j < n_modes_; ++j)
        rhs.col(j) += (w * psi * mom[j]) * m;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(W);
    require(llt.info() == Eigen::Success,
            "PatchDataProjection: weighted Gram not positive definite");
    coeff_[i] = llt.solve(rhs);
  }
}

double PatchDataProjection::evaluate(int i, int j, Vec2 x) const {
  const Vec2 u = (1.0 / scale_[i]) * (x - centroid_[i]);
  double s = 0.0;
  for (int r = 0; r < block_; ++r)
    s += coeff_[i](r, j) * mono_eval(u, monos_[r]);
  return s;
}

// ---------------------------------------------------------------------------
// DataApprox
// ---------------------------------------------------------------------------

DataApprox::DataApprox(const Discretization& disc, int n,
                       const SourceMoments& f, const IntervalPatches& ip)
    : disc_(&disc), n_(n), n_modes_(disc.partition.q(n) + 1), ip_(&ip) {
  proj_.reserve(ip.patches.size());
  for (const auto& patch : ip.patches)
    proj_.emplace_back(disc, n, patch, f);
}

double DataApprox::f_htau_mode(int e, int j, Vec2 x) const {
  const MeshLevel& coarse = disc_->space(n_).mesh();
  double s = 0.0;
  for (const auto& [a, i] : ip_->elem_patches[e]) {
    const double psi = patch_hat_value(coarse, ip_->patches[a], i, x);
    s += psi * proj_[a].evaluate(i, j, x);
  }
  return s;
}

double DataApprox::f_htau(int e, Vec2 x, double t) const {
  const LegendreTimeBasis lb = disc_->partition.time_basis(n_);
  double s = 0.0;
  for (int j = 0; j < n_modes_; ++j)
    s += f_htau_mode(e, j, x) * lb.orthonormal(j, t);
  return s;
}

}  // namespace parest
