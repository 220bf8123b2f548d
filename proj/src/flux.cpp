#include "parest/flux.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <ostream>
#include <random>

namespace parest {

// ---------------------------------------------------------------------------
// Patch right-hand sides
// ---------------------------------------------------------------------------

PatchRHS build_patch_rhs(const Discretization& disc, int n,
                         const PatchMixedSpace& pm, const Patch& patch,
                         const Reconstruction& rec,
                         const PatchDataProjection& proj) {
  const int q = disc.partition.q(n);
  const int nm = q + 1;
  const MeshLevel& fine = disc.tilde[n];
  const MeshLevel& coarse = disc.space(n).mesh();
  const TriangleRule& rule = triangle_rule(disc.quad_degree);

  PatchRHS rhs;
  rhs.flux_moments = Eigen::MatrixXd::Zero(pm.n_flux_dofs(), nm);
  rhs.pressure_moments = Eigen::MatrixXd::Zero(pm.n_pressure_dofs(), nm);
  rhs.compat = Eigen::VectorXd::Zero(nm);
  Eigen::VectorXd gsq = Eigen::VectorXd::Zero(nm);

  std::vector<Vec2> pts(rule.size());
  for (int i = 0; i < pm.n_elems(); ++i) {
    const int k = patch.fine_elems[i];
    const double jac = 2.0 * fine.area(k);
    for (int p = 0; p < rule.size(); ++p)
      pts[p] = fine.point(k, rule.points[p].l0, rule.points[p].l1,
                          rule.points[p].l2);
    Eigen::MatrixXd vx, vy, dv;
    pm.rtn(i).tabulate(pts, vx, vy, dv);
    const Vec2 gpsi = patch_hat_gradient(coarse, patch, i);
    const auto& dofs = pm.flux_dofs(i);
    const int nd = pm.rtn(i).ndofs();

    for (int p = 0; p < rule.size(); ++p) {
      const double w = rule.points[p].w * jac;
      const double psi = patch_hat_value(coarse, patch, i, pts[p]);
      const auto modes = rec.point_modes(n, k, pts[p]);
      const auto dtiu = rec.dtiu_orthonormal(n, modes);
      for (int j = 0; j < nm; ++j) {
        const Vec2 tau = -psi * modes.u[j].grad;
        for (int a = 0; a < nd; ++a) {
          if (dofs[a] < 0) continue;
          rhs.flux_moments(dofs[a], j) +=
              w * (tau.x * vx(a, p) + tau.y * vy(a, p));
        }
        const double g = psi * (proj.evaluate(i, j, pts[p]) - dtiu[j].value) -
                         dot(gpsi, modes.u[j].grad);
        for (int r = 0; r < pm.pressure_block(); ++r)
          rhs.pressure_moments(i * pm.pressure_block() + r, j) +=
              w * g * pm.pressure_value(i, r, pts[p]);
        rhs.compat[j] += w * g;
        gsq[j] += w * g * g;
      }
    }
  }
  rhs.g_norm = gsq.cwiseSqrt();

  if (!patch.boundary) {
    for (int j = 0; j < nm; ++j)
      require(std::abs(rhs.compat[j]) <= 1e-9 * (rhs.g_norm[j] + 1e-14),
              "build_patch_rhs: interior patch compatibility violated "
              "(scheme/solver defect)");
  }
  return rhs;
}

// ---------------------------------------------------------------------------
// Coupled space-time solve (test oracle)
// ---------------------------------------------------------------------------

Eigen::MatrixXd solve_patch_flux_spacetime(const PatchMixedSpace& pm,
                                           const PatchRHS& rhs,
                                           const LegendreTimeBasis& lb) {
  const int q = lb.degree();
  const int nm = q + 1;
  const int nf = pm.n_flux_dofs(), np = pm.n_pressure_dofs();
  const double tau = lb.tau();

  Eigen::MatrixXd M, B;
  pm.assemble(M, B);
  const Eigen::VectorXd& e = pm.pressure_means();
  const bool mc = pm.mean_constrained();

  // temporal Gram of the monomial basis that^k on the reference interval
  Eigen::MatrixXd T(nm, nm);
  for (int k = 0; k < nm; ++k)
    for (int m = 0; m < nm; ++m)
      T(k, m) = ((k + m) % 2 == 0) ? tau / double(k + m + 1) : 0.0;
  // S(k,j) = int phi_j that^k dt, by exact Gauss quadrature
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nm, nm);
  GaussRule gr = gauss_on_interval(q + 2, lb.t0(), lb.t1());
  for (int g = 0; g < gr.size(); ++g) {
    const double xi = lb.reference_coord(gr.points[g]);
    double pw = 1.0;
    for (int k = 0; k < nm; ++k) {
      for (int j = 0; j < nm; ++j)
        S(k, j) += gr.weights[g] * pw * lb.orthonormal(j, gr.points[g]);
      pw *= xi;
    }
  }

  const int block = nf + np + (mc ? 1 : 0);
  const int ntot = block * nm;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ntot, ntot);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(ntot);
  auto of = [&](int m) { return m * block; };        // sigma_m offset
  auto op = [&](int m) { return m * block + nf; };   // r_m offset
  for (int k = 0; k < nm; ++k) {
    for (int m = 0; m < nm; ++m) {
      if (T(k, m) == 0.0) continue;
      K.block(of(k), of(m), nf, nf) += T(k, m) * M;
      K.block(of(k), op(m), nf, np) -= T(k, m) * B.transpose();
      K.block(op(k), of(m), np, nf) += T(k, m) * B;
    }
    if (mc) {
      K.block(op(k), of(k) + nf + np, np, 1) = e;
      K.block(of(k) + nf + np, op(k), 1, np) = e.transpose();
    }
    b.segment(of(k), nf) = rhs.flux_moments * S.row(k).transpose();
    b.segment(op(k), np) = rhs.pressure_moments * S.row(k).transpose();
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  Eigen::VectorXd z = lu.solve(b);
  z += lu.solve(b - K * z);
  require((K * z - b).norm() <= 1e-9 * (b.norm() + 1e-30),
          "solve_patch_flux_spacetime: residual too large");

  // back to orthonormal modes: phi_j coefficient = sum_m S(m,j) sigma_m
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nf, nm);
  for (int j = 0; j < nm; ++j)
    for (int m = 0; m < nm; ++m)
      out.col(j) += S(m, j) * z.segment(of(m), nf);
  return out;
}

// ---------------------------------------------------------------------------
// IntervalFluxes
// ---------------------------------------------------------------------------

IntervalFluxes::IntervalFluxes(const Discretization& disc, int n,
                               const Reconstruction& rec,
                               const IntervalPatches& ip,
                               const DataApprox& data, ExecutionPolicy policy)
    : disc_(&disc), n_(n), n_modes_(disc.partition.q(n) + 1), ip_(&ip) {
  const int na = static_cast<int>(ip.patches.size());
  spaces_.reserve(na);
  for (int a = 0; a < na; ++a)
    spaces_.emplace_back(disc.tilde[n], ip.patches[a]);
  coeffs_.resize(na);

  std::vector<double> kkt(na, 0.0), compat(na, 0.0);
  auto solve_patch = [&](int a) {
    const Patch& patch = ip.patches[a];
    const PatchMixedSpace& pm = spaces_[a];
    PatchRHS rhs = build_patch_rhs(disc, n, pm, patch, rec,
                                   data.projection(a));
    Eigen::MatrixXd M, B;
    pm.assemble(M, B);
    SaddleSolver solver(std::move(M), std::move(B), pm.pressure_means(),
                        pm.mean_constrained());
    Eigen::MatrixXd c(pm.n_flux_dofs(), n_modes_);
    for (int j = 0; j < n_modes_; ++j) {
      auto sol = solver.solve(rhs.flux_moments.col(j),
                              rhs.pressure_moments.col(j));
      c.col(j) = sol.flux;
      kkt[a] = std::max(kkt[a], sol.kkt_residual);
    }
    coeffs_[a] = std::move(c);
    compat[a] = rhs.compat.cwiseAbs().maxCoeff();
  };

  std::vector<std::string> errors(na);
  auto guarded = [&](int a) {
    try {
      solve_patch(a);
    } catch (const std::exception& ex) {
      errors[a] = ex.what();
    }
  };
  if (policy == ExecutionPolicy::openmp) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int a = 0; a < na; ++a) guarded(a);
  } else {
    for (int a = 0; a < na; ++a) guarded(a);
  }
  for (int a = 0; a < na; ++a)
    require(errors[a].empty(),
            "patch " + std::to_string(a) + ": " + errors[a]);
  for (int a = 0; a < na; ++a) {
    max_kkt_ = std::max(max_kkt_, kkt[a]);
    max_compat_ = std::max(max_compat_, compat[a]);
  }
  rebuild_tables();
}

void IntervalFluxes::rebuild_tables() {
  const MeshLevel& fine = disc_->tilde[n_];
  const TriangleRule& rule = triangle_rule(disc_->quad_degree);
  const int np = rule.size();
  const int ne = fine.n_elems();

  // generator coefficients per (patch, element slot, mode)
  gen_.assign(spaces_.size(), {});
  for (size_t a = 0; a < spaces_.size(); ++a) {
    const PatchMixedSpace& pm = spaces_[a];
    gen_[a].resize(size_t(pm.n_elems()) * n_modes_);
    for (int i = 0; i < pm.n_elems(); ++i) {
      Eigen::VectorXd local(pm.rtn(i).ndofs());
      for (int j = 0; j < n_modes_; ++j) {
        for (int d = 0; d < pm.rtn(i).ndofs(); ++d) {
          const int gd = pm.flux_dofs(i)[d];
          local[d] = gd >= 0 ? coeffs_[a](gd, j) : 0.0;
        }
        gen_[a][size_t(i) * n_modes_ + j] = pm.rtn(i).gen_coeffs(local.data());
      }
    }
  }

  tab_x_.assign(ne, Eigen::MatrixXd::Zero(n_modes_, np));
  tab_y_.assign(ne, Eigen::MatrixXd::Zero(n_modes_, np));
  tab_div_.assign(ne, Eigen::MatrixXd::Zero(n_modes_, np));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int e = 0; e < ne; ++e) {
    for (int p = 0; p < np; ++p) {
      const Vec2 x = fine.point(e, rule.points[p].l0, rule.points[p].l1,
                                rule.points[p].l2);
      for (const auto& [a, i] : ip_->elem_patches[e]) {
        const PatchMixedSpace& pm = spaces_[a];
        for (int j = 0; j < n_modes_; ++j) {
          const auto& gc = gen_[a][size_t(i) * n_modes_ + j];
          const Vec2 v = pm.rtn(i).value_from_gen(gc, x);
          tab_x_[e](j, p) += v.x;
          tab_y_[e](j, p) += v.y;
          tab_div_[e](j, p) += pm.rtn(i).divergence_from_gen(gc, x);
        }
      }
    }
  }
}

Vec2 IntervalFluxes::sigma_mode(int e, int j, Vec2 x) const {
  Vec2 out{0.0, 0.0};
  for (const auto& [a, i] : ip_->elem_patches[e]) {
    const auto& gc = gen_[a][size_t(i) * n_modes_ + j];
    out = out + spaces_[a].rtn(i).value_from_gen(gc, x);
  }
  return out;
}

double IntervalFluxes::div_sigma_mode(int e, int j, Vec2 x) const {
  double out = 0.0;
  for (const auto& [a, i] : ip_->elem_patches[e]) {
    const auto& gc = gen_[a][size_t(i) * n_modes_ + j];
    out += spaces_[a].rtn(i).divergence_from_gen(gc, x);
  }
  return out;
}

Vec2 IntervalFluxes::sigma_at(int e, Vec2 x, double t) const {
  const LegendreTimeBasis lb = disc_->partition.time_basis(n_);
  Vec2 out{0.0, 0.0};
  for (int j = 0; j < n_modes_; ++j)
    out = out + lb.orthonormal(j, t) * sigma_mode(e, j, x);
  return out;
}

void IntervalFluxes::corrupt_coefficient(int a, int dof, int mode,
                                         double delta) {
  coeffs_[a](dof, mode) += delta;
  rebuild_tables();
}

// ---------------------------------------------------------------------------
// Equilibration audit
// ---------------------------------------------------------------------------

EquilibrationReport check_equilibration(const Discretization& disc, int n,
                                        const Reconstruction& rec,
                                        const IntervalFluxes& fluxes,
                                        const DataApprox& data) {
  const MeshLevel& fine = disc.tilde[n];
  const int q = disc.partition.q(n);
  const LegendreTimeBasis lb = disc.partition.time_basis(n);
  const TriangleRule& rule = triangle_rule(disc.quad_degree);
  const GaussRule tr = gauss_on_interval(q + 1, lb.t0(), lb.t1());

  EquilibrationReport rep;
  rep.elem_residual.assign(fine.n_elems(), 0.0);
  rep.elem_scale.assign(fine.n_elems(), 0.0);
  for (int e = 0; e < fine.n_elems(); ++e) {
    double resid = 0.0, scale = 1e-30;
    for (int p = 0; p < rule.size(); ++p) {
      const Vec2 x = fine.point(e, rule.points[p].l0, rule.points[p].l1,
                                rule.points[p].l2);
      const auto modes = rec.point_modes(n, e, x);
      const auto dtiu = rec.dtiu_orthonormal(n, modes);
      for (int g = 0; g < tr.size(); ++g) {
        const double t = tr.points[g];
        double dt_iu = 0.0, div_sigma = 0.0, fh = 0.0;
        for (int j = 0; j <= q; ++j) {
          const double ph = lb.orthonormal(j, t);
          dt_iu += ph * dtiu[j].value;
          div_sigma += ph * fluxes.table_div(e)(j, p);
          fh += ph * data.f_htau_mode(e, j, x);
        }
        resid = std::max(resid, std::abs(dt_iu + div_sigma - fh));
        scale = std::max(scale, std::abs(fh) + std::abs(dt_iu));
      }
    }
    rep.elem_residual[e] = resid;
    rep.elem_scale[e] = scale;
    rep.max_relative = std::max(rep.max_relative, resid / scale);
  }
  return rep;
}

double normal_jump_audit(const Discretization& disc, int n,
                         const IntervalFluxes& fluxes, int n_edges,
                         int n_points, unsigned seed) {
  const MeshLevel& fine = disc.tilde[n];
  std::vector<int> interior;
  for (int e = 0; e < fine.n_edges(); ++e)
    if (fine.edge_elems(e)[1] >= 0) interior.push_back(e);
  std::mt19937 gen(seed);
  std::shuffle(interior.begin(), interior.end(), gen);
  if (int(interior.size()) > n_edges) interior.resize(n_edges);

  std::uniform_real_distribution<double> sd(0.05, 0.95);
  double worst = 0.0;
  for (int e : interior) {
    const auto [va, vb] = fine.edge_vertices(e);
    const Vec2 a = fine.vertex(va), b = fine.vertex(vb);
    const Vec2 t = (1.0 / norm(b - a)) * (b - a);
    const Vec2 nrm{t.y, -t.x};
    const auto& ee = fine.edge_elems(e);
    for (int s = 0; s < n_points; ++s) {
      const Vec2 x = a + sd(gen) * (b - a);
      for (int j = 0; j < fluxes.n_modes(); ++j) {
        const double j0 = dot(fluxes.sigma_mode(ee[0], j, x), nrm);
        const double j1 = dot(fluxes.sigma_mode(ee[1], j, x), nrm);
        worst = std::max(worst, std::abs(j0 - j1));
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

void dump_fluxes(std::ostream& os, const Discretization& disc, int n,
                 const IntervalFluxes& fluxes) {
  os << "parest-flux 1\n";
  os << "interval " << n << " modes " << fluxes.n_modes() << " patches "
     << fluxes.n_patches() << "\n";
  os.precision(17);
  for (int a = 0; a < fluxes.n_patches(); ++a) {
    const auto& c = fluxes.coeffs(a);
    os << "patch " << a << " vertex "
       << fluxes.space(a).patch().vertex << " dofs " << c.rows() << "\n";
    for (int j = 0; j < c.cols(); ++j)
      for (int i = 0; i < c.rows(); ++i) os << c(i, j) << "\n";
  }
  (void)disc;
}

void write_flux_vtk(std::ostream& os, const Discretization& disc, int n,
                    const IntervalFluxes& fluxes, double t) {
  const MeshLevel& fine = disc.tilde[n];
  os << "# vtk DataFile Version 3.0\n";
  os << "parest flux at t=" << t << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << 3 * fine.n_elems() << " double\n";
  os.precision(12);
  for (int e = 0; e < fine.n_elems(); ++e)
    for (int v : fine.elem_vertices(e))
      os << fine.vertex(v).x << " " << fine.vertex(v).y << " 0\n";
  os << "CELLS " << fine.n_elems() << " " << 4 * fine.n_elems() << "\n";
  for (int e = 0; e < fine.n_elems(); ++e)
    os << "3 " << 3 * e << " " << 3 * e + 1 << " " << 3 * e + 2 << "\n";
  os << "CELL_TYPES " << fine.n_elems() << "\n";
  for (int e = 0; e < fine.n_elems(); ++e) os << "5\n";
  os << "POINT_DATA " << 3 * fine.n_elems() << "\n";
  os << "VECTORS sigma double\n";
  for (int e = 0; e < fine.n_elems(); ++e)
    for (int v : fine.elem_vertices(e)) {
      // nudge towards the centroid so patch hat values stay in-element
      const auto& vv = fine.elem_vertices(e);
      const Vec2 c = (1.0 / 3.0) * (fine.vertex(vv[0]) + fine.vertex(vv[1]) +
                                    fine.vertex(vv[2]));
      const Vec2 x = fine.vertex(v) + 1e-12 * (c - fine.vertex(v));
      const Vec2 s = fluxes.sigma_at(e, x, t);
      os << s.x << " " << s.y << " 0\n";
    }
}

}  // namespace parest
