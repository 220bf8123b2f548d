#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "parest/flux.hpp"

#include <cmath>
#include <memory>
#include <random>

using namespace parest;

namespace {

double ms1_u(Vec2 p, double t) {
  return std::sin(M_PI * p.x) * std::sin(M_PI * p.y) * std::exp(-t);
}
double ms1_f(Vec2 p, double t) {
  return (2.0 * M_PI * M_PI - 1.0) * ms1_u(p, t);
}
double ms2_u(Vec2 p, double t) {
  return p.x * (1 - p.x) * p.y * (1 - p.y) * (1 + t);
}
double ms2_f(Vec2 p, double t) {
  return p.x * (1 - p.x) * p.y * (1 - p.y) +
         2.0 * (1 + t) * (p.x * (1 - p.x) + p.y * (1 - p.y));
}

struct FluxRun {
  Discretization disc;
  DiscreteSolution sol;
  SourceMoments sm;
  Reconstruction rec;
  IntervalPatches ip;
  DataApprox da;
  std::unique_ptr<IntervalFluxes> fluxes;

  FluxRun(Discretization d, SpaceTimeFn f, std::function<double(Vec2)> u0,
          int n, ExecutionPolicy policy = ExecutionPolicy::openmp)
      : disc(std::move(d)),
        sol(HeatSolver(disc, f).solve(u0)),
        sm(disc, f),
        rec(disc, sol),
        ip(build_interval_patches(disc, n)),
        da(disc, n, sm, ip) {
    fluxes = std::make_unique<IntervalFluxes>(disc, n, rec, ip, da, policy);
  }
};

Discretization fixed_mesh_disc(int n, int p, int N, int q, double T = 1.0) {
  MeshLevel mesh = build_uniform_mesh(n);
  std::vector<HpSpace> spaces;
  for (int l = 0; l <= N; ++l) spaces.emplace_back(mesh, p, true);
  return Discretization::build(TimePartition::uniform(T, N, q),
                               std::move(spaces));
}

Vec2 random_point_in(const MeshLevel& mesh, int e, std::mt19937& gen) {
  std::uniform_real_distribution<double> d(0.1, 0.8);
  double l1 = d(gen), l2 = d(gen);
  if (l1 + l2 > 0.95) {
    l1 *= 0.4;
    l2 *= 0.4;
  }
  return mesh.point(e, 1.0 - l1 - l2, l1, l2);
}

}  // namespace

TEST_CASE("zero problem produces zero patch data and zero fluxes") {
  auto run = std::make_unique<FluxRun>(
      fixed_mesh_disc(2, 2, 1, 1), [](Vec2, double) { return 0.0; },
      [](Vec2) { return 0.0; }, 1);
  for (int a = 0; a < run->fluxes->n_patches(); ++a) {
    CHECK(run->fluxes->coeffs(a).norm() == 0.0);
    PatchRHS rhs = build_patch_rhs(run->disc, 1, run->fluxes->space(a),
                                   run->ip.patches[a], run->rec,
                                   run->da.projection(a));
    CHECK(rhs.flux_moments.norm() == 0.0);
    CHECK(rhs.pressure_moments.norm() == 0.0);
  }
  EquilibrationReport rep = check_equilibration(run->disc, 1, run->rec,
                                                *run->fluxes, run->da);
  CHECK(rep.max_relative == 0.0);
}

TEST_CASE("interior patch compatibility holds to near roundoff") {
  auto run = std::make_unique<FluxRun>(fixed_mesh_disc(4, 2, 2, 1), ms1_f,
                                       [](Vec2 p) { return ms1_u(p, 0); }, 2);
  int n_interior = 0;
  for (size_t a = 0; a < run->ip.patches.size(); ++a) {
    const auto& patch = run->ip.patches[a];
    PatchRHS rhs = build_patch_rhs(run->disc, 2, run->fluxes->space(int(a)),
                                   patch, run->rec, run->da.projection(int(a)));
    if (!patch.boundary) {
      ++n_interior;
      for (int j = 0; j < rhs.compat.size(); ++j)
        CHECK(std::abs(rhs.compat[j]) <= 1e-11 * (rhs.g_norm[j] + 1e-12));
    }
  }
  CHECK(n_interior == 9);
}

TEST_CASE("exact polynomial runs recover sigma = -psi grad(u) per patch") {
  auto run = std::make_unique<FluxRun>(fixed_mesh_disc(2, 4, 1, 1), ms2_f,
                                       [](Vec2 p) { return ms2_u(p, 0); }, 1);
  std::mt19937 gen(3);
  const MeshLevel& fine = run->disc.tilde[1];
  const MeshLevel& coarse = run->disc.space(1).mesh();
  for (int a = 0; a < run->fluxes->n_patches(); ++a) {
    const auto& patch = run->ip.patches[a];
    const auto& pm = run->fluxes->space(a);
    for (int i = 0; i < pm.n_elems(); ++i) {
      const int k = patch.fine_elems[i];
      const Vec2 x = random_point_in(fine, k, gen);
      const double psi = patch_hat_value(coarse, patch, i, x);
      const auto modes = run->rec.point_modes(1, k, x);
      for (int j = 0; j < run->fluxes->n_modes(); ++j) {
        Eigen::VectorXd local(pm.rtn(i).ndofs());
        for (int d = 0; d < pm.rtn(i).ndofs(); ++d) {
          const int gd = pm.flux_dofs(i)[d];
          local[d] = gd >= 0 ? run->fluxes->coeffs(a)(gd, j) : 0.0;
        }
        const Vec2 sig = pm.rtn(i).value(local.data(), x);
        const Vec2 expect = -psi * modes.u[j].grad;
        CHECK(std::abs(sig.x - expect.x) <= 1e-10 * (1.0 + norm(expect)));
        CHECK(std::abs(sig.y - expect.y) <= 1e-10 * (1.0 + norm(expect)));
      }
    }
  }
}

TEST_CASE("decoupled and coupled space-time solves agree") {
  for (int q : {0, 2}) {
    auto run = std::make_unique<FluxRun>(
        fixed_mesh_disc(2, 2, 1, q), ms1_f,
        [](Vec2 p) { return ms1_u(p, 0); }, 1);
    const LegendreTimeBasis lb = run->disc.partition.time_basis(1);
    for (int a = 0; a < run->fluxes->n_patches(); ++a) {
      PatchRHS rhs = build_patch_rhs(run->disc, 1, run->fluxes->space(a),
                                     run->ip.patches[a], run->rec,
                                     run->da.projection(a));
      Eigen::MatrixXd st =
          solve_patch_flux_spacetime(run->fluxes->space(a), rhs, lb);
      const double scale = 1.0 + run->fluxes->coeffs(a).norm();
      CHECK((st - run->fluxes->coeffs(a)).lpNorm<Eigen::Infinity>() <=
            1e-10 * scale);
    }
  }
}

TEST_CASE("equilibration identity holds pointwise") {
  for (auto [p, q] : {std::pair{1, 0}, std::pair{2, 1}, std::pair{3, 2}}) {
    auto run = std::make_unique<FluxRun>(
        fixed_mesh_disc(4, p, 2, q, 0.5), ms1_f,
        [](Vec2 pt) { return ms1_u(pt, 0); }, 1);
    EquilibrationReport rep = check_equilibration(run->disc, 1, run->rec,
                                                  *run->fluxes, run->da);
    CHECK(rep.max_relative <= 1e-9);
  }
}

TEST_CASE("corrupting a flux coefficient is detected") {
  auto run = std::make_unique<FluxRun>(fixed_mesh_disc(4, 2, 1, 1), ms1_f,
                                       [](Vec2 p) { return ms1_u(p, 0); }, 1);
  // dof 0 of patch 0 is an edge normal moment; its divergence is nonzero
  run->fluxes->corrupt_coefficient(0, 0, 0, 0.5);
  EquilibrationReport rep = check_equilibration(run->disc, 1, run->rec,
                                                *run->fluxes, run->da);
  CHECK(rep.max_relative > 1e-9);
}

TEST_CASE("patch contributions telescope to f_htau - dt(I u)") {
  auto run = std::make_unique<FluxRun>(fixed_mesh_disc(4, 2, 2, 1), ms1_f,
                                       [](Vec2 p) { return ms1_u(p, 0); }, 2);
  const int n = 2;
  const MeshLevel& fine = run->disc.tilde[n];
  const MeshLevel& coarse = run->disc.space(n).mesh();
  std::mt19937 gen(7);
  for (int e = 0; e < fine.n_elems(); ++e) {
    const Vec2 x = random_point_in(fine, e, gen);
    const auto modes = run->rec.point_modes(n, e, x);
    const auto dtiu = run->rec.dtiu_orthonormal(n, modes);
    for (int j = 0; j < run->da.n_modes(); ++j) {
      double sum_g = 0.0;
      for (const auto& [a, i] : run->ip.elem_patches[e]) {
        const auto& patch = run->ip.patches[a];
        const double psi = patch_hat_value(coarse, patch, i, x);
        const Vec2 gpsi = patch_hat_gradient(coarse, patch, i);
        sum_g += psi * (run->da.projection(a).evaluate(i, j, x) -
                        dtiu[j].value) -
                 dot(gpsi, modes.u[j].grad);
      }
      const double expect = run->da.f_htau_mode(e, j, x) - dtiu[j].value;
      CHECK(std::abs(sum_g - expect) <= 1e-10 * (1.0 + std::abs(expect)));
    }
  }
}

TEST_CASE("zero-extended fluxes are H(div) conforming across mesh change") {
  MeshLevel base = build_uniform_mesh(2);
  MeshLevel fine = refine(base, {0, 1, 2});
  std::vector<HpSpace> spaces;
  spaces.emplace_back(fine, 2, true);
  spaces.emplace_back(fine, 2, true);
  spaces.emplace_back(base, 2, true);  // coarsening into step 2
  Discretization disc = Discretization::build(
      TimePartition::uniform(1.0, 2, 1), std::move(spaces));
  auto run = std::make_unique<FluxRun>(std::move(disc), ms1_f,
                                       [](Vec2 p) { return ms1_u(p, 0); }, 2);
  CHECK(normal_jump_audit(run->disc, 2, *run->fluxes) <= 1e-10);
  EquilibrationReport rep = check_equilibration(run->disc, 2, run->rec,
                                                *run->fluxes, run->da);
  CHECK(rep.max_relative <= 1e-9);
}

TEST_CASE("serial and OpenMP equilibration produce identical coefficients") {
  auto a = std::make_unique<FluxRun>(fixed_mesh_disc(4, 2, 1, 1), ms1_f,
                                     [](Vec2 p) { return ms1_u(p, 0); }, 1,
                                     ExecutionPolicy::serial);
  auto b = std::make_unique<FluxRun>(fixed_mesh_disc(4, 2, 1, 1), ms1_f,
                                     [](Vec2 p) { return ms1_u(p, 0); }, 1,
                                     ExecutionPolicy::openmp);
  for (int p = 0; p < a->fluxes->n_patches(); ++p)
    CHECK((a->fluxes->coeffs(p) - b->fluxes->coeffs(p)).norm() == 0.0);
}

TEST_CASE("flux dump and vtk export smoke") {
  auto run = std::make_unique<FluxRun>(fixed_mesh_disc(2, 1, 1, 0), ms1_f,
                                       [](Vec2 p) { return ms1_u(p, 0); }, 1);
  std::stringstream ss;
  dump_fluxes(ss, run->disc, 1, *run->fluxes);
  CHECK(ss.str().rfind("parest-flux 1", 0) == 0);
  std::stringstream vtk;
  write_flux_vtk(vtk, run->disc, 1, *run->fluxes, 0.5);
  CHECK(vtk.str().find("VECTORS sigma double") != std::string::npos);
}
