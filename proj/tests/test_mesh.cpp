#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "parest/mesh.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace parest;

namespace {
double elem_shape_ratio(const MeshLevel& m, int k) {
  const auto& v = m.elem_vertices(k);
  const Vec2 p0 = m.vertex(v[0]), p1 = m.vertex(v[1]), p2 = m.vertex(v[2]);
  const double e0 = norm(p1 - p0), e1 = norm(p2 - p1), e2 = norm(p0 - p2);
  const double area = 0.5 * cross(p1 - p0, p2 - p0);
  const double s = 0.5 * (e0 + e1 + e2);
  return e0 * e1 * e2 * s / (4.0 * area * area);
}
}  // namespace

TEST_CASE("uniform meshes have the expected counts") {
  MeshLevel m1 = build_uniform_mesh(1);
  CHECK(m1.n_elems() == 2);
  CHECK(m1.n_vertices() == 4);

  MeshLevel m2 = build_uniform_mesh(2);
  CHECK(m2.n_elems() == 8);
  CHECK(m2.n_vertices() == 9);

  MeshLevel m4 = build_uniform_mesh(4);
  CHECK(m4.n_elems() == 32);
  const double r0 = elem_shape_ratio(m4, 0);
  for (int k = 0; k < m4.n_elems(); ++k)
    CHECK(elem_shape_ratio(m4, k) == doctest::Approx(r0).epsilon(1e-13));
  CHECK(m4.shape_regularity() == doctest::Approx(r0).epsilon(1e-13));

  double area = 0.0;
  for (int k = 0; k < m4.n_elems(); ++k) area += m4.area(k);
  CHECK(area == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("refine with empty mark set returns an identical mesh") {
  MeshLevel m = build_uniform_mesh(2);
  MeshLevel r = refine(m, {});
  CHECK(r.cut() == m.cut());
}

TEST_CASE("single-mark refinement stays conforming") {
  MeshLevel m = build_uniform_mesh(1);
  MeshLevel r = refine(m, {0});
  CHECK(r.n_elems() >= 4);
  double area = 0.0;
  for (int k = 0; k < r.n_elems(); ++k) area += r.area(k);
  CHECK(area == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("refine all bisects every element") {
  MeshLevel m = build_uniform_mesh(2);
  MeshLevel r = refine_all(m);
  CHECK(r.n_elems() == 2 * m.n_elems());
  for (int nd : m.cut())
    CHECK_FALSE(m.forest().nodes()[nd].is_leaf_node());
}

TEST_CASE("children partition their parents") {
  MeshLevel m = build_uniform_mesh(2);
  MeshLevel r = refine(m, {0, 3, 5});
  const auto& nodes = r.forest().nodes();
  auto area_of = [&](int nd) {
    const auto& v = nodes[nd].v;
    const auto& verts = r.forest().vertices();
    return 0.5 * cross(verts[v[1]] - verts[v[0]], verts[v[2]] - verts[v[0]]);
  };
  for (size_t nd = 0; nd < nodes.size(); ++nd) {
    if (nodes[nd].is_leaf_node()) continue;
    const double pa = area_of(int(nd));
    const double ca = area_of(nodes[nd].child[0]) + area_of(nodes[nd].child[1]);
    CHECK(std::abs(pa - ca) <= 1e-12 * pa);
  }
}

TEST_CASE("random refine/coarsen sequences keep conformity") {
  std::mt19937 gen(42);
  MeshLevel m = build_uniform_mesh(2);
  for (int round = 0; round < 8; ++round) {
    std::vector<int> marked;
    std::uniform_int_distribution<int> coin(0, 2);
    for (int k = 0; k < m.n_elems(); ++k)
      if (coin(gen) == 0) marked.push_back(k);
    m = (round % 3 == 2) ? coarsen(m, marked) : refine(m, marked);
    // construction runs the conformity audit; also check the area
    double area = 0.0;
    for (int k = 0; k < m.n_elems(); ++k) area += m.area(k);
    CHECK(area == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("coarsen undoes uniform refinement") {
  MeshLevel m = build_uniform_mesh(2);
  MeshLevel fine = refine_all(m);
  MeshLevel back = coarsen_all(fine);
  CHECK(back.cut() == m.cut());
}

TEST_CASE("common refinement of equal meshes is the identity") {
  MeshLevel m = build_uniform_mesh(2);
  MeshLevel r = refine(m, {1, 2});
  auto cr = common_refinement(r, r);
  CHECK(cr.mesh.cut() == r.cut());
  for (int k = 0; k < cr.mesh.n_elems(); ++k) {
    CHECK(cr.to_prev[k] == k);
    CHECK(cr.to_next[k] == k);
  }
}

TEST_CASE("common refinement with pure refinement is the finer mesh") {
  MeshLevel m = build_uniform_mesh(2);
  MeshLevel f = refine_all(m);
  auto cr = common_refinement(m, f);
  CHECK(cr.mesh.cut() == f.cut());
}

TEST_CASE("common refinement of diverging refinements contains both") {
  MeshLevel m = build_uniform_mesh(1);
  MeshLevel a = refine(m, {0});
  MeshLevel b = refine(m, {1});
  auto cr = common_refinement(a, b);
  CHECK(cr.mesh.n_elems() >= a.n_elems());
  CHECK(cr.mesh.n_elems() >= b.n_elems());
  // containment maps: each fine element's barycenter lies in its parents
  for (int k = 0; k < cr.mesh.n_elems(); ++k) {
    const Vec2 bc = cr.mesh.point(k, 1.0 / 3, 1.0 / 3, 1.0 / 3);
    for (auto [mesh, parent] :
         {std::pair<const MeshLevel*, int>{&a, cr.to_prev[k]},
          std::pair<const MeshLevel*, int>{&b, cr.to_next[k]}}) {
      const auto l = mesh->barycentric(parent, bc);
      for (double li : l) CHECK(li >= -1e-12);
    }
  }
  // children areas sum to parent areas
  std::vector<double> sums(a.n_elems(), 0.0);
  for (int k = 0; k < cr.mesh.n_elems(); ++k)
    sums[cr.to_prev[k]] += cr.mesh.area(k);
  for (int k = 0; k < a.n_elems(); ++k)
    CHECK(sums[k] == doctest::Approx(a.area(k)).epsilon(1e-12));
}

TEST_CASE("common refinement rejects meshes from different forests") {
  MeshLevel m1 = build_uniform_mesh(2);
  MeshLevel m2 = build_uniform_mesh(2);
  CHECK_THROWS(common_refinement(m1, m2));
}

TEST_CASE("vertex patches on the uniform 4x4 mesh") {
  MeshLevel m = build_uniform_mesh(4);
  auto cr = common_refinement(m, m);
  std::vector<int> degrees(cr.mesh.n_elems(), 1);
  auto patches = vertex_patches(m, cr.mesh, degrees);
  CHECK(int(patches.size()) == m.n_vertices());

  int interior_count = 0;
  for (const auto& p : patches) {
    CHECK(p.degree == 2);  // p_a = max(p+1)
    if (!p.boundary) {
      ++interior_count;
      CHECK(p.fine_elems.size() == 6);
      // interior patch: every patch-boundary edge has zero normal trace
      for (size_t i = 0; i < p.fine_elems.size(); ++i)
        for (int e = 0; e < 3; ++e)
          CHECK(p.zero_trace[i][e] == !p.interior_edge[i][e]);
    }
  }
  CHECK(interior_count == 9);

  // corner vertex: boundary kind, zero-trace set strictly smaller than the
  // patch boundary
  const Vec2 origin{0.0, 0.0};
  bool found_corner = false;
  for (const auto& p : patches) {
    if (norm(m.vertex(p.vertex) - origin) > 1e-14) continue;
    found_corner = true;
    CHECK(p.boundary);
    int n_bdry = 0, n_zt = 0;
    for (size_t i = 0; i < p.fine_elems.size(); ++i)
      for (int e = 0; e < 3; ++e) {
        if (!p.interior_edge[i][e]) ++n_bdry;
        if (p.zero_trace[i][e]) ++n_zt;
      }
    CHECK(n_zt < n_bdry);
    CHECK(n_zt > 0);
  }
  CHECK(found_corner);
}

TEST_CASE("hat functions form a partition of unity") {
  MeshLevel coarse = build_uniform_mesh(4);
  MeshLevel fine = refine(coarse, {0, 5, 9, 14});
  auto cr = common_refinement(coarse, fine);
  std::vector<int> degrees(cr.mesh.n_elems(), 2);
  auto patches = vertex_patches(coarse, cr.mesh, degrees);

  std::mt19937 gen(17);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 x{dist(gen), dist(gen)};
    int elem = -1;
    for (int k = 0; k < cr.mesh.n_elems() && elem < 0; ++k) {
      const auto l = cr.mesh.barycentric(k, x);
      if (l[0] >= -1e-13 && l[1] >= -1e-13 && l[2] >= -1e-13) elem = k;
    }
    REQUIRE(elem >= 0);
    double sum = 0.0;
    for (const auto& p : patches)
      for (size_t i = 0; i < p.fine_elems.size(); ++i)
        if (p.fine_elems[i] == elem) sum += patch_hat_value(coarse, p, i, x);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("mesh dump/load round trip") {
  MeshLevel m = build_uniform_mesh(2);
  MeshLevel r = refine(m, {0, 4});
  std::stringstream ss;
  r.dump(ss);
  MeshLevel loaded = MeshLevel::load(ss);
  CHECK(loaded.cut() == r.cut());
  CHECK(loaded.n_vertices() == r.n_vertices());
  for (int k = 0; k < r.n_elems(); ++k)
    CHECK(loaded.elem_vertices(k) == r.elem_vertices(k));
}

TEST_CASE("vtk export smoke test") {
  MeshLevel m = build_uniform_mesh(2);
  std::stringstream ss;
  m.write_vtk(ss);
  CHECK(ss.str().substr(0, 5) == "# vtk");
  CHECK(ss.str().find("CELL_TYPES") != std::string::npos);
}
