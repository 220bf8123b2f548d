#include "parest/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace parest {

// ---------------------------------------------------------------------------
// RefinementForest
// ---------------------------------------------------------------------------

std::shared_ptr<RefinementForest> RefinementForest::unit_square(int n) {
  require(n >= 1, "unit_square: n must be >= 1");
  auto f = std::make_shared<RefinementForest>();
  const int nv = n + 1;
  f->verts_.resize(size_t(nv) * nv);
  f->boundary_vertex_.assign(size_t(nv) * nv, false);
  auto vid = [nv](int i, int j) { return j * nv + i; };
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nv; ++i) {
      f->verts_[vid(i, j)] = {double(i) / n, double(j) / n};
      if (i == 0 || i == n || j == 0 || j == n)
        f->boundary_vertex_[vid(i, j)] = true;
    }
  // Two triangles per cell, refinement edge on the cell diagonal so that the
  // macro labelling is compatible for newest-vertex bisection.
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      ForestNode lower, upper;
      lower.v = {vid(i + 1, j + 1), vid(i, j), vid(i + 1, j)};
      upper.v = {vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)};
      f->nodes_.push_back(lower);
      f->nodes_.push_back(upper);
    }
  f->n_macro_ = static_cast<int>(f->nodes_.size());
  for (int i = 0; i < n; ++i) {
    f->boundary_edges_.insert(edge_key(vid(i, 0), vid(i + 1, 0)));
    f->boundary_edges_.insert(edge_key(vid(i, n), vid(i + 1, n)));
    f->boundary_edges_.insert(edge_key(vid(0, i), vid(0, i + 1)));
    f->boundary_edges_.insert(edge_key(vid(n, i), vid(n, i + 1)));
  }
  return f;
}

int RefinementForest::midpoint_vertex(int a, int b) {
  const std::uint64_t key = edge_key(a, b);
  auto it = edge_midpoint_.find(key);
  if (it != edge_midpoint_.end()) return it->second;
  const int m = static_cast<int>(verts_.size());
  verts_.push_back(0.5 * (verts_[a] + verts_[b]));
  const bool bdry = boundary_edges_.count(key) > 0;
  boundary_vertex_.push_back(bdry);
  if (bdry) {
    boundary_edges_.insert(edge_key(a, m));
    boundary_edges_.insert(edge_key(m, b));
  }
  edge_midpoint_.emplace(key, m);
  return m;
}

std::array<int, 2> RefinementForest::ensure_children(int node) {
  ForestNode& nd = nodes_[node];
  if (!nd.is_leaf_node()) return nd.child;
  const int m = midpoint_vertex(nd.v[0], nd.v[1]);
  ForestNode c0, c1;
  c0.v = {nd.v[2], nd.v[0], m};
  c1.v = {nd.v[1], nd.v[2], m};
  c0.parent = c1.parent = node;
  c0.depth = c1.depth = nd.depth + 1;
  const int i0 = static_cast<int>(nodes_.size());
  // nd reference may dangle after push_back; write children via index.
  nodes_.push_back(c0);
  nodes_.push_back(c1);
  nodes_[node].child = {i0, i0 + 1};
  return nodes_[node].child;
}

// ---------------------------------------------------------------------------
// MeshLevel
// ---------------------------------------------------------------------------

MeshLevel::MeshLevel(std::shared_ptr<RefinementForest> forest,
                     std::vector<int> cut)
    : forest_(std::move(forest)), cut_(std::move(cut)) {
  id_ = forest_->next_mesh_id();
  const int ne = n_elems();
  require(ne > 0, "MeshLevel: empty cut");

  area_.resize(ne);
  diam_.resize(ne);
  grad_l_.resize(ne);
  elem_edge_.resize(ne);
  double worst = 0.0;
  std::unordered_map<std::uint64_t, int> edge_ids;
  for (int k = 0; k < ne; ++k) {
    const auto& vv = elem_vertices(k);
    const Vec2 p0 = vertex(vv[0]), p1 = vertex(vv[1]), p2 = vertex(vv[2]);
    const double a2 = cross(p1 - p0, p2 - p0);
    require(a2 > 0.0, "MeshLevel: non-positive element orientation");
    area_[k] = 0.5 * a2;
    const double e0 = norm(p1 - p0), e1 = norm(p2 - p1), e2 = norm(p0 - p2);
    diam_[k] = std::max({e0, e1, e2});
    const Vec2 sides[3] = {p2 - p1, p0 - p2, p1 - p0};
    for (int i = 0; i < 3; ++i)
      grad_l_[k][i] = (1.0 / a2) * Vec2{-sides[i].y, sides[i].x};
    // circumradius / inradius
    const double s = 0.5 * (e0 + e1 + e2);
    worst = std::max(worst, e0 * e1 * e2 * s / (4.0 * area_[k] * area_[k]));

    for (int i = 0; i < 3; ++i) {
      const int a = vv[i], b = vv[(i + 1) % 3];
      const std::uint64_t key = RefinementForest::edge_key(a, b);
      auto [it, inserted] = edge_ids.emplace(key, int(edge_v_.size()));
      if (inserted) {
        edge_v_.emplace_back(std::min(a, b), std::max(a, b));
        edge_elem_.push_back({-1, -1});
      }
      elem_edge_[k][i] = it->second;
      auto& ee = edge_elem_[it->second];
      require(ee[1] < 0, "MeshLevel: edge shared by more than two elements");
      (ee[0] < 0 ? ee[0] : ee[1]) = k;
    }
  }
  shape_reg_ = worst;

  edge_boundary_.resize(edge_v_.size());
  for (size_t e = 0; e < edge_v_.size(); ++e)
    edge_boundary_[e] =
        forest_->edge_on_boundary(edge_v_[e].first, edge_v_[e].second);

  // vertex tables
  vert_local_.assign(forest_->vertices().size(), -1);
  for (int k = 0; k < ne; ++k)
    for (int v : elem_vertices(k))
      if (vert_local_[v] < 0) vert_local_[v] = 0;
  for (size_t v = 0; v < vert_local_.size(); ++v)
    if (vert_local_[v] == 0) {
      vert_local_[v] = static_cast<int>(vert_ids_.size());
      vert_ids_.push_back(static_cast<int>(v));
    }
  vertex_elems_.resize(vert_ids_.size());
  for (int k = 0; k < ne; ++k)
    for (int v : elem_vertices(k))
      vertex_elems_[vert_local_[v]].push_back(k);

  audit_conformity();
}

std::array<double, 3> MeshLevel::barycentric(int k, Vec2 x) const {
  const auto& vv = elem_vertices(k);
  const Vec2 p0 = vertex(vv[0]), p1 = vertex(vv[1]), p2 = vertex(vv[2]);
  const double a2 = 2.0 * area_[k];
  return {cross(p2 - p1, x - p1) / a2, cross(p0 - p2, x - p2) / a2,
          cross(p1 - p0, x - p0) / a2};
}

const std::vector<int>& MeshLevel::elems_at_vertex(int global) const {
  const int loc = vertex_local(global);
  require(loc >= 0, "elems_at_vertex: vertex not in mesh");
  return vertex_elems_[loc];
}

void MeshLevel::audit_conformity() const {
  for (size_t e = 0; e < edge_v_.size(); ++e) {
    const bool interior = edge_elem_[e][1] >= 0;
    if (!interior)
      require(edge_boundary_[e],
              "conformity audit: interior edge with a single element "
              "(hanging node)");
    else
      require(!edge_boundary_[e],
              "conformity audit: boundary edge shared by two elements");
  }
  // No mesh vertex may sit inside another element's edge; with forest cuts
  // this is equivalent to the single-incidence check above, so the edge
  // audit suffices.
}

std::vector<int> MeshLevel::ancestor_map(const MeshLevel& coarse) const {
  require(forest_.get() == coarse.forest_.get(),
          "ancestor_map: meshes from different forests");
  std::vector<int> node_to_elem(forest_->nodes().size(), -1);
  for (int k = 0; k < coarse.n_elems(); ++k)
    node_to_elem[coarse.node_of(k)] = k;
  std::vector<int> map(n_elems(), -1);
  for (int k = 0; k < n_elems(); ++k) {
    int nd = cut_[k];
    while (nd >= 0 && node_to_elem[nd] < 0) nd = forest_->nodes()[nd].parent;
    require(nd >= 0, "ancestor_map: element has no ancestor in coarse mesh");
    map[k] = node_to_elem[nd];
  }
  return map;
}

// ---------------------------------------------------------------------------
// Refinement / coarsening / common refinement
// ---------------------------------------------------------------------------

MeshLevel build_uniform_mesh(int n) {
  auto forest = RefinementForest::unit_square(n);
  std::vector<int> cut(forest->n_macro());
  for (int i = 0; i < forest->n_macro(); ++i) cut[i] = i;
  return MeshLevel(std::move(forest), std::move(cut));
}

namespace {

struct ActiveCut {
  const RefinementForest* forest;
  std::unordered_set<int> active;
  std::unordered_map<std::uint64_t, std::array<int, 2>> edge_elems;

  void add(int nd) {
    active.insert(nd);
    const auto& v = forest->nodes()[nd].v;
    for (int i = 0; i < 3; ++i) {
      auto key = RefinementForest::edge_key(v[i], v[(i + 1) % 3]);
      auto [it, inserted] =
          edge_elems.try_emplace(key, std::array<int, 2>{-1, -1});
      auto& slot = it->second;
      if (slot[0] < 0)
        slot[0] = nd;
      else {
        require(slot[1] < 0, "refine: more than two elements on edge");
        slot[1] = nd;
      }
    }
  }
  void remove(int nd) {
    active.erase(nd);
    const auto& v = forest->nodes()[nd].v;
    for (int i = 0; i < 3; ++i) {
      auto key = RefinementForest::edge_key(v[i], v[(i + 1) % 3]);
      auto it = edge_elems.find(key);
      if (it == edge_elems.end()) continue;
      auto& slot = it->second;
      if (slot[0] == nd) slot[0] = slot[1];
      slot[1] = -1;
    }
  }
  int neighbor(int nd, std::uint64_t key) const {
    auto it = edge_elems.find(key);
    if (it == edge_elems.end()) return -1;
    if (it->second[0] == nd) return it->second[1];
    return it->second[0];
  }
};

}  // namespace

MeshLevel refine(const MeshLevel& mesh, const std::vector<int>& marked) {
  auto forest = mesh.forest_ptr();
  for (int m : marked)
    require(m >= 0 && m < mesh.n_elems(), "refine: marked index out of range");

  ActiveCut cut{forest.get(), {}, {}};
  for (int nd : mesh.cut()) cut.add(nd);

  auto ref_edge_key = [&](int nd) {
    const auto& v = forest->nodes()[nd].v;
    return RefinementForest::edge_key(v[0], v[1]);
  };
  auto split = [&](int nd) {
    const auto ch = forest->ensure_children(nd);
    cut.remove(nd);
    cut.add(ch[0]);
    cut.add(ch[1]);
  };

  std::vector<int> stack;
  size_t guard = 0;
  const size_t guard_max = 64 * (mesh.n_elems() + marked.size() + 16);
  for (int m : marked) {
    stack.push_back(mesh.node_of(m));
    while (!stack.empty()) {
      require(++guard < guard_max, "refine: closure did not terminate");
      const int t = stack.back();
      if (!cut.active.count(t)) {
        stack.pop_back();
        continue;
      }
      const std::uint64_t e = ref_edge_key(t);
      const int nb = cut.neighbor(t, e);
      if (nb >= 0 && ref_edge_key(nb) != e) {
        stack.push_back(nb);
        continue;
      }
      split(t);
      if (nb >= 0) split(nb);
      stack.pop_back();
    }
  }

  std::vector<int> new_cut(cut.active.begin(), cut.active.end());
  std::sort(new_cut.begin(), new_cut.end());
  return MeshLevel(forest, std::move(new_cut));
}

MeshLevel refine_all(const MeshLevel& mesh) {
  std::vector<int> all(mesh.n_elems());
  for (int i = 0; i < mesh.n_elems(); ++i) all[i] = i;
  return refine(mesh, all);
}

MeshLevel coarsen(const MeshLevel& mesh, const std::vector<int>& marked) {
  auto forest = mesh.forest_ptr();
  const auto& nodes = forest->nodes();
  std::unordered_set<int> active(mesh.cut().begin(), mesh.cut().end());
  std::unordered_set<int> marked_nodes;
  for (int m : marked) {
    require(m >= 0 && m < mesh.n_elems(), "coarsen: marked index out of range");
    marked_nodes.insert(mesh.node_of(m));
  }

  // Children created by one bisection share their peak vertex (the edge
  // midpoint). A midpoint is removable when every active element touching it
  // is a marked child with that peak and its sibling is active and marked too.
  std::unordered_map<int, std::vector<int>> by_vertex;
  for (int nd : active)
    for (int v : nodes[nd].v) by_vertex[v].push_back(nd);

  auto collapsible_child = [&](int nd, int m) {
    const ForestNode& c = nodes[nd];
    if (c.parent < 0 || c.v[2] != m) return false;
    if (!marked_nodes.count(nd)) return false;
    const auto& sib = nodes[c.parent].child;
    const int other = (sib[0] == nd) ? sib[1] : sib[0];
    return active.count(other) > 0 && marked_nodes.count(other) > 0;
  };

  std::vector<int> new_cut;
  std::unordered_set<int> removed, added;
  std::vector<int> mids;
  for (const auto& [v, elems] : by_vertex) mids.push_back(v);
  std::sort(mids.begin(), mids.end());
  for (int m : mids) {
    const auto& elems = by_vertex[m];
    bool ok = !elems.empty();
    for (int nd : elems)
      if (!collapsible_child(nd, m)) {
        ok = false;
        break;
      }
    if (!ok) continue;
    for (int nd : elems) {
      removed.insert(nd);
      added.insert(nodes[nd].parent);
    }
  }
  for (int nd : active)
    if (!removed.count(nd)) new_cut.push_back(nd);
  for (int nd : added) new_cut.push_back(nd);
  std::sort(new_cut.begin(), new_cut.end());
  return MeshLevel(forest, std::move(new_cut));
}

MeshLevel coarsen_all(const MeshLevel& mesh) {
  std::vector<int> all(mesh.n_elems());
  for (int i = 0; i < mesh.n_elems(); ++i) all[i] = i;
  return coarsen(mesh, all);
}

CommonRefinement common_refinement(const MeshLevel& prev,
                                   const MeshLevel& next) {
  require(prev.forest_ptr().get() == next.forest_ptr().get(),
          "common_refinement: meshes from different forests");
  const auto& forest = prev.forest();
  const auto& nodes = forest.nodes();

  std::unordered_set<int> prev_set(prev.cut().begin(), prev.cut().end());
  std::unordered_set<int> next_set(next.cut().begin(), next.cut().end());

  auto has_ancestor_or_self_in = [&](int nd,
                                     const std::unordered_set<int>& s) {
    while (nd >= 0) {
      if (s.count(nd)) return true;
      nd = nodes[nd].parent;
    }
    return false;
  };

  std::vector<int> tilde;
  for (int x : prev.cut())
    if (has_ancestor_or_self_in(x, next_set)) tilde.push_back(x);
  for (int y : next.cut())
    if (!prev_set.count(y) &&
        has_ancestor_or_self_in(nodes[y].parent, prev_set))
      tilde.push_back(y);
  std::sort(tilde.begin(), tilde.end());

  CommonRefinement out{MeshLevel(prev.forest_ptr(), std::move(tilde)), {}, {}};
  out.to_prev = out.mesh.ancestor_map(prev);
  out.to_next = out.mesh.ancestor_map(next);
  return out;
}

// ---------------------------------------------------------------------------
// Patches
// ---------------------------------------------------------------------------

std::vector<Patch> vertex_patches(const MeshLevel& coarse,
                                  const MeshLevel& fine,
                                  const std::vector<int>& fine_degree) {
  require(int(fine_degree.size()) == fine.n_elems(),
          "vertex_patches: degree vector size mismatch");
  const std::vector<int> fine_to_coarse = fine.ancestor_map(coarse);

  std::vector<Patch> patches;
  patches.reserve(coarse.n_vertices());
  for (int lv = 0; lv < coarse.n_vertices(); ++lv) {
    const int a = coarse.vertex_ids()[lv];
    Patch p;
    p.vertex = a;
    p.boundary = coarse.vertex_on_boundary(a);
    p.coarse_elems = coarse.elems_at_vertex(a);
    std::unordered_set<int> in_patch_coarse(p.coarse_elems.begin(),
                                            p.coarse_elems.end());
    std::unordered_set<int> in_patch_fine;
    for (int k = 0; k < fine.n_elems(); ++k)
      if (in_patch_coarse.count(fine_to_coarse[k])) {
        p.fine_elems.push_back(k);
        in_patch_fine.insert(k);
      }
    p.degree = 1;
    p.coarse_parent.reserve(p.fine_elems.size());
    p.hat_index.reserve(p.fine_elems.size());
    for (int k : p.fine_elems) {
      p.degree = std::max(p.degree, fine_degree[k] + 1);
      const int parent = fine_to_coarse[k];
      p.coarse_parent.push_back(parent);
      const auto& pv = coarse.elem_vertices(parent);
      int hi = -1;
      for (int i = 0; i < 3; ++i)
        if (pv[i] == a) hi = i;
      require(hi >= 0, "vertex_patches: parent does not contain the vertex");
      p.hat_index.push_back(hi);
    }
    p.interior_edge.resize(p.fine_elems.size());
    p.zero_trace.resize(p.fine_elems.size());
    for (size_t i = 0; i < p.fine_elems.size(); ++i) {
      const int k = p.fine_elems[i];
      for (int e = 0; e < 3; ++e) {
        const int eid = fine.elem_edges(k)[e];
        const auto& ee = fine.edge_elems(eid);
        const int other = (ee[0] == k) ? ee[1] : ee[0];
        const bool interior = other >= 0 && in_patch_fine.count(other) > 0;
        p.interior_edge[i][e] = interior;
        bool zt = !interior;
        if (p.boundary && fine.edge_on_boundary(eid)) zt = false;
        p.zero_trace[i][e] = zt;
      }
    }
    patches.push_back(std::move(p));
  }
  return patches;
}

double patch_hat_value(const MeshLevel& coarse, const Patch& patch, int i,
                       Vec2 x) {
  const auto l = coarse.barycentric(patch.coarse_parent[i], x);
  return l[patch.hat_index[i]];
}

Vec2 patch_hat_gradient(const MeshLevel& coarse, const Patch& patch, int i) {
  return coarse.grad_lambda(patch.coarse_parent[i])[patch.hat_index[i]];
}

// ---------------------------------------------------------------------------
// I/O
// ---------------------------------------------------------------------------

namespace {
int macro_grid_size(const RefinementForest& f) {
  // n macro cells per side <=> 2 n^2 macro triangles
  const int n2 = f.n_macro() / 2;
  const int n = static_cast<int>(std::lround(std::sqrt(double(n2))));
  require(2 * n * n == f.n_macro(), "macro_grid_size: unexpected macro count");
  return n;
}
}  // namespace

void RefinementForest::dump(std::ostream& os) const {
  os << "parest-forest 1\n";
  os << "macro " << macro_grid_size(*this) << "\n";
  os << "vertices " << verts_.size() << "\n";
  os.precision(17);
  for (const auto& v : verts_) os << v.x << " " << v.y << "\n";
  std::vector<int> bisected;
  for (size_t i = 0; i < nodes_.size(); ++i)
    if (!nodes_[i].is_leaf_node()) bisected.push_back(static_cast<int>(i));
  // children were appended in creation order, so replaying parents in order
  // of their first child id reproduces identical ids
  std::sort(bisected.begin(), bisected.end(), [&](int a, int b) {
    return nodes_[a].child[0] < nodes_[b].child[0];
  });
  os << "bisections " << bisected.size() << "\n";
  for (int nd : bisected) os << nd << "\n";
}

std::shared_ptr<RefinementForest> RefinementForest::load(std::istream& is) {
  std::string tag;
  int version = 0;
  is >> tag >> version;
  require(tag == "parest-forest" && version == 1,
          "forest load: bad header");
  int n = 0;
  is >> tag >> n;
  require(tag == "macro" && n >= 1, "forest load: bad macro record");
  size_t nv = 0;
  is >> tag >> nv;
  require(tag == "vertices", "forest load: bad vertex record");
  std::vector<Vec2> verts(nv);
  for (auto& v : verts) is >> v.x >> v.y;
  size_t nb = 0;
  is >> tag >> nb;
  require(tag == "bisections", "forest load: bad bisection record");
  auto f = unit_square(n);
  for (size_t i = 0; i < nb; ++i) {
    int nd = -1;
    is >> nd;
    require(nd >= 0 && nd < int(f->nodes_.size()),
            "forest load: bisection of unknown node");
    f->ensure_children(nd);
  }
  require(f->verts_.size() == nv, "forest load: vertex count mismatch");
  for (size_t i = 0; i < nv; ++i)
    require(std::abs(f->verts_[i].x - verts[i].x) < 1e-12 &&
                std::abs(f->verts_[i].y - verts[i].y) < 1e-12,
            "forest load: vertex coordinates mismatch");
  return f;
}

void MeshLevel::dump(std::ostream& os) const {
  forest_->dump(os);
  os << "cut " << cut_.size() << "\n";
  for (int nd : cut_) os << nd << "\n";
  os << "triangles " << cut_.size() << "\n";
  for (int k = 0; k < n_elems(); ++k) {
    const auto& v = elem_vertices(k);
    os << v[0] << " " << v[1] << " " << v[2] << "\n";
  }
}

MeshLevel MeshLevel::load(std::istream& is) {
  auto forest = RefinementForest::load(is);
  return load_cut_tail(is, std::move(forest));
}

MeshLevel MeshLevel::load(std::istream& is,
                          std::shared_ptr<RefinementForest> forest) {
  auto fresh = RefinementForest::load(is);
  require(fresh->nodes().size() <= forest->nodes().size(),
          "mesh load: forest does not cover the dumped hierarchy");
  return load_cut_tail(is, std::move(forest));
}

MeshLevel MeshLevel::load_cut_tail(std::istream& is,
                                   std::shared_ptr<RefinementForest> forest) {
  std::string tag;
  size_t ne = 0;
  is >> tag >> ne;
  require(tag == "cut", "mesh load: bad cut record");
  std::vector<int> cut(ne);
  for (auto& nd : cut) {
    is >> nd;
    require(nd >= 0 && nd < int(forest->nodes().size()),
            "mesh load: cut references unknown node");
  }
  is >> tag >> ne;  // triangles section is informational
  require(tag == "triangles" && ne == cut.size(),
          "mesh load: bad triangle record");
  for (size_t i = 0; i < 3 * ne; ++i) {
    int v;
    is >> v;
  }
  return MeshLevel(std::move(forest), std::move(cut));
}

void MeshLevel::write_vtk(std::ostream& os) const {
  os << "# vtk DataFile Version 3.0\n";
  os << "parest mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << n_vertices() << " double\n";
  os.precision(17);
  for (int v : vert_ids_)
    os << vertex(v).x << " " << vertex(v).y << " 0\n";
  os << "CELLS " << n_elems() << " " << 4 * n_elems() << "\n";
  for (int k = 0; k < n_elems(); ++k) {
    const auto& v = elem_vertices(k);
    os << "3 " << vert_local_[v[0]] << " " << vert_local_[v[1]] << " "
       << vert_local_[v[2]] << "\n";
  }
  os << "CELL_TYPES " << n_elems() << "\n";
  for (int k = 0; k < n_elems(); ++k) os << "5\n";
}

}  // namespace parest
