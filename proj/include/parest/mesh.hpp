#pragma once

#include "parest/common.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace parest {

/// One triangle of the shared bisection forest. Vertices are ordered so that
/// (v[0],v[1]) is the refinement edge and v[2] the peak (newest vertex);
/// orientation is counterclockwise. Bisection inserts the midpoint m of
/// (v[0],v[1]) and produces children (v[2],v[0],m) and (v[1],v[2],m).
struct ForestNode {
  std::array<int, 3> v{-1, -1, -1};
  int parent = -1;
  std::array<int, 2> child{-1, -1};
  int depth = 0;
  bool is_leaf_node() const { return child[0] < 0; }
};

/// Shared newest-vertex-bisection forest over the unit square macro mesh.
/// Every mesh in a run is a conforming cut of this forest, which makes exact
/// common refinements and element containment available by integer walks.
class RefinementForest {
 public:
  static std::shared_ptr<RefinementForest> unit_square(int n);

  const std::vector<Vec2>& vertices() const { return verts_; }
  const std::vector<ForestNode>& nodes() const { return nodes_; }
  int n_macro() const { return n_macro_; }

  bool vertex_on_boundary(int v) const { return boundary_vertex_[v]; }
  bool edge_on_boundary(int a, int b) const {
    return boundary_edges_.count(edge_key(a, b)) > 0;
  }

  /// Children of a node, bisecting it first if needed.
  std::array<int, 2> ensure_children(int node);

  int next_mesh_id() { return mesh_id_counter_++; }

  static std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
  }

  void dump(std::ostream& os) const;
  static std::shared_ptr<RefinementForest> load(std::istream& is);

 private:
  int midpoint_vertex(int a, int b);

  std::vector<Vec2> verts_;
  std::vector<ForestNode> nodes_;
  std::vector<bool> boundary_vertex_;
  std::unordered_set<std::uint64_t> boundary_edges_;
  std::unordered_map<std::uint64_t, int> edge_midpoint_;
  int n_macro_ = 0;
  int mesh_id_counter_ = 0;
};

/// Immutable conforming triangulation: a cut of the refinement forest with
/// derived incidence and geometry tables.
class MeshLevel {
 public:
  MeshLevel(std::shared_ptr<RefinementForest> forest, std::vector<int> cut);

  const std::shared_ptr<RefinementForest>& forest_ptr() const {
    return forest_;
  }
  const RefinementForest& forest() const { return *forest_; }
  int id() const { return id_; }

  int n_elems() const { return static_cast<int>(cut_.size()); }
  int node_of(int k) const { return cut_[k]; }
  const std::vector<int>& cut() const { return cut_; }
  const std::array<int, 3>& elem_vertices(int k) const {
    return forest_->nodes()[cut_[k]].v;
  }
  Vec2 vertex(int v) const { return forest_->vertices()[v]; }

  double area(int k) const { return area_[k]; }
  double diameter(int k) const { return diam_[k]; }
  /// Gradients of the three barycentric coordinates of element k.
  const std::array<Vec2, 3>& grad_lambda(int k) const { return grad_l_[k]; }
  /// Barycentric coordinates of x with respect to element k.
  std::array<double, 3> barycentric(int k, Vec2 x) const;
  Vec2 point(int k, double l0, double l1, double l2) const {
    const auto& vv = elem_vertices(k);
    return l0 * vertex(vv[0]) + l1 * vertex(vv[1]) + l2 * vertex(vv[2]);
  }

  // Edge tables. Local edge i of an element joins local vertices i,(i+1)%3.
  int n_edges() const { return static_cast<int>(edge_v_.size()); }
  std::pair<int, int> edge_vertices(int e) const { return edge_v_[e]; }
  const std::array<int, 3>& elem_edges(int k) const { return elem_edge_[k]; }
  const std::array<int, 2>& edge_elems(int e) const { return edge_elem_[e]; }
  bool edge_on_boundary(int e) const { return edge_boundary_[e]; }
  double edge_length(int e) const {
    return norm(vertex(edge_v_[e].second) - vertex(edge_v_[e].first));
  }

  // Vertex tables (forest-global ids; local contiguous numbering per mesh).
  int n_vertices() const { return static_cast<int>(vert_ids_.size()); }
  const std::vector<int>& vertex_ids() const { return vert_ids_; }
  int vertex_local(int global) const {
    return global < int(vert_local_.size()) ? vert_local_[global] : -1;
  }
  bool vertex_on_boundary(int v) const {
    return forest_->vertex_on_boundary(v);
  }
  const std::vector<int>& elems_at_vertex(int global) const;

  /// Worst circumradius/inradius ratio over the mesh.
  double shape_regularity() const { return shape_reg_; }

  /// Elementwise containment: for each element of this mesh, the index of the
  /// element of `coarse` containing it. Throws if some element has no
  /// ancestor-or-self in `coarse`.
  std::vector<int> ancestor_map(const MeshLevel& coarse) const;

  void audit_conformity() const;

  void dump(std::ostream& os) const;  // forest + cut
  static MeshLevel load(std::istream& is);
  static MeshLevel load(std::istream& is,
                        std::shared_ptr<RefinementForest> forest);
  void write_vtk(std::ostream& os) const;

 private:
  static MeshLevel load_cut_tail(std::istream& is,
                                 std::shared_ptr<RefinementForest> forest);

  std::shared_ptr<RefinementForest> forest_;
  std::vector<int> cut_;
  int id_;

  std::vector<double> area_, diam_;
  std::vector<std::array<Vec2, 3>> grad_l_;
  std::vector<std::pair<int, int>> edge_v_;
  std::vector<std::array<int, 3>> elem_edge_;
  std::vector<std::array<int, 2>> edge_elem_;
  std::vector<bool> edge_boundary_;
  std::vector<int> vert_ids_;
  std::vector<int> vert_local_;
  std::vector<std::vector<int>> vertex_elems_;  // by local vertex index
  double shape_reg_ = 0.0;
};

MeshLevel build_uniform_mesh(int n);

/// Newest-vertex bisection of the marked elements plus conforming closure.
MeshLevel refine(const MeshLevel& mesh, const std::vector<int>& marked);
MeshLevel refine_all(const MeshLevel& mesh);

/// Collapses sibling pairs (one bisection level) where all marked elements
/// around a removable midpoint vertex agree; always returns a conforming cut.
MeshLevel coarsen(const MeshLevel& mesh, const std::vector<int>& marked);
MeshLevel coarsen_all(const MeshLevel& mesh);

struct CommonRefinement {
  MeshLevel mesh;              // the union cut (pointwise deeper of the two)
  std::vector<int> to_prev;    // element of mesh -> containing element of prev
  std::vector<int> to_next;
};
CommonRefinement common_refinement(const MeshLevel& prev,
                                   const MeshLevel& next);

/// Vertex patch of the coarse mesh T^n, carved out of the fine mesh (the
/// common refinement) that resolves it.
struct Patch {
  int vertex = -1;   // forest-global vertex id
  bool boundary = false;
  int degree = 1;    // p_a
  std::vector<int> coarse_elems;             // indices into the coarse mesh
  std::vector<int> fine_elems;               // indices into the fine mesh
  std::vector<int> coarse_parent;            // per fine element
  std::vector<int> hat_index;                // local index of `vertex` in parent
  /// Per fine element and local edge: true when the edge lies on the part of
  /// the patch boundary where the flux space has zero normal trace.
  std::vector<std::array<bool, 3>> zero_trace;
  /// Per fine element and local edge: true when the edge is interior to the
  /// patch (shared with another fine element of the patch).
  std::vector<std::array<bool, 3>> interior_edge;
};

/// One patch per vertex of `coarse`; `fine` must refine `coarse` and
/// `fine_degree` holds the polynomial degrees on `fine`, from which the patch
/// degree p_a = max(p + 1) is taken.
std::vector<Patch> vertex_patches(const MeshLevel& coarse,
                                  const MeshLevel& fine,
                                  const std::vector<int>& fine_degree);

/// Hat function of `patch.vertex` (and its gradient) on fine element
/// `patch.fine_elems[i]`, evaluated at physical point x.
double patch_hat_value(const MeshLevel& coarse, const Patch& patch, int i,
                       Vec2 x);
Vec2 patch_hat_gradient(const MeshLevel& coarse, const Patch& patch, int i);

}  // namespace parest
