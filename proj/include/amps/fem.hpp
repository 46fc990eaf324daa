#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amps/sparse.hpp"

namespace amps {

using Point = Eigen::Vector3d;
using Tet = std::array<index_t, 4>;
using ElementMatrix = Eigen::Matrix<double, 12, 12>;

struct Material {
  double young_modulus = 1e5;
  double poisson_ratio = 0.3;
};

/// Linear tetrahedral mesh. `dirichlet` holds constrained DOF ids
/// (3 * vertex + axis), sorted and unique; those DOFs are held at zero and
/// eliminated from the assembled system.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<Tet> tets;
  Material material;
  std::vector<index_t> dirichlet;

  index_t num_vertices() const { return static_cast<index_t>(vertices.size()); }
  index_t num_tets() const { return static_cast<index_t>(tets.size()); }

  /// Fixes all three DOFs of every listed vertex.
  void fix_vertices(std::span<const index_t> vertex_ids);
  bool is_vertex_fixed(index_t v) const;
  double signed_volume(index_t tet) const;
  /// Throws std::invalid_argument on bad ids, duplicates or non-positive
  /// volumes.
  void validate() const;
};

bool operator==(const Mesh& a, const Mesh& b);

class DegenerateElementError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Free DOF numbering: vertex-major, axis-minor, Dirichlet DOFs skipped.
/// Vertices appended to a mesh get their DOFs appended to the numbering.
class DofMap {
 public:
  DofMap() = default;
  explicit DofMap(const Mesh& mesh);

  index_t num_free() const { return static_cast<index_t>(free_to_global_.size()); }
  /// Free id of (vertex, axis), or -1 when constrained.
  index_t free_dof(index_t vertex, int axis) const {
    return global_to_free_[3 * vertex + axis];
  }
  index_t free_dof(index_t global_dof) const { return global_to_free_[global_dof]; }
  /// Global DOF id (3 * vertex + axis) of a free id.
  index_t global_dof(index_t free) const { return free_to_global_[free]; }
  std::array<index_t, 12> element_dofs(const Tet& tet) const;

 private:
  std::vector<index_t> global_to_free_;
  std::vector<index_t> free_to_global_;
};

/// Constant-strain tetrahedron, Ke = vol * B^T C B with isotropic C(E, nu).
/// DOF order is (vertex 0: x y z, vertex 1: x y z, ...).
ElementMatrix element_stiffness(const std::array<Point, 4>& x,
                                const Material& material);
ElementMatrix element_stiffness(const Mesh& mesh, index_t tet);

struct AssembledSystem {
  SparseMatrix k;
  DofMap dofs;
};

/// Reduced stiffness matrix over the free DOFs. Rows and columns of
/// Dirichlet DOFs are eliminated, not penalized.
AssembledSystem assemble_stiffness(const Mesh& mesh);
/// Same as assemble_stiffness restricted to the listed elements, on the
/// numbering of the full mesh.
SparseMatrix assemble_elements(const Mesh& mesh, const DofMap& dofs,
                               std::span<const index_t> elements);

/// Lumped body force: each tet adds vol * density * g / 4 to its vertices.
Vector body_force(const Mesh& mesh, const DofMap& dofs, const Point& g);

/// Stiffness change caused by reconnecting `affected` elements.
/// Over the extended DOF list `dofs`, `e` holds K_before - K_after (new DOFs
/// contribute zero on the "before" side), which is exactly the increment of
/// the cumulative update E. DOFs whose rows do not change are dropped.
struct StiffnessDelta {
  std::vector<index_t> existing_dofs;  // changed DOFs present before
  index_t new_dof_count = 0;
  std::vector<index_t> dofs;  // existing_dofs then changed new DOFs
  DenseMatrix e;
};

StiffnessDelta local_stiffness_diff(const Mesh& before, const Mesh& after,
                                    std::span<const index_t> affected);

// Mesh text format: "vertices N tets M dirichlet D", then N lines "x y z",
// M lines "v0 v1 v2 v3", D lines "dof_id". Whitespace separated, 0-based.
void write_mesh(std::ostream& out, const Mesh& mesh);
void write_mesh(const std::string& path, const Mesh& mesh);
Mesh read_mesh(std::istream& in, const Material& material = {});
Mesh read_mesh(const std::string& path, const Material& material = {});

}  // namespace amps
