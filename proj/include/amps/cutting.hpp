#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amps/amps.hpp"
#include "amps/baselines.hpp"
#include "amps/fem.hpp"

namespace amps {

/// 5 x 5 x h grid of unit spacing along z, 6 tets per cell, the z = 0 face
/// fixed.
Mesh generate_beam(index_t h, const Material& material = {});

/// 1 x 1 x 2 block with 4(level+1) x 4(level+1) x 8(level+1) cells, the
/// z = 0 face fixed.
Mesh generate_brick(index_t level, const Material& material = {});
index_t brick_vertex_count(index_t level);

/// Structured grid of nx x ny x nz cells with the given spacing, each cell
/// split into six positively oriented tetrahedra around its main diagonal.
Mesh generate_grid(index_t nx, index_t ny, index_t nz, const Point& spacing,
                   const Material& material = {});

/// Parses "beam:H" or "brick:L".
Mesh generate_from_spec(const std::string& spec, const Material& material = {});

struct CutPlane {
  Point normal{1.0, 0.0, 0.0};
  double offset = 0.0;  // plane is normal . x = offset
  double distance(const Point& x) const { return normal.dot(x) - offset; }
};

/// Vertices lying on the plane in cut order: farthest from the Dirichlet
/// support first (projected on the axis from the support centroid to the
/// mesh centroid), ties by vertex id.
std::vector<index_t> cut_path(const Mesh& mesh, const CutPlane& plane,
                              index_t vertex_limit = -1);

struct CutEvent {
  index_t step = 0;
  index_t duplicated_vertex = -1;
  index_t new_vertex = -1;  // -1 when the step changed nothing
  std::vector<index_t> affected_elements;
  std::vector<index_t> new_replaced_dofs;  // filled by the driver
  index_t new_dof_count = 0;
  bool skipped_fixed = false;
};

struct CutResult {
  Mesh mesh;
  CutEvent event;
};

/// Duplicates `vertex` and moves the incident elements on the positive side
/// of the plane onto the copy. Steps on constrained vertices, or on vertices
/// without elements on both sides, are no-ops.
CutResult advance_cut(const Mesh& mesh, const CutPlane& plane, index_t vertex,
                      index_t step = 0);

/// Connected components of the element graph over vertices that are used by
/// some element and not fully constrained.
index_t connected_components(const Mesh& mesh);

// --- scripted experiments -----------------------------------------------

struct ScriptAction {
  enum class Kind { cut, constrain, force };
  Kind kind = Kind::cut;
  CutPlane plane;
  index_t steps = 0;
  index_t vertex = -1;
  Point value = Point::Zero();
};

struct ExperimentScript {
  std::vector<ScriptAction> actions;
};

// Line-oriented: "cut plane nx ny nz d steps S", "constrain v ux uy uz",
// "force v fx fy fz". Blank lines and '#' comments are ignored.
ExperimentScript parse_script(std::istream& in);
ExperimentScript read_script(const std::string& path);
void write_script(std::ostream& out, const ExperimentScript& script);

/// Progressively constrains `count` nodes to a prescribed displacement,
/// starting with the free nodes farthest from the support.
ExperimentScript deformation_script(const Mesh& mesh, index_t count,
                                    const Point& displacement = {0.0, -0.01, 0.0});
/// A planar cut through the mid-plane x = const of the mesh bounding box.
/// steps < 0 means every node on the plane.
ExperimentScript cutting_script(const Mesh& mesh, index_t steps = -1);

enum class SolverKind { amps, amps_alt, cg, oracle };
SolverKind parse_solver_kind(const std::string& name);
std::string to_string(SolverKind kind);

struct RunOptions {
  SolverKind solver = SolverKind::amps;
  int threads = 1;
  double cg_abs_tol = 1e-8;
  Preconditioner cg_precond = Preconditioner::jacobi;
  index_t cg_max_iterations = -1;  // 10 n
  Point gravity{0.0, -1.0, 0.0};
  /// Force pulling each duplicated node off the plane (along +normal).
  double pull_force = 1.0;
  /// Also push the original copy along -normal. This changes the load on
  /// existing DOFs, so AMPS takes its general right-hand-side path.
  bool pull_both_copies = false;
  bool compare_oracle = false;
  /// Refactorize only on steps that are multiples of this stride.
  index_t oracle_stride = 1;
  /// Precomputed factorization of the unmodified stiffness matrix.
  std::shared_ptr<const Factors> factors;
  bool cross_check_alt = false;
  bool keep_solutions = false;
  /// Stop after the first CG step that fails to converge.
  bool stop_on_cg_failure = false;
  bool warn_skips = true;
};

struct StepRecord {
  index_t step = 0;
  index_t n = 0;      // order of the original system
  index_t order = 0;  // order of the solved system
  index_t m = 0;
  index_t k = 0;
  index_t new_dofs_in_h = 0;
  index_t duplicated_nodes = 0;
  StepTimings timings;
  double total_us = 0.0;
  double rel_residual = 0.0;
  double oracle_diff = -1.0;   // rel. inf-norm difference, -1 if not run
  double oracle_us = 0.0;
  double alt_diff = -1.0;
  double h_component_gap = 0.0;
  bool memo_prefix_intact = true;
  index_t cg_iterations = 0;
  bool cg_converged = true;
  Vector solution;
};

struct RunResult {
  std::vector<StepRecord> records;
  index_t n = 0;
  index_t nnz_l = 0;
  double init_us = 0.0;
  Mesh final_mesh;
};

/// Hook invoked after each solved step; the solver pointer is null for the
/// non-AMPS solvers.
using StepObserver = std::function<void(const StepRecord&, const AmpsSolver*,
                                        const SparseMatrix& k_hat)>;

RunResult run_script(const Mesh& mesh, const ExperimentScript& script,
                     const RunOptions& options = {},
                     const StepObserver& observer = {});

// Per-step CSV:
// step,n,m,k,t_memo_us,t_s2_us,t_rhs_us,t_a2_us,t_ahat_us,t_total_us,rel_residual
// plus max_inf_diff when include_diff is set.
void write_records_csv(std::ostream& out, const std::vector<StepRecord>& records,
                       bool include_diff);
/// Per-step share of the five AMPS phases.
void write_breakdown_csv(std::ostream& out, const std::vector<StepRecord>& records);

}  // namespace amps
