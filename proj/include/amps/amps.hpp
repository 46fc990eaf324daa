#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "amps/ldlt.hpp"
#include "amps/sparse.hpp"

namespace amps {

/// S2 (or H^T K^{-1} H for the shrinking path) could not be factored.
class SingularUpdateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AmpsOptions {
  LdltOptions ldlt;
  /// Worker threads for the memo extension and dense kernels; 0 picks the
  /// available parallelism.
  int threads = 1;
  /// S2 pivots below s2_pivot_tol * max|S2| are treated as singular.
  double s2_pivot_tol = 1e-12;
  /// Iterative refinement sweeps on the dense update solve, reusing its LU.
  int refinement_steps = 1;
  /// Residual correction sweeps after solve_updated: while
  /// ||f_hat - K_hat a_hat|| > correction_tol ||f_hat||, the residual is
  /// solved for on the same factorizations and added to a_hat.
  int max_correction_sweeps = 2;
  double correction_tol = 1e-12;
};

/// Wall time of the five phases of one update solve, in microseconds.
struct StepTimings {
  double memo_us = 0.0;  // V columns and the tril(H^T K^-1 H) trapezoid
  double s2_us = 0.0;    // form S2 (or the reduced matrix)
  double rhs_us = 0.0;   // right-hand side
  double a2_us = 0.0;    // dense solve for the H-components
  double ahat_us = 0.0;  // back substitution for the full solution
  double total_us() const { return memo_us + s2_us + rhs_us + a2_us + ahat_us; }
};

/// One step of growth: original DOFs entering H, DOFs appended to the
/// system, and the increment of the cumulative update E over extended DOF
/// ids (original ids < n, appended ids >= n).
struct UpdateRequest {
  std::vector<index_t> new_replaced_dofs;
  index_t new_dof_count = 0;
  std::vector<index_t> delta_dofs;
  DenseMatrix delta;
};

struct UpdateSolution {
  Vector a_hat;  // length n + k, extended numbering
  /// max over H of |component from the rank-update formula - a2 component|,
  /// relative to max|a2|. Small values confirm the two routes agree.
  double h_component_gap = 0.0;
  bool used_force_shortcut = false;  // f_hat = [f; f_new]: no extra solve
  double relative_residual = -1.0;   // at exit, -1 when not evaluated
  int correction_sweeps = 0;
};

struct DirichletSolution {
  Vector displacement;  // length n; equals the prescribed values on H
  Vector multipliers;   // a2 of the bordered system, ordered as H
  Vector reactions;     // K u - f on H
  double max_h_residue = 0.0;  // max |a1| over H before adding H p
};

/// Solver state for modified systems K_hat = K_bar - H_bar E_bar H_bar^T
/// built on a single LDL^T factorization of the original K.
///
/// H is insertion ordered: replaced original DOFs first (in the order they
/// were added), then appended DOFs n, n+1, ... The memo keeps V = L^{-1} H
/// and the lower triangle W of H^T K^{-1} H; both only ever grow, and rows
/// already stored are never recomputed.
class AmpsSolver {
 public:
  AmpsSolver(SparseMatrix k, std::span<const double> f,
             const AmpsOptions& options = {});
  /// Reuses a factorization of `k` computed elsewhere.
  AmpsSolver(SparseMatrix k, std::shared_ptr<const Factors> factors,
             std::span<const double> f, const AmpsOptions& options = {});

  index_t n() const { return factors_->n; }
  index_t m() const { return static_cast<index_t>(replaced_.size()); }
  index_t k() const { return new_dofs_; }
  index_t order() const { return n() + k(); }

  const Factors& factors() const { return *factors_; }
  const SparseMatrix& stiffness() const { return k_; }
  const Vector& solution() const { return a_; }
  const Vector& force() const { return f_; }
  const IndexSet& replaced() const { return replaced_; }
  /// Cumulative E, (m + k) x (m + k), rows ordered as H.
  const DenseMatrix& update() const { return e_; }
  /// Position of an extended DOF id in H, or -1.
  index_t h_position(index_t dof) const;

  double w(index_t i, index_t j) const;  // lower triangle, j <= i
  /// Symmetrized W, m x m.
  DenseMatrix w_full() const;
  std::span<const double> w_packed() const { return w_; }
  SparseColumn v_column(index_t j) const;
  /// FNV-1a over the bytes of the first `prefix` V columns and W rows.
  std::uint64_t memo_checksum(index_t prefix) const;

  void set_threads(int threads);
  int threads() const { return threads_; }

  /// Adds original DOFs to H, solving their V columns and the new W rows.
  void extend_memo(std::span<const index_t> new_dofs);
  /// Appends `count` DOFs (n + k, ...) to the system and to H.
  void add_new_dofs(index_t count);
  /// E += delta over extended DOF ids, which must already be in H.
  void accumulate_update(std::span<const index_t> dofs, const DenseMatrix& delta);
  /// Replaces the cumulative E (must be (m + k) square and symmetric).
  void set_update(const DenseMatrix& e);
  void apply(const UpdateRequest& request);

  /// Solution of K_hat a_hat = f_hat through the S2 system. f_hat has
  /// length n + k. When f_hat agrees with f on the original DOFs the
  /// right-hand side is read off the stored solution; otherwise one
  /// extra forward substitution is spent on f_hat.
  UpdateSolution solve_updated(std::span<const double> f_hat);
  /// K_hat x from K and E, without assembling K_hat.
  Vector multiply_updated(std::span<const double> x) const;

  /// Same system via the Schur complement on the other block pivot.
  /// Requires f_hat to agree with f on the original DOFs.
  Vector solve_updated_alt(std::span<const double> f_hat);

  /// Shrinking path: holds the DOFs of H at `prescribed` (ordered as H)
  /// under load `force` (length n). Only valid while no growth update has
  /// been applied.
  DirichletSolution impose_dirichlet(std::span<const double> prescribed,
                                     std::span<const double> force);

  const StepTimings& last_timings() const { return timings_; }

 private:
  DenseMatrix form_s2() const;
  /// Returns L^{-T} (seed + D^{-1} V y) in original numbering, where seed is
  /// a permuted vector (or empty for zero).
  Vector back_substitute(std::span<const double> y_orig, Vector seed) const;
  Vector h_dot(std::span<const double> g) const;  // V^T g
  /// a_hat from a2: off H, L^{-T}(seed + D^{-1} V y) (+ a); on H, a2.
  Vector assemble_solution(const Eigen::VectorXd& a2, std::span<const double> f_new,
                           Vector seed, bool add_original, double* gap_out) const;

  SparseMatrix k_;
  std::shared_ptr<const Factors> factors_;
  Vector f_;
  Vector a_;
  IndexSet replaced_;
  index_t new_dofs_ = 0;
  bool grown_ = false;
  DenseMatrix e_;
  // V in CSC form, columns appended as H grows.
  std::vector<index_t> v_ptr_{0};
  std::vector<index_t> v_rows_;
  std::vector<double> v_vals_;
  std::vector<double> w_;  // packed rows of the lower triangle
  int threads_ = 1;
  double s2_pivot_tol_ = 1e-12;
  int refinement_steps_ = 1;
  int max_correction_sweeps_ = 2;
  double correction_tol_ = 1e-12;
  StepTimings timings_;
};

/// Multi-line diagnostic dump of solver dimensions and a residual history.
std::string snapshot_report(const AmpsSolver& solver,
                            std::span<const double> residual_history);

}  // namespace amps
