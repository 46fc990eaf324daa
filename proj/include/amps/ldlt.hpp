#pragma once

#include <span>
#include <vector>

#include "amps/sparse.hpp"

namespace amps {

enum class Ordering { natural, fill_reducing };

/// P K P^T = L diag(D) L^T. L is unit lower triangular with the unit
/// diagonal implicit (only strictly-lower entries are stored); perm[k] is
/// the original index of the k-th pivot and pinv is its inverse.
struct Factors {
  index_t n = 0;
  SparseMatrix l;
  Vector d;
  std::vector<index_t> perm;
  std::vector<index_t> pinv;

  index_t nnz_l() const { return l.nnz(); }
  bool is_positive_definite() const;
};

struct LdltOptions {
  Ordering ordering = Ordering::fill_reducing;
  /// Pivots with |d| < pivot_tol * max|K| are rejected.
  double pivot_tol = 1e-12;
};

/// Up-looking sparse LDL^T without numerical pivoting. Only the symmetric
/// permutation is applied; indefinite nonsingular matrices factor as long as
/// no pivot collapses, SPD matrices always do.
Factors factorize_ldlt(const SparseMatrix& k, const LdltOptions& options = {});
Factors factorize_ldlt(const SparseMatrix& k, Ordering ordering);

/// Approximate minimum degree ordering of the graph of K (new -> old).
std::vector<index_t> fill_reducing_ordering(const SparseMatrix& k);

/// C = P K P^T for the symmetric permutation perm (new -> old).
SparseMatrix symmetric_permute(const SparseMatrix& k,
                               std::span<const index_t> perm);

/// A sparse vector in permuted coordinates with ascending row indices.
struct SparseColumn {
  std::vector<index_t> rows;
  std::vector<double> values;
};

/// Reusable scratch for sparse-RHS triangular solves. One per thread.
class TriangularWorkspace {
 public:
  explicit TriangularWorkspace(index_t n = 0) : closure_(n), x_(n, 0.0) {}

 private:
  friend SparseColumn forward_solve_sparse(const Factors&, index_t,
                                           TriangularWorkspace&);
  ClosureWorkspace closure_;
  Vector x_;
};

/// v = L^{-1} e_{pinv[h]} for an original DOF index h. Work is proportional
/// to the nonzeros of L touched by the closure of pinv[h].
SparseColumn forward_solve_sparse(const Factors& f, index_t h,
                                  TriangularWorkspace& ws);
SparseColumn forward_solve_sparse(const Factors& f, index_t h);

/// a = K^{-1} rhs in original numbering.
Vector full_solve(const Factors& f, std::span<const double> rhs);

// Permuted-coordinate kernels. Callers own the permutation.
void forward_solve_inplace(const Factors& f, std::span<double> y);
void backward_solve_inplace(const Factors& f, std::span<double> y);
/// L^{-T} y.
Vector backward_solve(const Factors& f, std::span<const double> y);

Vector to_permuted(const Factors& f, std::span<const double> x);
Vector from_permuted(const Factors& f, std::span<const double> x);

}  // namespace amps
