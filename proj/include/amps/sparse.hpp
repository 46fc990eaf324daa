#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "amps/types.hpp"

namespace amps {

/// Compressed sparse column matrix. Row indices are strictly increasing
/// within each column. Symmetric matrices keep both triangles.
struct SparseMatrix {
  index_t nrows = 0;
  index_t ncols = 0;
  std::vector<index_t> col_ptr{0};
  std::vector<index_t> row_idx;
  std::vector<double> values;

  SparseMatrix() = default;
  SparseMatrix(index_t rows, index_t cols);

  index_t nnz() const { return static_cast<index_t>(row_idx.size()); }

  std::span<const index_t> rows_of(index_t col) const {
    return {row_idx.data() + col_ptr[col],
            static_cast<std::size_t>(col_ptr[col + 1] - col_ptr[col])};
  }
  std::span<const double> values_of(index_t col) const {
    return {values.data() + col_ptr[col],
            static_cast<std::size_t>(col_ptr[col + 1] - col_ptr[col])};
  }

  /// Entry lookup by binary search; zero when not stored.
  double coeff(index_t row, index_t col) const;

  double max_abs() const;

  /// Throws std::invalid_argument when the CSC invariants are violated.
  void validate() const;

  DenseMatrix to_dense() const;

  static SparseMatrix identity(index_t n);
  /// Builds from (row, col, value) triplets, summing duplicates.
  static SparseMatrix from_triplets(
      index_t rows, index_t cols,
      std::span<const std::tuple<index_t, index_t, double>> triplets);
  /// Stores every entry of `dense` with |a_ij| > drop_tol.
  static SparseMatrix from_dense(const DenseMatrix& dense,
                                 double drop_tol = 0.0);
};

/// y = A x. Accumulation runs column by column (j ascending), adding
/// A(i,j) * x[j] into y[i] in stored row order.
Vector spmv(const SparseMatrix& a, std::span<const double> x);

/// Ordered set of distinct indices; order is insertion order.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::initializer_list<index_t> init);
  explicit IndexSet(std::span<const index_t> init);

  /// Returns false (and leaves the set unchanged) for a duplicate.
  bool insert(index_t idx);
  bool contains(index_t idx) const;
  /// Position of idx in insertion order, or -1.
  index_t position(index_t idx) const;

  std::size_t size() const { return order_.size(); }
  bool empty() const { return order_.empty(); }
  index_t operator[](std::size_t i) const { return order_[i]; }
  const std::vector<index_t>& indices() const { return order_; }
  auto begin() const { return order_.begin(); }
  auto end() const { return order_.end(); }

 private:
  std::vector<index_t> order_;
  std::vector<index_t> position_;  // dense lookup, grown on demand
};

/// Scratch state for graph traversals over a lower-triangular factor.
/// Marks are reset lazily with a generation counter so a call costs time
/// proportional to the size of its output.
class ClosureWorkspace {
 public:
  explicit ClosureWorkspace(index_t n = 0) { resize(n); }
  void resize(index_t n);
  index_t size() const { return static_cast<index_t>(mark_.size()); }

  /// Reach of `seeds` in the graph of L (edge j -> i for L(i,j) != 0,
  /// i > j) in topological order. Only strictly-lower entries are followed,
  /// so L may or may not store its unit diagonal.
  std::span<const index_t> reach(const SparseMatrix& l,
                                 std::span<const index_t> seeds);

 private:
  std::vector<std::uint32_t> mark_;
  std::uint32_t generation_ = 0;
  std::vector<index_t> stack_;
  std::vector<index_t> child_pos_;
  std::vector<index_t> output_;  // filled from the back
  index_t top_ = 0;
};

/// Transitive closure of `seeds` in the graph of L, sorted ascending.
std::vector<index_t> reach_closure(const SparseMatrix& l,
                                   std::span<const index_t> seeds);
std::vector<index_t> reach_closure(const SparseMatrix& l,
                                   std::span<const index_t> seeds,
                                   ClosureWorkspace& ws);

// Matrix Market coordinate I/O (1-based on disk, as the format requires).
// Symmetric matrices are written as their lower triangle and expanded on
// read.
void write_matrix_market(std::ostream& out, const SparseMatrix& a,
                         bool symmetric);
void write_matrix_market(const std::string& path, const SparseMatrix& a,
                         bool symmetric);
SparseMatrix read_matrix_market(std::istream& in);
SparseMatrix read_matrix_market(const std::string& path);

}  // namespace amps
