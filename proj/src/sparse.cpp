#include "amps/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace amps {

SparseMatrix::SparseMatrix(index_t rows, index_t cols)
    : nrows(rows), ncols(cols), col_ptr(static_cast<std::size_t>(cols) + 1, 0) {}

double SparseMatrix::coeff(index_t row, index_t col) const {
  auto rows = rows_of(col);
  auto it = std::lower_bound(rows.begin(), rows.end(), row);
  if (it == rows.end() || *it != row) return 0.0;
  return values[col_ptr[col] + (it - rows.begin())];
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

void SparseMatrix::validate() const {
  if (nrows < 0 || ncols < 0)
    throw std::invalid_argument("negative matrix dimension");
  if (static_cast<index_t>(col_ptr.size()) != ncols + 1)
    throw std::invalid_argument("col_ptr must have ncols+1 entries");
  if (col_ptr.front() != 0 || col_ptr.back() != nnz())
    throw std::invalid_argument("col_ptr endpoints inconsistent with nnz");
  if (values.size() != row_idx.size())
    throw std::invalid_argument("values and row_idx lengths differ");
  for (index_t j = 0; j < ncols; ++j) {
    if (col_ptr[j + 1] < col_ptr[j])
      throw std::invalid_argument("col_ptr is decreasing at column " +
                                  std::to_string(j));
    index_t prev = -1;
    for (index_t i : rows_of(j)) {
      if (i <= prev || i >= nrows)
        throw std::invalid_argument("row indices not strictly increasing "
                                    "or out of range in column " +
                                    std::to_string(j));
      prev = i;
    }
  }
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(nrows, ncols);
  for (index_t j = 0; j < ncols; ++j)
    for (index_t p = col_ptr[j]; p < col_ptr[j + 1]; ++p)
      d(row_idx[p], j) = values[p];
  return d;
}

SparseMatrix SparseMatrix::identity(index_t n) {
  SparseMatrix a(n, n);
  a.row_idx.resize(n);
  a.values.assign(n, 1.0);
  for (index_t j = 0; j < n; ++j) {
    a.col_ptr[j + 1] = j + 1;
    a.row_idx[j] = j;
  }
  return a;
}

SparseMatrix SparseMatrix::from_triplets(
    index_t rows, index_t cols,
    std::span<const std::tuple<index_t, index_t, double>> triplets) {
  SparseMatrix a(rows, cols);
  std::vector<index_t> count(cols + 1, 0);
  for (const auto& [i, j, v] : triplets) {
    if (i < 0 || i >= rows || j < 0 || j >= cols)
      throw DimensionError("triplet index out of range");
    ++count[j + 1];
  }
  for (index_t j = 0; j < cols; ++j) count[j + 1] += count[j];
  std::vector<index_t> tmp_rows(triplets.size());
  std::vector<double> tmp_vals(triplets.size());
  std::vector<index_t> next(count.begin(), count.end() - 1);
  for (const auto& [i, j, v] : triplets) {
    tmp_rows[next[j]] = i;
    tmp_vals[next[j]] = v;
    ++next[j];
  }
  // Sort each column and merge duplicates.
  std::vector<std::pair<index_t, double>> col;
  a.row_idx.reserve(triplets.size());
  a.values.reserve(triplets.size());
  for (index_t j = 0; j < cols; ++j) {
    col.clear();
    for (index_t p = count[j]; p < count[j + 1]; ++p)
      col.emplace_back(tmp_rows[p], tmp_vals[p]);
    std::sort(col.begin(), col.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t q = 0; q < col.size(); ++q) {
      if (!a.row_idx.empty() &&
          static_cast<index_t>(a.row_idx.size()) > a.col_ptr[j] &&
          a.row_idx.back() == col[q].first) {
        a.values.back() += col[q].second;
      } else {
        a.row_idx.push_back(col[q].first);
        a.values.push_back(col[q].second);
      }
    }
    a.col_ptr[j + 1] = a.nnz();
  }
  return a;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense,
                                      double drop_tol) {
  SparseMatrix a(dense.rows(), dense.cols());
  for (index_t j = 0; j < a.ncols; ++j) {
    for (index_t i = 0; i < a.nrows; ++i) {
      if (std::abs(dense(i, j)) > drop_tol) {
        a.row_idx.push_back(i);
        a.values.push_back(dense(i, j));
      }
    }
    a.col_ptr[j + 1] = a.nnz();
  }
  return a;
}

Vector spmv(const SparseMatrix& a, std::span<const double> x) {
  if (static_cast<index_t>(x.size()) != a.ncols)
    throw DimensionError("spmv: x has length " + std::to_string(x.size()) +
                         ", matrix has " + std::to_string(a.ncols) +
                         " columns");
  Vector y(a.nrows, 0.0);
  for (index_t j = 0; j < a.ncols; ++j) {
    const double xj = x[j];
    for (index_t p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p)
      y[a.row_idx[p]] += a.values[p] * xj;
  }
  return y;
}

// --- IndexSet -------------------------------------------------------------

IndexSet::IndexSet(std::initializer_list<index_t> init) {
  for (index_t i : init)
    if (!insert(i)) throw std::invalid_argument("duplicate index in IndexSet");
}

IndexSet::IndexSet(std::span<const index_t> init) {
  for (index_t i : init)
    if (!insert(i)) throw std::invalid_argument("duplicate index in IndexSet");
}

bool IndexSet::insert(index_t idx) {
  if (idx < 0) throw std::invalid_argument("negative index in IndexSet");
  if (static_cast<std::size_t>(idx) >= position_.size())
    position_.resize(std::max<std::size_t>(idx + 1, 2 * position_.size()), -1);
  if (position_[idx] >= 0) return false;
  position_[idx] = static_cast<index_t>(order_.size());
  order_.push_back(idx);
  return true;
}

bool IndexSet::contains(index_t idx) const { return position(idx) >= 0; }

index_t IndexSet::position(index_t idx) const {
  if (idx < 0 || static_cast<std::size_t>(idx) >= position_.size()) return -1;
  return position_[idx];
}

// --- closure --------------------------------------------------------------

void ClosureWorkspace::resize(index_t n) {
  mark_.assign(n, 0);
  generation_ = 0;
  stack_.reserve(n);
  child_pos_.assign(n, 0);
  output_.assign(n, 0);
}

std::span<const index_t> ClosureWorkspace::reach(
    const SparseMatrix& l, std::span<const index_t> seeds) {
  const index_t n = l.ncols;
  if (size() != n) resize(n);
  if (++generation_ == 0) {
    std::fill(mark_.begin(), mark_.end(), 0);
    generation_ = 1;
  }
  top_ = n;
  for (index_t seed : seeds) {
    if (seed < 0 || seed >= n)
      throw std::out_of_range("closure seed " + std::to_string(seed) +
                              " out of range");
    if (mark_[seed] == generation_) continue;
    // Iterative DFS; a node is emitted once all its children are finished,
    // so the output (read front to back) is a topological order.
    stack_.clear();
    stack_.push_back(seed);
    mark_[seed] = generation_;
    child_pos_[seed] = l.col_ptr[seed];
    while (!stack_.empty()) {
      const index_t j = stack_.back();
      bool descended = false;
      for (index_t p = child_pos_[j]; p < l.col_ptr[j + 1]; ++p) {
        const index_t i = l.row_idx[p];
        if (i <= j || mark_[i] == generation_) continue;
        child_pos_[j] = p + 1;
        mark_[i] = generation_;
        child_pos_[i] = l.col_ptr[i];
        stack_.push_back(i);
        descended = true;
        break;
      }
      if (!descended) {
        stack_.pop_back();
        output_[--top_] = j;
      }
    }
  }
  return {output_.data() + top_, static_cast<std::size_t>(n - top_)};
}

std::vector<index_t> reach_closure(const SparseMatrix& l,
                                   std::span<const index_t> seeds,
                                   ClosureWorkspace& ws) {
  auto r = ws.reach(l, seeds);
  std::vector<index_t> out(r.begin(), r.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<index_t> reach_closure(const SparseMatrix& l,
                                   std::span<const index_t> seeds) {
  ClosureWorkspace ws(l.ncols);
  return reach_closure(l, seeds, ws);
}

}  // namespace amps
