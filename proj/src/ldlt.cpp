#include "amps/ldlt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

namespace amps {

bool Factors::is_positive_definite() const {
  return std::all_of(d.begin(), d.end(), [](double x) { return x > 0.0; });
}

std::vector<index_t> fill_reducing_ordering(const SparseMatrix& k) {
  using EigenSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
  EigenSparse a(static_cast<int>(k.nrows), static_cast<int>(k.ncols));
  std::vector<Eigen::Triplet<double, int>> trip;
  trip.reserve(k.nnz());
  for (index_t j = 0; j < k.ncols; ++j)
    for (index_t p = k.col_ptr[j]; p < k.col_ptr[j + 1]; ++p)
      trip.emplace_back(static_cast<int>(k.row_idx[p]), static_cast<int>(j),
                        k.values[p]);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
  Eigen::AMDOrdering<int> amd;
  amd(a, p);
  std::vector<index_t> perm(k.ncols);
  for (index_t i = 0; i < k.ncols; ++i) perm[i] = p.indices()[i];
  return perm;
}

SparseMatrix symmetric_permute(const SparseMatrix& k,
                               std::span<const index_t> perm) {
  const index_t n = k.ncols;
  std::vector<index_t> pinv(n);
  for (index_t i = 0; i < n; ++i) pinv[perm[i]] = i;
  SparseMatrix c(n, n);
  c.row_idx.reserve(k.nnz());
  c.values.reserve(k.nnz());
  std::vector<std::pair<index_t, double>> col;
  for (index_t j = 0; j < n; ++j) {
    const index_t src = perm[j];
    col.clear();
    for (index_t p = k.col_ptr[src]; p < k.col_ptr[src + 1]; ++p)
      col.emplace_back(pinv[k.row_idx[p]], k.values[p]);
    std::sort(col.begin(), col.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [i, v] : col) {
      c.row_idx.push_back(i);
      c.values.push_back(v);
    }
    c.col_ptr[j + 1] = c.nnz();
  }
  return c;
}

Factors factorize_ldlt(const SparseMatrix& k, Ordering ordering) {
  LdltOptions opts;
  opts.ordering = ordering;
  return factorize_ldlt(k, opts);
}

Factors factorize_ldlt(const SparseMatrix& k, const LdltOptions& options) {
  if (k.nrows != k.ncols)
    throw DimensionError("factorize_ldlt: matrix is not square");
  const index_t n = k.ncols;
  Factors f;
  f.n = n;
  if (options.ordering == Ordering::fill_reducing && n > 0) {
    f.perm = fill_reducing_ordering(k);
  } else {
    f.perm.resize(n);
    std::iota(f.perm.begin(), f.perm.end(), index_t{0});
  }
  f.pinv.resize(n);
  for (index_t i = 0; i < n; ++i) f.pinv[f.perm[i]] = i;

  const SparseMatrix c = symmetric_permute(k, f.perm);
  const double threshold = options.pivot_tol * k.max_abs();

  // Symbolic: elimination tree and column counts of L, using the upper
  // triangle of C (entries i < j of column j).
  std::vector<index_t> parent(n, -1), flag(n, -1), lnz(n, 0);
  for (index_t j = 0; j < n; ++j) {
    flag[j] = j;
    for (index_t i : c.rows_of(j)) {
      if (i >= j) break;
      for (; flag[i] != j; i = parent[i]) {
        if (parent[i] == -1) parent[i] = j;
        ++lnz[i];
        flag[i] = j;
      }
    }
  }
  f.l = SparseMatrix(n, n);
  for (index_t j = 0; j < n; ++j) f.l.col_ptr[j + 1] = f.l.col_ptr[j] + lnz[j];
  f.l.row_idx.resize(f.l.col_ptr[n]);
  f.l.values.resize(f.l.col_ptr[n]);
  f.d.assign(n, 0.0);

  // Numeric: row k of L is a sparse triangular solve whose pattern is the
  // etree reach of the upper part of column k of C.
  Vector y(n, 0.0);
  std::vector<index_t> pattern(n);
  std::fill(lnz.begin(), lnz.end(), 0);
  auto& lp = f.l.col_ptr;
  auto& li = f.l.row_idx;
  auto& lx = f.l.values;
  for (index_t row = 0; row < n; ++row) {
    index_t top = n;
    flag[row] = row;
    y[row] = 0.0;
    for (index_t p = c.col_ptr[row]; p < c.col_ptr[row + 1]; ++p) {
      index_t i = c.row_idx[p];
      if (i > row) break;
      y[i] += c.values[p];
      index_t len = 0;
      for (; flag[i] != row; i = parent[i]) {
        pattern[len++] = i;
        flag[i] = row;
      }
      while (len > 0) pattern[--top] = pattern[--len];
    }
    double d = y[row];
    y[row] = 0.0;
    for (; top < n; ++top) {
      const index_t i = pattern[top];
      const double yi = y[i];
      y[i] = 0.0;
      const index_t end = lp[i] + lnz[i];
      for (index_t p = lp[i]; p < end; ++p) y[li[p]] -= lx[p] * yi;
      const double l_ki = yi / f.d[i];
      d -= l_ki * yi;
      li[end] = row;
      lx[end] = l_ki;
      ++lnz[i];
    }
    if (!(std::abs(d) >= threshold) || d == 0.0) {
      throw SingularMatrixError(
          "factorize_ldlt: pivot " + std::to_string(d) + " at original index " +
              std::to_string(f.perm[row]) + " is below tolerance",
          f.perm[row]);
    }
    f.d[row] = d;
  }
  return f;
}

SparseColumn forward_solve_sparse(const Factors& f, index_t h,
                                  TriangularWorkspace& ws) {
  if (h < 0 || h >= f.n)
    throw std::out_of_range("forward_solve_sparse: index " +
                            std::to_string(h) + " out of range");
  if (static_cast<index_t>(ws.x_.size()) != f.n) ws.x_.assign(f.n, 0.0);
  const index_t seed = f.pinv[h];
  auto topo = ws.closure_.reach(f.l, std::span<const index_t>(&seed, 1));
  auto& x = ws.x_;
  x[seed] = 1.0;
  const auto& l = f.l;
  for (index_t j : topo) {
    const double xj = x[j];
    if (xj == 0.0) continue;
    for (index_t p = l.col_ptr[j]; p < l.col_ptr[j + 1]; ++p)
      x[l.row_idx[p]] -= l.values[p] * xj;
  }
  SparseColumn col;
  col.rows.assign(topo.begin(), topo.end());
  std::sort(col.rows.begin(), col.rows.end());
  col.values.resize(col.rows.size());
  for (std::size_t q = 0; q < col.rows.size(); ++q) {
    col.values[q] = x[col.rows[q]];
    x[col.rows[q]] = 0.0;
  }
  return col;
}

SparseColumn forward_solve_sparse(const Factors& f, index_t h) {
  TriangularWorkspace ws(f.n);
  return forward_solve_sparse(f, h, ws);
}

void forward_solve_inplace(const Factors& f, std::span<double> y) {
  if (static_cast<index_t>(y.size()) != f.n)
    throw DimensionError("forward_solve: length mismatch");
  const auto& l = f.l;
  for (index_t j = 0; j < f.n; ++j) {
    const double yj = y[j];
    if (yj == 0.0) continue;
    for (index_t p = l.col_ptr[j]; p < l.col_ptr[j + 1]; ++p)
      y[l.row_idx[p]] -= l.values[p] * yj;
  }
}

void backward_solve_inplace(const Factors& f, std::span<double> y) {
  if (static_cast<index_t>(y.size()) != f.n)
    throw DimensionError("backward_solve: length mismatch");
  const auto& l = f.l;
  for (index_t j = f.n - 1; j >= 0; --j) {
    double acc = y[j];
    for (index_t p = l.col_ptr[j]; p < l.col_ptr[j + 1]; ++p)
      acc -= l.values[p] * y[l.row_idx[p]];
    y[j] = acc;
  }
}

Vector backward_solve(const Factors& f, std::span<const double> y) {
  Vector out(y.begin(), y.end());
  backward_solve_inplace(f, out);
  return out;
}

Vector to_permuted(const Factors& f, std::span<const double> x) {
  if (static_cast<index_t>(x.size()) != f.n)
    throw DimensionError("to_permuted: length mismatch");
  Vector out(f.n);
  for (index_t k = 0; k < f.n; ++k) out[k] = x[f.perm[k]];
  return out;
}

Vector from_permuted(const Factors& f, std::span<const double> x) {
  if (static_cast<index_t>(x.size()) != f.n)
    throw DimensionError("from_permuted: length mismatch");
  Vector out(f.n);
  for (index_t k = 0; k < f.n; ++k) out[f.perm[k]] = x[k];
  return out;
}

Vector full_solve(const Factors& f, std::span<const double> rhs) {
  if (static_cast<index_t>(rhs.size()) != f.n)
    throw DimensionError("full_solve: rhs has length " +
                         std::to_string(rhs.size()) + ", expected " +
                         std::to_string(f.n));
  Vector y = to_permuted(f, rhs);
  forward_solve_inplace(f, y);
  for (index_t k = 0; k < f.n; ++k) y[k] /= f.d[k];
  backward_solve_inplace(f, y);
  return from_permuted(f, y);
}

}  // namespace amps
