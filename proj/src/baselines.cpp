#include "amps/baselines.hpp"

#include <cmath>
#include <string>

#include "amps/timer.hpp"

namespace amps {

Vector refactorize_solve(const SparseMatrix& k_hat, std::span<const double> f_hat,
                         Ordering ordering) {
  const Factors f = factorize_ldlt(k_hat, ordering);
  return full_solve(f, f_hat);
}

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double norm_inf(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s = std::max(s, std::abs(v));
  return s;
}

double relative_inf_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("relative_inf_diff: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  const double s = norm_inf(b);
  return s > 0.0 ? d / s : d;
}

double relative_residual(const SparseMatrix& k_hat, std::span<const double> a,
                         std::span<const double> f) {
  if (static_cast<index_t>(f.size()) != k_hat.nrows)
    throw DimensionError("relative_residual: f length mismatch");
  const double fn = norm2(f);
  if (fn == 0.0) throw std::invalid_argument("relative_residual: f is zero");
  Vector r = spmv(k_hat, a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= f[i];
  return norm2(r) / fn;
}

CgResult cg_solve(const SparseMatrix& k_hat, std::span<const double> f_hat,
                  double abs_tol, Preconditioner precond, index_t max_iterations) {
  if (!(abs_tol > 0.0)) throw std::invalid_argument("cg_solve: abs_tol must be > 0");
  const index_t n = k_hat.ncols;
  if (static_cast<index_t>(f_hat.size()) != n)
    throw DimensionError("cg_solve: f length mismatch");
  if (max_iterations < 0) max_iterations = 10 * n;
  Stopwatch clock;

  Vector inv_diag(n, 1.0);
  if (precond == Preconditioner::jacobi)
    for (index_t j = 0; j < n; ++j) {
      const double d = k_hat.coeff(j, j);
      inv_diag[j] = d != 0.0 ? 1.0 / d : 1.0;
    }

  CgResult out;
  Vector& x = out.solution;
  x.assign(n, 0.0);
  Vector r(f_hat.begin(), f_hat.end()), z(n), p(n);
  for (index_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = 0.0;
  for (index_t i = 0; i < n; ++i) rz += r[i] * z[i];
  double rnorm = norm2(r);
  index_t it = 0;
  while (rnorm > abs_tol && it < max_iterations) {
    const Vector q = spmv(k_hat, p);
    double pq = 0.0;
    for (index_t i = 0; i < n; ++i) pq += p[i] * q[i];
    if (!(pq > 0.0)) break;  // loss of positive curvature: stagnated
    const double alpha = rz / pq;
    for (index_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    ++it;
    rnorm = norm2(r);
    if (rnorm <= abs_tol) {
      // The recursive residual drifts; confirm with the true one.
      Vector tr = spmv(k_hat, x);
      for (index_t i = 0; i < n; ++i) tr[i] = f_hat[i] - tr[i];
      const double true_norm = norm2(tr);
      if (true_norm <= abs_tol) {
        rnorm = true_norm;
        break;
      }
      r = std::move(tr);
      rnorm = true_norm;
    }
    double rz_new = 0.0;
    for (index_t i = 0; i < n; ++i) {
      z[i] = inv_diag[i] * r[i];
      rz_new += r[i] * z[i];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (index_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  Vector tr = spmv(k_hat, x);
  for (index_t i = 0; i < n; ++i) tr[i] -= f_hat[i];
  out.report.iterations = it;
  out.report.residual_norm = norm2(tr);
  const double fn = norm2(f_hat);
  out.report.relative_residual = fn > 0.0 ? out.report.residual_norm / fn : 0.0;
  out.report.converged = out.report.residual_norm <= abs_tol;
  out.report.wall_us = clock.elapsed_us();
  return out;
}

}  // namespace amps
