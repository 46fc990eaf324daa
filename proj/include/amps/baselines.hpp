#pragma once

#include <span>

#include "amps/ldlt.hpp"
#include "amps/sparse.hpp"

namespace amps {

/// Factorizes the modified matrix from scratch and solves. Ground truth for
/// every equivalence check.
Vector refactorize_solve(const SparseMatrix& k_hat, std::span<const double> f_hat,
                         Ordering ordering = Ordering::fill_reducing);

enum class Preconditioner { none, jacobi };

struct CgReport {
  index_t iterations = 0;
  double relative_residual = 0.0;  // ||K a - f|| / ||f|| at exit
  double residual_norm = 0.0;      // ||K a - f|| at exit
  bool converged = false;
  double wall_us = 0.0;
};

struct CgResult {
  Vector solution;
  CgReport report;
};

/// Preconditioned conjugate gradients from a zero initial guess. Stops when
/// the recursively updated residual drops to abs_tol (confirmed against the
/// true residual) or after max_iterations (default 10 n).
CgResult cg_solve(const SparseMatrix& k_hat, std::span<const double> f_hat,
                  double abs_tol, Preconditioner precond = Preconditioner::jacobi,
                  index_t max_iterations = -1);

/// ||K a - f||_2 / ||f||_2. Throws std::invalid_argument for f = 0.
double relative_residual(const SparseMatrix& k_hat, std::span<const double> a,
                         std::span<const double> f);

double norm2(std::span<const double> x);
double norm_inf(std::span<const double> x);
/// ||a - b||_inf / ||b||_inf (or the absolute difference when b = 0).
double relative_inf_diff(std::span<const double> a, std::span<const double> b);

}  // namespace amps
