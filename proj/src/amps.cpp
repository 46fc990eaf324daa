#include "amps/amps.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include <omp.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "amps/timer.hpp"

namespace amps {

namespace {

constexpr index_t kTrapezoidChunk = 64;

std::size_t packed_row(index_t i) {
  return static_cast<std::size_t>(i) * (i + 1) / 2;
}

/// Dense LU with partial pivoting, a pivot check and iterative refinement.
class CheckedLu {
 public:
  CheckedLu(const DenseMatrix& s, double pivot_tol, int refinement_steps)
      : s_(s), lu_(s), refinement_steps_(refinement_steps) {
    const double scale = s.cwiseAbs().maxCoeff();
    const double smallest = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(smallest > pivot_tol * scale))
      throw SingularUpdateError(
          "update system is singular (smallest pivot " + std::to_string(smallest) +
          ", scale " + std::to_string(scale) + ")");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = lu_.solve(rhs);
    for (int it = 0; it < refinement_steps_; ++it) {
      const Eigen::VectorXd r = rhs - s_ * x;
      x += lu_.solve(r);
    }
    return x;
  }

 private:
  const DenseMatrix& s_;
  Eigen::PartialPivLU<DenseMatrix> lu_;
  int refinement_steps_;
};

double norm2_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

AmpsSolver::AmpsSolver(SparseMatrix k, std::span<const double> f,
                       const AmpsOptions& options)
    : AmpsSolver(k,
                 std::make_shared<const Factors>(factorize_ldlt(k, options.ldlt)),
                 f, options) {}

AmpsSolver::AmpsSolver(SparseMatrix k, std::shared_ptr<const Factors> factors,
                       std::span<const double> f, const AmpsOptions& options)
    : k_(std::move(k)),
      factors_(std::move(factors)),
      s2_pivot_tol_(options.s2_pivot_tol),
      refinement_steps_(options.refinement_steps),
      max_correction_sweeps_(options.max_correction_sweeps),
      correction_tol_(options.correction_tol) {
  if (refinement_steps_ < 0 || max_correction_sweeps_ < 0)
    throw std::invalid_argument("refinement counts must be >= 0");
  if (k_.nrows != k_.ncols) throw DimensionError("K must be square");
  if (!factors_ || factors_->n != k_.ncols) throw DimensionError("factors do not match K");
  if (static_cast<index_t>(f.size()) != k_.ncols)
    throw DimensionError("force vector length does not match K");
  set_threads(options.threads);
  if (!factors_->is_positive_definite())
    throw std::invalid_argument("K is not positive definite");
  f_.assign(f.begin(), f.end());
  a_ = full_solve(*factors_, f_);
}

void AmpsSolver::set_threads(int threads) {
  if (threads < 0) throw std::invalid_argument("thread count must be >= 0");
  threads_ = threads == 0 ? omp_get_num_procs() : threads;
}

index_t AmpsSolver::h_position(index_t dof) const {
  if (dof < 0) return -1;
  if (dof < n()) return replaced_.position(dof);
  if (dof < n() + k()) return m() + (dof - n());
  return -1;
}

double AmpsSolver::w(index_t i, index_t j) const {
  if (j > i) std::swap(i, j);
  return w_[packed_row(i) + j];
}

DenseMatrix AmpsSolver::w_full() const {
  const index_t mm = m();
  DenseMatrix out(mm, mm);
  for (index_t i = 0; i < mm; ++i) {
    const double* row = w_.data() + packed_row(i);
    for (index_t j = 0; j <= i; ++j) {
      out(i, j) = row[j];
      out(j, i) = row[j];
    }
  }
  return out;
}

SparseColumn AmpsSolver::v_column(index_t j) const {
  SparseColumn c;
  c.rows.assign(v_rows_.begin() + v_ptr_[j], v_rows_.begin() + v_ptr_[j + 1]);
  c.values.assign(v_vals_.begin() + v_ptr_[j], v_vals_.begin() + v_ptr_[j + 1]);
  return c;
}

std::uint64_t AmpsSolver::memo_checksum(index_t prefix) const {
  if (prefix < 0 || prefix > m())
    throw std::out_of_range("memo_checksum: prefix out of range");
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const auto nv = static_cast<std::size_t>(v_ptr_[prefix]);
  mix(v_ptr_.data(), sizeof(index_t) * (prefix + 1));
  mix(v_rows_.data(), sizeof(index_t) * nv);
  mix(v_vals_.data(), sizeof(double) * nv);
  mix(w_.data(), sizeof(double) * packed_row(prefix));
  return h;
}

void AmpsSolver::extend_memo(std::span<const index_t> new_dofs) {
  Stopwatch clock;
  const index_t nn = n();
  const index_t m_old = m();
  for (std::size_t i = 0; i < new_dofs.size(); ++i) {
    const index_t d = new_dofs[i];
    if (d < 0 || d >= nn)
      throw std::out_of_range("extend_memo: DOF " + std::to_string(d) +
                              " is not an original DOF");
    if (replaced_.contains(d) ||
        std::find(new_dofs.begin(), new_dofs.begin() + i, d) !=
            new_dofs.begin() + i)
      throw std::invalid_argument("extend_memo: DOF " + std::to_string(d) +
                                  " is already in H");
  }
  const auto delta = static_cast<index_t>(new_dofs.size());
  if (delta == 0) {
    timings_.memo_us = clock.elapsed_us();
    return;
  }

  // V_delta = L^{-1} H_delta, one independent sparse solve per column.
  std::vector<SparseColumn> cols(delta);
#pragma omp parallel num_threads(threads_)
  {
    TriangularWorkspace ws(nn);
#pragma omp for schedule(dynamic)
    for (index_t q = 0; q < delta; ++q)
      cols[q] = forward_solve_sparse(*factors_, new_dofs[q], ws);
  }
  for (index_t q = 0; q < delta; ++q) {
    replaced_.insert(new_dofs[q]);
    v_rows_.insert(v_rows_.end(), cols[q].rows.begin(), cols[q].rows.end());
    v_vals_.insert(v_vals_.end(), cols[q].values.begin(), cols[q].values.end());
    v_ptr_.push_back(static_cast<index_t>(v_rows_.size()));
  }
  cols.clear();

  // Trapezoidal augmentation of tril(H^T K^{-1} H):
  // W[i, j] = V_i^T D^{-1} V_j for new i and all j <= i. Each entry is a
  // single ordered sum over the pattern of V_j, so the result does not
  // depend on the thread count.
  const index_t m_new = m_old + delta;
  w_.resize(packed_row(m_new), 0.0);
  std::vector<double> u;
  for (index_t c0 = m_old; c0 < m_new; c0 += kTrapezoidChunk) {
    const index_t c1 = std::min(c0 + kTrapezoidChunk, m_new);
    const index_t width = c1 - c0;
    u.assign(static_cast<std::size_t>(nn) * width, 0.0);
    for (index_t q = 0; q < width; ++q)
      for (index_t p = v_ptr_[c0 + q]; p < v_ptr_[c0 + q + 1]; ++p) {
        const index_t r = v_rows_[p];
        u[r * width + q] = v_vals_[p] / factors_->d[r];
      }
#pragma omp parallel num_threads(threads_)
    {
      std::vector<double> acc(width);
#pragma omp for schedule(dynamic, 16)
      for (index_t j = 0; j < c1; ++j) {
        const index_t q0 = std::max<index_t>(0, j - c0);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (index_t p = v_ptr_[j]; p < v_ptr_[j + 1]; ++p) {
          const double vj = v_vals_[p];
          const double* urow = u.data() + v_rows_[p] * width;
          for (index_t q = q0; q < width; ++q) acc[q] += vj * urow[q];
        }
        for (index_t q = q0; q < width; ++q)
          w_[packed_row(c0 + q) + j] = acc[q];
      }
    }
  }

  // Open up E: the new originals sit between the old originals and the
  // appended DOFs.
  const index_t kk = k();
  DenseMatrix grown = DenseMatrix::Zero(m_new + kk, m_new + kk);
  grown.topLeftCorner(m_old, m_old) = e_.topLeftCorner(m_old, m_old);
  grown.topRightCorner(m_old, kk) = e_.topRightCorner(m_old, kk);
  grown.bottomLeftCorner(kk, m_old) = e_.bottomLeftCorner(kk, m_old);
  grown.bottomRightCorner(kk, kk) = e_.bottomRightCorner(kk, kk);
  e_ = std::move(grown);
  timings_.memo_us = clock.elapsed_us();
}

void AmpsSolver::add_new_dofs(index_t count) {
  if (count < 0) throw std::invalid_argument("negative new DOF count");
  if (count == 0) return;
  const index_t old = m() + k();
  e_.conservativeResize(old + count, old + count);
  e_.rightCols(count).setZero();
  e_.bottomRows(count).setZero();
  new_dofs_ += count;
  grown_ = true;
}

void AmpsSolver::accumulate_update(std::span<const index_t> dofs,
                                   const DenseMatrix& delta) {
  const auto len = static_cast<index_t>(dofs.size());
  if (delta.rows() != len || delta.cols() != len)
    throw DimensionError("update block does not match its DOF list");
  std::vector<index_t> pos(len);
  for (index_t i = 0; i < len; ++i) {
    pos[i] = h_position(dofs[i]);
    if (pos[i] < 0)
      throw std::invalid_argument("update touches DOF " +
                                  std::to_string(dofs[i]) + " outside H");
  }
  for (index_t j = 0; j < len; ++j)
    for (index_t i = 0; i < len; ++i) e_(pos[i], pos[j]) += delta(i, j);
  if (len > 0) grown_ = true;
}

void AmpsSolver::set_update(const DenseMatrix& e) {
  const index_t size = m() + k();
  if (e.rows() != size || e.cols() != size)
    throw DimensionError("E must be (m + k) square");
  const double scale = size > 0 ? e.cwiseAbs().maxCoeff() : 0.0;
  if (size > 0 && (e - e.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("E must be symmetric");
  e_ = e;
  if (scale > 0.0) grown_ = true;
}

void AmpsSolver::apply(const UpdateRequest& request) {
  timings_ = {};
  extend_memo(request.new_replaced_dofs);
  add_new_dofs(request.new_dof_count);
  accumulate_update(request.delta_dofs, request.delta);
}

DenseMatrix AmpsSolver::form_s2() const {
  // S2 = diag(I_m, 0_k) - blockdiag(H^T K^{-1} H, I_k) E
  const index_t mm = m(), kk = k();
  DenseMatrix s2(mm + kk, mm + kk);
  Eigen::setNbThreads(threads_);
  if (mm > 0) {
    const DenseMatrix wf = w_full();
    s2.topRows(mm).noalias() = -(wf * e_.topRows(mm));
    s2.topLeftCorner(mm, mm).diagonal().array() += 1.0;
  }
  if (kk > 0) s2.bottomRows(kk) = -e_.bottomRows(kk);
  return s2;
}

Vector AmpsSolver::h_dot(std::span<const double> g) const {
  const index_t mm = m();
  Vector out(mm);
#pragma omp parallel for num_threads(threads_) schedule(static)
  for (index_t p = 0; p < mm; ++p) {
    double s = 0.0;
    for (index_t q = v_ptr_[p]; q < v_ptr_[p + 1]; ++q)
      s += v_vals_[q] * g[v_rows_[q]];
    out[p] = s;
  }
  return out;
}

Vector AmpsSolver::back_substitute(std::span<const double> y_orig,
                                   Vector seed) const {
  const index_t nn = n();
  Vector t(nn, 0.0);
  for (index_t p = 0; p < static_cast<index_t>(y_orig.size()); ++p) {
    const double yp = y_orig[p];
    if (yp == 0.0) continue;
    for (index_t q = v_ptr_[p]; q < v_ptr_[p + 1]; ++q)
      t[v_rows_[q]] += v_vals_[q] * yp;
  }
  if (seed.empty()) seed.assign(nn, 0.0);
  for (index_t r = 0; r < nn; ++r) seed[r] += t[r] / factors_->d[r];
  backward_solve_inplace(*factors_, seed);
  return from_permuted(*factors_, seed);
}

Vector AmpsSolver::multiply_updated(std::span<const double> x) const {
  const index_t nn = n(), mm = m(), kk = k();
  if (static_cast<index_t>(x.size()) != nn + kk)
    throw DimensionError("multiply_updated: length must be n + k");
  // K_hat x = blockdiag(K, I) x - H_bar E_bar H_bar^T x
  Vector y = spmv(k_, x.first(nn));
  y.insert(y.end(), x.begin() + nn, x.end());
  if (mm + kk == 0) return y;
  Eigen::VectorXd hx(mm + kk);
  for (index_t p = 0; p < mm; ++p) hx[p] = x[replaced_[p]];
  for (index_t q = 0; q < kk; ++q) hx[mm + q] = x[nn + q];
  Eigen::VectorXd t = e_ * hx;
  t.tail(kk) += hx.tail(kk);
  for (index_t p = 0; p < mm; ++p) y[replaced_[p]] -= t[p];
  for (index_t q = 0; q < kk; ++q) y[nn + q] -= t[mm + q];
  return y;
}

Vector AmpsSolver::assemble_solution(const Eigen::VectorXd& a2,
                                     std::span<const double> f_new, Vector seed,
                                     bool add_original, double* gap_out) const {
  const index_t nn = n(), mm = m(), kk = k();
  // y = E_bar a2; the identity block of E_bar only touches appended DOFs.
  Eigen::VectorXd y = e_ * a2;
  y.tail(kk) += a2.tail(kk);
  Vector x = back_substitute(std::span<const double>(y.data(), mm), std::move(seed));
  if (add_original)
    for (index_t i = 0; i < nn; ++i) x[i] += a_[i];
  x.resize(nn + kk);
  for (index_t q = 0; q < kk; ++q) x[nn + q] = f_new[q] + y[mm + q];

  // Components on H come straight from a2.
  double gap = 0.0;
  for (index_t p = 0; p < mm + kk; ++p) {
    const index_t dof = p < mm ? replaced_[p] : nn + (p - mm);
    gap = std::max(gap, std::abs(x[dof] - a2[p]));
    x[dof] = a2[p];
  }
  if (gap_out) {
    const double scale = a2.cwiseAbs().maxCoeff();
    *gap_out = scale > 0.0 ? gap / scale : gap;
  }
  return x;
}

UpdateSolution AmpsSolver::solve_updated(std::span<const double> f_hat) {
  const index_t nn = n(), mm = m(), kk = k();
  if (static_cast<index_t>(f_hat.size()) != nn + kk)
    throw DimensionError("f_hat must have length n + k");
  UpdateSolution out;
  Stopwatch clock;

  // Right-hand side [H^T K^{-1} f_hat; f_new], with g = D^{-1} L^{-1} P f_hat.
  auto general_rhs = [&](std::span<const double> f, Vector& g) {
    g = to_permuted(*factors_, f.first(nn));
    forward_solve_inplace(*factors_, g);
    for (index_t r = 0; r < nn; ++r) g[r] /= factors_->d[r];
    const Vector hg = h_dot(g);
    Eigen::VectorXd rhs(mm + kk);
    for (index_t p = 0; p < mm; ++p) rhs[p] = hg[p];
    for (index_t q = 0; q < kk; ++q) rhs[mm + q] = f[nn + q];
    return rhs;
  };

  out.used_force_shortcut = std::equal(f_.begin(), f_.end(), f_hat.begin());
  Eigen::VectorXd rhs(mm + kk);
  Vector g;
  if (out.used_force_shortcut) {
    for (index_t p = 0; p < mm; ++p) rhs[p] = a_[replaced_[p]];
    for (index_t q = 0; q < kk; ++q) rhs[mm + q] = f_hat[nn + q];
  } else {
    rhs = general_rhs(f_hat, g);
  }
  timings_.rhs_us = clock.lap_us();

  if (mm + kk == 0) {
    out.a_hat = out.used_force_shortcut ? a_ : full_solve(*factors_, f_hat);
    timings_.ahat_us = clock.lap_us();
    return out;
  }

  const DenseMatrix s2 = form_s2();
  timings_.s2_us = clock.lap_us();

  const CheckedLu lu(s2, s2_pivot_tol_, refinement_steps_);
  const Eigen::VectorXd a2 = lu.solve(rhs);
  timings_.a2_us = clock.lap_us();

  out.a_hat = assemble_solution(a2, f_hat.subspan(nn), std::move(g),
                                out.used_force_shortcut, &out.h_component_gap);

  // Residual correction: solve K_hat d = f_hat - K_hat a_hat on the same
  // factorizations and add d.
  const double f_norm = norm2_of(f_hat);
  for (int sweep = 0; sweep < max_correction_sweeps_; ++sweep) {
    Vector r = multiply_updated(out.a_hat);
    for (index_t i = 0; i < nn + kk; ++i) r[i] = f_hat[i] - r[i];
    const double r_norm = norm2_of(r);
    out.relative_residual = f_norm > 0.0 ? r_norm / f_norm : r_norm;
    if (out.relative_residual <= correction_tol_) break;
    Vector gr;
    const Eigen::VectorXd rr = general_rhs(r, gr);
    const Vector d = assemble_solution(lu.solve(rr), std::span<const double>(r).subspan(nn),
                                       std::move(gr), false, nullptr);
    for (index_t i = 0; i < nn + kk; ++i) out.a_hat[i] += d[i];
    ++out.correction_sweeps;
  }
  timings_.ahat_us = clock.lap_us();
  return out;
}

Vector AmpsSolver::solve_updated_alt(std::span<const double> f_hat) {
  const index_t nn = n(), mm = m(), kk = k();
  if (static_cast<index_t>(f_hat.size()) != nn + kk)
    throw DimensionError("f_hat must have length n + k");
  if (!std::equal(f_.begin(), f_.end(), f_hat.begin()))
    throw std::invalid_argument(
        "solve_updated_alt requires f_hat to match f on the original DOFs");
  Stopwatch clock;
  if (mm + kk == 0) return a_;

  // (E_bar blockdiag(W, I_k) - I) a3 = [0; f_new] + E[:, :m] H^T a
  Eigen::setNbThreads(threads_);
  DenseMatrix ebar = e_;
  ebar.bottomRightCorner(kk, kk).diagonal().array() += 1.0;
  DenseMatrix t(mm + kk, mm + kk);
  if (mm > 0) t.leftCols(mm).noalias() = ebar.leftCols(mm) * w_full();
  if (kk > 0) t.rightCols(kk) = ebar.rightCols(kk);
  t.diagonal().array() -= 1.0;
  timings_.s2_us = clock.lap_us();

  Eigen::VectorXd hta(mm);
  for (index_t p = 0; p < mm; ++p) hta[p] = a_[replaced_[p]];
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mm + kk);
  if (mm > 0) rhs.noalias() = e_.leftCols(mm) * hta;
  for (index_t q = 0; q < kk; ++q) rhs[mm + q] += f_hat[nn + q];
  timings_.rhs_us = clock.lap_us();

  const Eigen::VectorXd a3 =
      CheckedLu(t, s2_pivot_tol_, refinement_steps_).solve(rhs);
  timings_.a2_us = clock.lap_us();

  // a_hat = [a; 0] - K_bar^{-1} H_bar a3
  const Vector corr = back_substitute(std::span<const double>(a3.data(), mm), {});
  Vector a_hat(nn + kk);
  for (index_t i = 0; i < nn; ++i) a_hat[i] = a_[i] - corr[i];
  for (index_t q = 0; q < kk; ++q) a_hat[nn + q] = -a3[mm + q];
  timings_.ahat_us = clock.lap_us();
  return a_hat;
}

DirichletSolution AmpsSolver::impose_dirichlet(std::span<const double> prescribed,
                                               std::span<const double> force) {
  if (grown_)
    throw std::logic_error(
        "impose_dirichlet is only defined on the unmodified stiffness matrix");
  const index_t nn = n(), mm = m();
  if (static_cast<index_t>(prescribed.size()) != mm)
    throw DimensionError("prescribed values must be ordered as H");
  if (static_cast<index_t>(force.size()) != nn)
    throw DimensionError("force must have length n");
  Stopwatch clock;
  DirichletSolution out;

  // f_hat = f - K H p off H, and -(K H p) on H.
  Vector khp(nn, 0.0);
  for (index_t p = 0; p < mm; ++p) {
    const index_t h = replaced_[p];
    const double val = prescribed[p];
    for (index_t q = k_.col_ptr[h]; q < k_.col_ptr[h + 1]; ++q)
      khp[k_.row_idx[q]] += k_.values[q] * val;
  }
  Vector f_hat(nn);
  for (index_t i = 0; i < nn; ++i) f_hat[i] = force[i] - khp[i];
  for (index_t h : replaced_) f_hat[h] = -khp[h];

  // g = D^{-1} L^{-1} P f_hat, reused for the final back substitution.
  Vector g = to_permuted(*factors_, f_hat);
  forward_solve_inplace(*factors_, g);
  for (index_t r = 0; r < nn; ++r) g[r] /= factors_->d[r];
  const Vector rhs = h_dot(g);
  timings_.rhs_us = clock.lap_us();

  if (mm == 0) {
    out.displacement = from_permuted(*factors_, backward_solve(*factors_, g));
    timings_.ahat_us = clock.lap_us();
    return out;
  }

  Eigen::LLT<DenseMatrix> llt(w_full());
  if (llt.info() != Eigen::Success)
    throw SingularUpdateError("H^T K^{-1} H is not numerically positive definite");
  timings_.s2_us = clock.lap_us();

  const Eigen::VectorXd a2 =
      llt.solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), mm));
  timings_.a2_us = clock.lap_us();

  // a1 = L^{-T} (g - D^{-1} V a2)
  const Eigen::VectorXd neg = -a2;
  out.displacement =
      back_substitute(std::span<const double>(neg.data(), mm), std::move(g));
  out.multipliers.assign(a2.data(), a2.data() + mm);
  out.reactions.resize(mm);
  for (index_t p = 0; p < mm; ++p) {
    const index_t h = replaced_[p];
    out.max_h_residue = std::max(out.max_h_residue, std::abs(out.displacement[h]));
    out.displacement[h] += prescribed[p];
    out.reactions[p] = -a2[p] - force[h];
  }
  timings_.ahat_us = clock.lap_us();
  return out;
}

std::string snapshot_report(const AmpsSolver& solver,
                            std::span<const double> residual_history) {
  std::ostringstream os;
  os << "n " << solver.n() << "\n";
  os << "m " << solver.m() << "\n";
  os << "k " << solver.k() << "\n";
  os << "nnz_L " << solver.factors().nnz_l() << "\n";
  os << "E " << solver.update().rows() << "x" << solver.update().cols() << "\n";
  os << "W " << solver.m() << "x" << solver.m() << " (lower, "
     << solver.w_packed().size() << " stored)\n";
  os << "H";
  for (index_t d : solver.replaced()) os << ' ' << d;
  for (index_t q = 0; q < solver.k(); ++q) os << ' ' << solver.n() + q;
  os << "\nresiduals";
  os.precision(3);
  os << std::scientific;
  for (double r : residual_history) os << ' ' << r;
  os << "\n";
  return os.str();
}

}  // namespace amps
