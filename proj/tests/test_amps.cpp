#include <doctest.h>

#include "amps/amps.hpp"
#include "amps/baselines.hpp"
#include "amps/cutting.hpp"
#include "test_util.hpp"

using namespace amps;
using test::as_eigen;

namespace {

SparseMatrix diag(std::initializer_list<double> d) {
  DenseMatrix a = DenseMatrix::Zero(d.size(), d.size());
  index_t i = 0;
  for (double x : d) a(i, i) = x, ++i;
  return SparseMatrix::from_dense(a);
}

/// Dense K_hat = K_bar - H_bar E_bar H_bar^T from the solver state.
DenseMatrix dense_k_hat(const AmpsSolver& s) {
  const index_t n = s.n(), k = s.k(), m = s.m();
  DenseMatrix out = DenseMatrix::Zero(n + k, n + k);
  out.topLeftCorner(n, n) = s.stiffness().to_dense();
  out.bottomRightCorner(k, k).setIdentity();
  DenseMatrix ebar = s.update();
  ebar.bottomRightCorner(k, k).diagonal().array() += 1.0;
  auto dof = [&](index_t p) { return p < m ? s.replaced()[p] : n + (p - m); };
  for (index_t i = 0; i < m + k; ++i)
    for (index_t j = 0; j < m + k; ++j) out(dof(i), dof(j)) -= ebar(i, j);
  return out;
}

}  // namespace

TEST_CASE("init computes the original solution") {
  AmpsSolver id(SparseMatrix::identity(3), Vector{1, 0, 0});
  CHECK(id.solution() == Vector{1, 0, 0});
  CHECK(id.m() == 0);

  DenseMatrix a(2, 2);
  a << 4, 2, 2, 3;
  AmpsSolver s(SparseMatrix::from_dense(a), Vector{8, 7});
  CHECK(s.solution()[0] == doctest::Approx(1.25));
  CHECK(s.solution()[1] == doctest::Approx(1.5));

  const Mesh beam = generate_beam(4);
  const AssembledSystem sys = assemble_stiffness(beam);
  const Vector f = body_force(beam, sys.dofs, Point(0, -1, 0));
  AmpsSolver b(sys.k, f);
  CHECK(relative_residual(sys.k, b.solution(), f) <= 1e-10);

  CHECK_THROWS_AS(AmpsSolver(SparseMatrix::identity(3), Vector{1, 2}), DimensionError);
  DenseMatrix indef(2, 2);
  indef << 1, 2, 2, 1;
  CHECK_THROWS_AS(AmpsSolver(SparseMatrix::from_dense(indef), Vector{1, 1}),
                  std::invalid_argument);
}

TEST_CASE("memo on a diagonal matrix samples the inverse") {
  AmpsSolver s(diag({2, 5, 7}), Vector{1, 1, 1});
  s.extend_memo(std::vector<index_t>{2});
  s.extend_memo(std::vector<index_t>{0});
  CHECK(s.m() == 2);
  CHECK(s.w(0, 0) == doctest::Approx(1.0 / 7.0));
  CHECK(s.w(1, 1) == doctest::Approx(0.5));
  CHECK(s.w(1, 0) == 0.0);
  CHECK(s.h_position(0) == 1);
  CHECK(s.h_position(1) == -1);

  const auto before = s.memo_checksum(2);
  s.extend_memo({});
  CHECK(s.memo_checksum(2) == before);
  CHECK(s.m() == 2);
  CHECK_THROWS_AS(s.extend_memo(std::vector<index_t>{2}), std::invalid_argument);
  CHECK_THROWS_AS(s.extend_memo(std::vector<index_t>{3}), std::out_of_range);
}

TEST_CASE("incremental memo matches a dense inverse and keeps its prefix") {
  const SparseMatrix k = test::random_spd(50, 0.1, 21);
  const DenseMatrix kinv = k.to_dense().inverse();
  AmpsSolver s(k, test::random_vector(50, 1));
  const std::vector<std::vector<index_t>> steps = {
      {3, 17}, {40}, {0, 1, 2, 49}, {25, 26}, {10, 11, 12}};
  index_t prev = 0;
  std::uint64_t prev_sum = s.memo_checksum(0);
  std::vector<double> prev_w;
  for (const auto& batch : steps) {
    s.extend_memo(batch);
    CHECK(s.memo_checksum(prev) == prev_sum);
    const auto w = s.w_packed();
    for (std::size_t q = 0; q < prev_w.size(); ++q) CHECK(w[q] == prev_w[q]);
    prev = s.m();
    prev_sum = s.memo_checksum(prev);
    prev_w.assign(w.begin(), w.end());
  }
  const DenseMatrix w = s.w_full();
  CHECK(w == w.transpose());
  double err = 0.0, scale = 0.0;
  for (index_t i = 0; i < s.m(); ++i)
    for (index_t j = 0; j <= i; ++j) {
      const double ref = kinv(s.replaced()[i], s.replaced()[j]);
      err = std::max(err, std::abs(s.w(i, j) - ref));
      scale = std::max(scale, std::abs(ref));
    }
  CHECK(err <= 1e-11 * scale);
  CHECK(Eigen::LLT<DenseMatrix>(w).info() == Eigen::Success);

  // V columns stay inside the closure of their seeds.
  for (index_t j = 0; j < s.m(); ++j) {
    const SparseColumn v = s.v_column(j);
    const auto closure =
        reach_closure(s.factors().l, std::vector<index_t>{s.factors().pinv[s.replaced()[j]]});
    for (index_t r : v.rows) CHECK(std::binary_search(closure.begin(), closure.end(), r));
  }
}

TEST_CASE("thread count does not change the memo bits") {
  const SparseMatrix k = assemble_stiffness(generate_brick(0)).k;
  const Vector f = test::random_vector(k.ncols, 4);
  std::vector<index_t> dofs;
  for (index_t d = 0; d < k.ncols; d += 7) dofs.push_back(d);
  AmpsSolver one(k, f, AmpsOptions{{}, 1});
  AmpsSolver four(k, f, AmpsOptions{{}, 4});
  one.extend_memo(dofs);
  four.extend_memo(dofs);
  CHECK(one.memo_checksum(one.m()) == four.memo_checksum(four.m()));
}

TEST_CASE("null update reproduces the original solution") {
  const SparseMatrix k = test::random_spd(20, 0.2, 8);
  const Vector f = test::random_vector(20, 9);
  AmpsSolver s(k, f);
  s.extend_memo(std::vector<index_t>{4, 9, 13});
  const UpdateSolution u = s.solve_updated(f);
  CHECK(u.used_force_shortcut);
  CHECK(relative_inf_diff(u.a_hat, s.solution()) <= 1e-12);
  CHECK(relative_inf_diff(s.solve_updated_alt(f), s.solution()) <= 1e-12);
}

TEST_CASE("scalar replacement") {
  AmpsSolver s(diag({2}), Vector{4});
  UpdateRequest req;
  req.new_replaced_dofs = {0};
  req.delta_dofs = {0};
  req.delta = DenseMatrix::Constant(1, 1, -3.0);  // K_hat = 2 - (-3) = 5
  s.apply(req);
  const UpdateSolution u = s.solve_updated(Vector{4});
  CHECK(u.a_hat[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s.solve_updated_alt(Vector{4})[0] == doctest::Approx(0.8).epsilon(1e-15));
  // General path: a different load on the replaced DOF.
  CHECK(s.solve_updated(Vector{10}).a_hat[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(s.solve_updated_alt(Vector{10}), std::invalid_argument);
}

TEST_CASE("random growth updates match dense solves") {
  const index_t n = 30;
  const SparseMatrix k = test::random_spd(n, 0.15, 30);
  const Vector f = test::random_vector(n, 31);
  AmpsSolver s(k, f);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int step = 0; step < 4; ++step) {
    UpdateRequest req;
    const index_t a = 2 + 5 * step, b = a + 1;
    req.new_replaced_dofs = {a, b};
    req.new_dof_count = 2;
    const index_t q0 = n + s.k(), q1 = q0 + 1;
    req.delta_dofs = {a, b, q0, q1};
    // Couple the new DOFs to a and b; keep K_hat diagonally dominant.
    DenseMatrix d = DenseMatrix::Zero(4, 4);
    for (int i = 0; i < 2; ++i)
      for (int j = 2; j < 4; ++j) d(i, j) = d(j, i) = u(rng);
    d(2, 2) = d(3, 3) = -3.0;  // new diagonal 1 - (-3) - 1 = 3
    d(0, 0) = d(1, 1) = 0.1;
    req.delta = d;
    s.apply(req);

    const DenseMatrix kh = dense_k_hat(s);
    Vector fh(f);
    for (index_t q = 0; q < s.k(); ++q) fh.push_back(0.5 + q);
    const Eigen::VectorXd ref = kh.lu().solve(as_eigen(fh));
    const Vector ref_v(ref.data(), ref.data() + ref.size());
    const UpdateSolution sol = s.solve_updated(fh);
    CHECK(sol.used_force_shortcut);
    CHECK(relative_inf_diff(sol.a_hat, ref_v) <= 1e-12);
    CHECK(sol.h_component_gap <= 1e-9);
    CHECK(relative_inf_diff(s.solve_updated_alt(fh), ref_v) <= 1e-12);

    // Same matrix, load changed on original DOFs.
    fh[7] += 2.0;
    const Eigen::VectorXd ref2 = kh.lu().solve(as_eigen(fh));
    const UpdateSolution sol2 = s.solve_updated(fh);
    CHECK_FALSE(sol2.used_force_shortcut);
    CHECK(relative_inf_diff(sol2.a_hat, Vector(ref2.data(), ref2.data() + ref2.size())) <= 1e-12);

    // K_hat products agree with the dense reconstruction.
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n + s.k(), -1.0, 2.0);
    const Vector kx = s.multiply_updated(Vector(x.data(), x.data() + x.size()));
    CHECK((as_eigen(kx) - kh * x).cwiseAbs().maxCoeff() <= 1e-13 * (kh * x).cwiseAbs().maxCoeff());
  }
}

TEST_CASE("singular S2 is reported") {
  // Replacing the only entry by zero makes K_hat singular.
  AmpsSolver s(diag({2, 3}), Vector{1, 1});
  UpdateRequest req;
  req.new_replaced_dofs = {0};
  req.delta_dofs = {0};
  req.delta = DenseMatrix::Constant(1, 1, 2.0);
  s.apply(req);
  CHECK_THROWS_AS(s.solve_updated(Vector{1, 1}), SingularUpdateError);
}

TEST_CASE("update input validation") {
  AmpsSolver s(diag({2, 3}), Vector{1, 1});
  s.extend_memo(std::vector<index_t>{0});
  CHECK_THROWS_AS(s.accumulate_update(std::vector<index_t>{1}, DenseMatrix::Zero(1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(s.accumulate_update(std::vector<index_t>{0}, DenseMatrix::Zero(2, 2)),
                  DimensionError);
  DenseMatrix asym(1, 1);
  asym << 1.0;
  s.set_update(asym);
  DenseMatrix wrong = DenseMatrix::Zero(2, 2);
  CHECK_THROWS_AS(s.set_update(wrong), DimensionError);
  CHECK_THROWS_AS(s.solve_updated(Vector{1}), DimensionError);
}

TEST_CASE("Dirichlet: diagonal example") {
  AmpsSolver s(diag({2, 5}), Vector{2, 5});
  s.extend_memo(std::vector<index_t>{0});
  const DirichletSolution d = s.impose_dirichlet(Vector{0.0}, Vector{2, 5});
  CHECK(d.displacement[0] == doctest::Approx(0.0));
  CHECK(d.displacement[1] == doctest::Approx(1.0));
  CHECK(d.reactions[0] == doctest::Approx(-2.0));
}

TEST_CASE("Dirichlet: prescribing the current solution changes nothing") {
  const SparseMatrix k = assemble_stiffness(generate_beam(4)).k;
  const Vector f = test::random_vector(k.ncols, 12);
  AmpsSolver s(k, f);
  std::vector<index_t> h = {10, 50, 51, 200};
  s.extend_memo(h);
  Vector p;
  for (index_t d : h) p.push_back(s.solution()[d]);
  const DirichletSolution d = s.impose_dirichlet(p, f);
  CHECK(relative_inf_diff(d.displacement, s.solution()) <= 1e-10);
  for (double r : d.reactions) CHECK(std::abs(r) <= 1e-8 * norm_inf(f));
}

TEST_CASE("Dirichlet: matches a dense constrained solve") {
  const SparseMatrix k = test::random_spd(25, 0.2, 40);
  const Vector f = test::random_vector(25, 41);
  AmpsSolver s(k, f);
  const std::vector<index_t> h = {3, 8, 20};
  const Vector p = {0.5, -1.0, 0.25};
  s.extend_memo(h);
  const DirichletSolution d = s.impose_dirichlet(p, f);
  // Dense oracle on the free block.
  const DenseMatrix kd = k.to_dense();
  std::vector<index_t> free;
  for (index_t i = 0; i < 25; ++i)
    if (std::find(h.begin(), h.end(), i) == h.end()) free.push_back(i);
  DenseMatrix kff(free.size(), free.size());
  Eigen::VectorXd rhs(free.size());
  for (std::size_t i = 0; i < free.size(); ++i) {
    rhs[i] = f[free[i]];
    for (std::size_t j = 0; j < h.size(); ++j) rhs[i] -= kd(free[i], h[j]) * p[j];
    for (std::size_t j = 0; j < free.size(); ++j) kff(i, j) = kd(free[i], free[j]);
  }
  const Eigen::VectorXd uf = kff.llt().solve(rhs);
  Eigen::VectorXd u(25);
  for (std::size_t i = 0; i < free.size(); ++i) u[free[i]] = uf[i];
  for (std::size_t j = 0; j < h.size(); ++j) u[h[j]] = p[j];
  CHECK((as_eigen(d.displacement) - u).cwiseAbs().maxCoeff() <= 1e-12 * u.cwiseAbs().maxCoeff());
  const Eigen::VectorXd ku = kd * u;
  for (std::size_t j = 0; j < h.size(); ++j)
    CHECK(d.reactions[j] == doctest::Approx(ku[h[j]] - f[h[j]]).epsilon(1e-10));
  CHECK(d.max_h_residue <= 1e-12 * u.cwiseAbs().maxCoeff());
}

TEST_CASE("Dirichlet after growth is refused") {
  AmpsSolver s(diag({2, 5}), Vector{2, 5});
  UpdateRequest req;
  req.new_replaced_dofs = {0};
  req.delta_dofs = {0};
  req.delta = DenseMatrix::Constant(1, 1, -1.0);
  s.apply(req);
  CHECK_THROWS_AS(s.impose_dirichlet(Vector{0.0}, Vector{2, 5}), std::logic_error);
}

TEST_CASE("snapshot report lists the dimensions") {
  AmpsSolver s(diag({2, 5, 7}), Vector{1, 1, 1});
  s.extend_memo(std::vector<index_t>{1});
  const std::string r = snapshot_report(s, Vector{1e-3, 1e-9});
  CHECK(r.find("n 3\n") != std::string::npos);
  CHECK(r.find("m 1\n") != std::string::npos);
  CHECK(r.find("H 1\n") != std::string::npos);
}
