#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "amps/sparse.hpp"
#include "test_util.hpp"

using namespace amps;

namespace {

SparseMatrix chain4() {
  std::vector<std::tuple<index_t, index_t, double>> t = {
      {0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {3, 3, 1.0},
      {1, 0, -1.0}, {2, 1, -1.0}, {3, 2, -1.0}};
  return SparseMatrix::from_triplets(4, 4, t);
}

SparseMatrix random_lower(index_t n, double density, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  DenseMatrix l = DenseMatrix::Identity(n, n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = j + 1; i < n; ++i)
      if (coin(rng) < density) l(i, j) = 0.5 + coin(rng);  // positive: no cancellation
  return SparseMatrix::from_dense(l);
}

std::vector<index_t> dense_pattern(const SparseMatrix& l, const std::vector<index_t>& seeds) {
  const DenseMatrix ld = l.to_dense();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(l.ncols);
  for (index_t s : seeds) b[s] = 1.0;
  const Eigen::VectorXd x = ld.triangularView<Eigen::Lower>().solve(b);
  std::vector<index_t> out;
  for (index_t i = 0; i < l.ncols; ++i)
    if (x[i] != 0.0) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("spmv small cases") {
  const Vector x = {1, 2, 3};
  CHECK(spmv(SparseMatrix::identity(3), x) == x);
  DenseMatrix a(2, 2);
  a << 4, 2, 2, 3;
  const Vector y = spmv(SparseMatrix::from_dense(a), Vector{1, 0});
  CHECK(y == Vector{4, 2});
}

TEST_CASE("spmv matches a dense triple loop") {
  const SparseMatrix a = test::random_spd(8, 0.4, 7);
  const DenseMatrix d = a.to_dense();
  const Vector x = test::random_vector(8, 3);
  const Vector y = spmv(a, x);
  for (index_t i = 0; i < 8; ++i) {
    double s = 0.0;
    for (index_t j = 0; j < 8; ++j) s += d(i, j) * x[j];
    CHECK(y[i] == doctest::Approx(s).epsilon(1e-15));
  }
}

TEST_CASE("from_triplets sums duplicates and validates") {
  std::vector<std::tuple<index_t, index_t, double>> t = {
      {1, 0, 2.0}, {0, 0, 1.0}, {1, 0, 3.0}, {0, 1, 4.0}};
  const SparseMatrix a = SparseMatrix::from_triplets(2, 2, t);
  a.validate();
  CHECK(a.nnz() == 3);
  CHECK(a.coeff(1, 0) == 5.0);
  CHECK(a.coeff(1, 1) == 0.0);
  CHECK(a.max_abs() == 5.0);

  SparseMatrix bad = a;
  std::swap(bad.row_idx[0], bad.row_idx[1]);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  std::vector<std::tuple<index_t, index_t, double>> out_of_range = {{2, 0, 1.0}};
  CHECK_THROWS(SparseMatrix::from_triplets(2, 2, out_of_range));
}

TEST_CASE("IndexSet keeps insertion order") {
  IndexSet s;
  CHECK(s.insert(5));
  CHECK(s.insert(1));
  CHECK_FALSE(s.insert(5));
  CHECK(s.size() == 2);
  CHECK(s[0] == 5);
  CHECK(s.position(1) == 1);
  CHECK(s.position(9) == -1);
  CHECK(s.contains(1));
  CHECK_FALSE(s.contains(2));
}

TEST_CASE("reach_closure on chain and identity") {
  const SparseMatrix l = chain4();
  CHECK(reach_closure(l, std::vector<index_t>{0}) == std::vector<index_t>{0, 1, 2, 3});
  CHECK(reach_closure(l, std::vector<index_t>{2}) == std::vector<index_t>{2, 3});
  const SparseMatrix id = SparseMatrix::identity(5);
  CHECK(reach_closure(id, std::vector<index_t>{3}) == std::vector<index_t>{3});
}

TEST_CASE("reach_closure equals the pattern of a dense forward solve") {
  for (unsigned seed = 1; seed <= 10; ++seed) {
    const SparseMatrix l = random_lower(20, 0.12, seed);
    std::mt19937 rng(seed * 31);
    std::vector<index_t> seeds;
    for (int k = 0; k < 1 + static_cast<int>(seed % 3); ++k)
      seeds.push_back(static_cast<index_t>(rng() % 20));
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    CHECK(reach_closure(l, seeds) == dense_pattern(l, seeds));
  }
}

TEST_CASE("reach_closure union and idempotence") {
  ClosureWorkspace ws;
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const SparseMatrix l = random_lower(30, 0.08, seed);
    std::mt19937 rng(seed);
    std::vector<index_t> s1 = {static_cast<index_t>(rng() % 30)};
    std::vector<index_t> s2 = {static_cast<index_t>(rng() % 30),
                               static_cast<index_t>(rng() % 30)};
    if (s2[0] == s2[1]) s2.pop_back();
    const auto c1 = reach_closure(l, s1, ws);
    const auto c2 = reach_closure(l, s2, ws);
    std::set<index_t> both(s1.begin(), s1.end());
    both.insert(s2.begin(), s2.end());
    const auto c12 = reach_closure(l, std::vector<index_t>(both.begin(), both.end()), ws);
    std::set<index_t> uni(c1.begin(), c1.end());
    uni.insert(c2.begin(), c2.end());
    CHECK(c12 == std::vector<index_t>(uni.begin(), uni.end()));
    CHECK(reach_closure(l, c12, ws) == c12);
  }
}

TEST_CASE("closure reach is topologically ordered") {
  const SparseMatrix l = random_lower(40, 0.1, 99);
  ClosureWorkspace ws(40);
  const std::vector<index_t> seeds = {3, 17};
  const auto topo = ws.reach(l, seeds);
  std::vector<index_t> pos(40, -1);
  for (std::size_t q = 0; q < topo.size(); ++q) pos[topo[q]] = static_cast<index_t>(q);
  for (index_t j : topo)
    for (index_t i : l.rows_of(j))
      if (i > j) CHECK(pos[i] > pos[j]);
}

TEST_CASE("Matrix Market round trip") {
  const SparseMatrix a = test::random_spd(12, 0.3, 5);
  for (bool symmetric : {true, false}) {
    std::stringstream ss;
    write_matrix_market(ss, a, symmetric);
    const SparseMatrix b = read_matrix_market(ss);
    CHECK(b.col_ptr == a.col_ptr);
    CHECK(b.row_idx == a.row_idx);
    CHECK(b.values == a.values);
  }
  std::istringstream junk("%%MatrixMarket matrix array real general\n");
  CHECK_THROWS_AS(read_matrix_market(junk), ParseError);
}
