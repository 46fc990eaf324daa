#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "amps/cutting.hpp"
#include "bench_runner.hpp"

namespace fs = std::filesystem;
using namespace amps;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(AMPS_BENCH_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "amps_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("gen writes loadable meshes") {
  const fs::path p = scratch("beam4.mesh");
  CHECK(run("gen beam:4 " + p.string()) == 0);
  const Mesh m = read_mesh(p.string());
  CHECK(m.num_vertices() == 100);
  CHECK(m == generate_beam(4));
  const fs::path q = scratch("brick0.mesh");
  CHECK(run("gen brick:0 " + q.string()) == 0);
  CHECK(read_mesh(q.string()).num_vertices() == 225);
}

TEST_CASE("bench writes one row per cut step") {
  const fs::path out = scratch("run.csv");
  const fs::path bd = scratch("breakdown.csv");
  CHECK(run("bench --mesh beam:4 --experiment cut --solver amps --reps 3 --threads 1 --out " +
            out.string() + " --breakdown " + bd.string() + " --compare oracle") == 0);
  const auto rows = lines(out);
  REQUIRE(rows.size() == 21);
  CHECK(rows[0] ==
        "step,n,m,k,t_memo_us,t_s2_us,t_rhs_us,t_a2_us,t_ahat_us,t_total_us,rel_residual,"
        "max_inf_diff");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double diff = std::stod(rows[i].substr(rows[i].rfind(',') + 1));
    CHECK(diff >= 0.0);
    CHECK(diff <= 1e-8);
  }
  CHECK(lines(bd).size() == 21);
}

TEST_CASE("bench from a mesh file and a script file") {
  const fs::path mesh = scratch("b4.mesh");
  const fs::path script = scratch("deform.txt");
  const fs::path out = scratch("deform.csv");
  REQUIRE(run("gen beam:4 " + mesh.string()) == 0);
  REQUIRE(run("bench --mesh " + mesh.string() + " --experiment deform --steps 5 --write-script " +
              script.string()) == 0);
  CHECK(read_script(script.string()).actions.size() == 5);
  CHECK(run("bench --mesh " + mesh.string() + " --script " + script.string() +
            " --solver cg --reps 1 --out " + out.string()) == 0);
  CHECK(lines(out).size() == 6);
}

TEST_CASE("exit codes") {
  CHECK(run("") == 2);
  CHECK(run("bench --solver nope") == 2);
  CHECK(run("bench --reps 0") == 2);
  CHECK(run("bench --mesh cube:3 --reps 1") == 2);
  CHECK(run("verify") == 0);
}

TEST_CASE("golden run: deterministic columns of a tiny cut") {
  const fs::path out = scratch("golden.csv");
  REQUIRE(run("bench --mesh beam:4 --experiment cut --steps 6 --reps 1 --threads 1 --out " +
              out.string()) == 0);
  const auto rows = lines(out);
  std::ifstream golden(std::string(AMPS_TEST_DATA) + "/golden_beam4_cut6.csv");
  REQUIRE(golden.good());
  std::vector<std::string> expect;
  for (std::string l; std::getline(golden, l);) expect.push_back(l);
  REQUIRE(rows.size() == expect.size());
  CHECK(rows[0] == expect[0]);
  // Timing columns vary; step,n,m,k are fixed by the algorithm.
  auto key = [](const std::string& row) {
    std::string out;
    int commas = 0;
    for (char c : row) {
      if (c == ',' && ++commas == 4) break;
      out += c;
    }
    return out;
  };
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(key(rows[i]) == key(expect[i]));
}

TEST_CASE("summary statistics") {
  std::vector<StepRecord> r(2);
  r[0].total_us = 10;
  r[0].oracle_us = 100;
  r[0].oracle_diff = 1e-12;
  r[0].rel_residual = 1e-13;
  r[1].total_us = 30;
  r[1].oracle_us = 30 * 4;
  r[1].oracle_diff = 2e-12;
  r[1].rel_residual = 3e-13;
  const bench::Summary s = bench::summarize(r);
  CHECK(s.mean_us == 20.0);
  CHECK(s.min_us == 10.0);
  CHECK(s.max_us == 30.0);
  CHECK(s.geo_speedup == doctest::Approx(std::sqrt(40.0)));
  CHECK(s.worst_residual == 3e-13);
  CHECK(s.worst_diff == 2e-12);
}
