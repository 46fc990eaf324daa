#pragma once

#include <iosfwd>
#include <string>

#include "amps/cutting.hpp"

namespace amps::bench {

struct BenchConfig {
  std::string mesh = "beam:4";  // beam:H, brick:L or a mesh file
  std::string experiment = "cut";
  std::string solver = "amps";
  std::string script_path;       // overrides the generated script
  int reps = 20;
  int threads = 0;               // 0: available parallelism
  int check_threads = -1;        // rerun with this many threads and compare
  index_t steps = -1;            // cut: whole path, deform: 50
  std::string out_path;
  std::string breakdown_path;
  bool compare_oracle = false;
  bool pull_both_copies = false;
  double cg_tol = 1e-8;
  std::string cg_precond = "jacobi";
  double displacement = -0.01;
};

struct Summary {
  index_t steps = 0;
  double mean_us = 0.0;
  double min_us = 0.0;
  double max_us = 0.0;
  double geo_speedup = 0.0;  // vs refactorization, 0 when not compared
  double worst_residual = 0.0;
  double worst_diff = -1.0;
};

class StepFailure : public std::runtime_error {
 public:
  StepFailure(index_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  index_t step() const { return step_; }

 private:
  index_t step_;
};

Mesh load_mesh(const std::string& spec);
ExperimentScript make_script(const Mesh& mesh, const BenchConfig& config);

/// Runs the configured experiment `reps` times; the first run is a warm-up
/// and is left out of the timing means when reps > 1. Step failures are
/// rethrown as StepFailure.
int run_bench(const BenchConfig& config, std::ostream& log);

/// Oracle equivalence on beam:4 and brick:0, both experiments, both AMPS
/// formulations. Returns the number of failed checks.
int run_verify(std::ostream& log, double tolerance = 1e-8);

Summary summarize(const std::vector<StepRecord>& records);

}  // namespace amps::bench
