#include "bench_runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>

namespace amps::bench {

Mesh load_mesh(const std::string& spec) {
  if (std::filesystem::is_regular_file(spec)) return read_mesh(spec);
  return generate_from_spec(spec);
}

ExperimentScript make_script(const Mesh& mesh, const BenchConfig& config) {
  if (!config.script_path.empty()) return read_script(config.script_path);
  if (config.experiment == "cut") return cutting_script(mesh, config.steps);
  if (config.experiment == "deform")
    return deformation_script(mesh, config.steps < 0 ? 50 : config.steps,
                              Point(0.0, config.displacement, 0.0));
  throw std::invalid_argument("unknown experiment '" + config.experiment + "'");
}

Summary summarize(const std::vector<StepRecord>& records) {
  Summary s;
  s.steps = static_cast<index_t>(records.size());
  if (records.empty()) return s;
  s.min_us = records.front().total_us;
  double log_sum = 0.0;
  index_t compared = 0;
  for (const StepRecord& r : records) {
    s.mean_us += r.total_us;
    s.min_us = std::min(s.min_us, r.total_us);
    s.max_us = std::max(s.max_us, r.total_us);
    s.worst_residual = std::max(s.worst_residual, r.rel_residual);
    if (r.oracle_diff >= 0.0) {
      s.worst_diff = std::max(s.worst_diff, r.oracle_diff);
      if (r.total_us > 0.0 && r.oracle_us > 0.0) {
        log_sum += std::log(r.oracle_us / r.total_us);
        ++compared;
      }
    }
  }
  s.mean_us /= static_cast<double>(records.size());
  if (compared > 0) s.geo_speedup = std::exp(log_sum / static_cast<double>(compared));
  return s;
}

namespace {

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

RunOptions make_options(const BenchConfig& config) {
  RunOptions opt;
  opt.solver = parse_solver_kind(config.solver);
  opt.threads = resolve_threads(config.threads);
  opt.cg_abs_tol = config.cg_tol;
  if (config.cg_precond == "jacobi")
    opt.cg_precond = Preconditioner::jacobi;
  else if (config.cg_precond == "none")
    opt.cg_precond = Preconditioner::none;
  else
    throw std::invalid_argument("unknown preconditioner '" + config.cg_precond + "'");
  opt.pull_both_copies = config.pull_both_copies;
  return opt;
}

RunResult run_guarded(const Mesh& mesh, const ExperimentScript& script,
                      const RunOptions& opt) {
  index_t done = 0;
  try {
    return run_script(mesh, script, opt,
                      [&](const StepRecord&, const AmpsSolver*, const SparseMatrix&) {
                        ++done;
                      });
  } catch (const std::logic_error&) {
    throw;
  } catch (const std::exception& e) {
    throw StepFailure(done, e.what());
  }
}

}  // namespace

int run_bench(const BenchConfig& config, std::ostream& log) {
  if (config.reps < 1) throw std::invalid_argument("--reps must be >= 1");
  const Mesh mesh = load_mesh(config.mesh);
  const ExperimentScript script = make_script(mesh, config);
  RunOptions opt = make_options(config);

  std::vector<StepRecord> mean;
  RunResult last;
  int counted = 0;
  for (int rep = 0; rep < config.reps; ++rep) {
    const bool final_rep = rep + 1 == config.reps;
    opt.compare_oracle = config.compare_oracle && final_rep;
    opt.keep_solutions = final_rep && config.check_threads > 0;
    opt.warn_skips = rep == 0;
    RunResult run = run_guarded(mesh, script, opt);
    if (rep == 0) mean = run.records;
    const bool warm_up = rep == 0 && config.reps > 1;
    if (!warm_up) {
      if (counted == 0) {
        for (std::size_t i = 0; i < mean.size(); ++i) {
          mean[i].timings = {};
          mean[i].total_us = 0.0;
        }
      }
      ++counted;
      for (std::size_t i = 0; i < mean.size() && i < run.records.size(); ++i) {
        StepTimings& t = mean[i].timings;
        const StepTimings& r = run.records[i].timings;
        t.memo_us += r.memo_us;
        t.s2_us += r.s2_us;
        t.rhs_us += r.rhs_us;
        t.a2_us += r.a2_us;
        t.ahat_us += r.ahat_us;
        mean[i].total_us += run.records[i].total_us;
      }
    }
    if (final_rep) last = std::move(run);
  }
  for (std::size_t i = 0; i < mean.size() && i < last.records.size(); ++i) {
    StepTimings& t = mean[i].timings;
    const double c = counted;
    t = {t.memo_us / c, t.s2_us / c, t.rhs_us / c, t.a2_us / c, t.ahat_us / c};
    mean[i].total_us /= c;
    mean[i].rel_residual = last.records[i].rel_residual;
    mean[i].oracle_diff = last.records[i].oracle_diff;
    mean[i].oracle_us = last.records[i].oracle_us;
  }

  if (!config.out_path.empty()) {
    std::ofstream out(config.out_path);
    if (!out) throw std::runtime_error("cannot write '" + config.out_path + "'");
    write_records_csv(out, mean, config.compare_oracle);
  }
  if (!config.breakdown_path.empty()) {
    std::ofstream out(config.breakdown_path);
    if (!out) throw std::runtime_error("cannot write '" + config.breakdown_path + "'");
    write_breakdown_csv(out, mean);
  }

  const Summary s = summarize(mean);
  log << std::setprecision(4) << "summary solver=" << config.solver
      << " mesh=" << config.mesh << " n=" << last.n << " steps=" << s.steps
      << " threads=" << opt.threads << " mean_us=" << s.mean_us
      << " min_us=" << s.min_us << " max_us=" << s.max_us;
  if (config.compare_oracle)
    log << " geomean_speedup=" << s.geo_speedup << " max_inf_diff=" << s.worst_diff;
  log << " worst_residual=" << s.worst_residual << '\n';

  if (config.check_threads > 0) {
    RunOptions other = opt;
    other.threads = config.check_threads;
    other.compare_oracle = false;
    other.keep_solutions = true;
    other.warn_skips = false;
    run_guarded(mesh, script, other);  // warm-up
    const RunResult alt = run_guarded(mesh, script, other);
    double worst = 0.0, log_sum = 0.0;
    index_t timed = 0;
    for (std::size_t i = 0; i < alt.records.size() && i < last.records.size(); ++i) {
      worst = std::max(worst, relative_inf_diff(alt.records[i].solution,
                                                last.records[i].solution));
      if (alt.records[i].total_us > 0.0 && mean[i].total_us > 0.0) {
        log_sum += std::log(mean[i].total_us / alt.records[i].total_us);
        ++timed;
      }
    }
    log << "threads " << opt.threads << " vs " << other.threads
        << ": max_inf_diff=" << worst << " geomean_speedup="
        << (timed ? std::exp(log_sum / static_cast<double>(timed)) : 0.0) << '\n';
  }
  return 0;
}

int run_verify(std::ostream& log, double tolerance) {
  int failures = 0;
  for (const std::string spec : {"beam:4", "brick:0"}) {
    const Mesh mesh = generate_from_spec(spec);
    struct Case {
      std::string name;
      ExperimentScript script;
      SolverKind solver;
      bool both;
    };
    const std::vector<Case> cases = {
        {"deform/amps", deformation_script(mesh, 50), SolverKind::amps, false},
        {"cut/amps", cutting_script(mesh), SolverKind::amps, false},
        {"cut/amps-alt", cutting_script(mesh), SolverKind::amps_alt, false},
        {"cut/amps-general-rhs", cutting_script(mesh), SolverKind::amps, true},
    };
    for (const Case& c : cases) {
      RunOptions opt;
      opt.solver = c.solver;
      opt.compare_oracle = true;
      opt.pull_both_copies = c.both;
      opt.warn_skips = false;
      double worst = 0.0, residual = 0.0;
      index_t steps = 0;
      bool ok = true;
      try {
        const RunResult r = run_script(mesh, c.script, opt);
        for (const StepRecord& rec : r.records) {
          worst = std::max(worst, rec.oracle_diff);
          residual = std::max(residual, rec.rel_residual);
        }
        steps = static_cast<index_t>(r.records.size());
        ok = steps > 0 && worst <= tolerance;
      } catch (const std::exception& e) {
        log << "  error: " << e.what() << '\n';
        ok = false;
      }
      log << (ok ? "PASS " : "FAIL ") << spec << ' ' << c.name << " steps=" << steps
          << " max_inf_diff=" << std::scientific << std::setprecision(3) << worst
          << " worst_residual=" << residual << std::defaultfloat << '\n';
      failures += ok ? 0 : 1;
    }
  }
  return failures;
}

}  // namespace amps::bench
