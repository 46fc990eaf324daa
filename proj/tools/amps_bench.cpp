#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "bench_runner.hpp"

using namespace amps;

int main(int argc, char** argv) {
  CLI::App app{"AMPS update solver benchmark harness"};
  app.require_subcommand(1);

  std::string gen_spec, gen_path;
  auto* gen = app.add_subcommand("gen", "Generate a mesh file");
  gen->add_option("spec", gen_spec, "beam:H or brick:L")->required();
  gen->add_option("path", gen_path, "Output mesh file")->required();

  bench::BenchConfig cfg;
  std::string write_script_path;
  auto* run = app.add_subcommand("bench", "Run a scripted experiment");
  run->add_option("--mesh", cfg.mesh, "beam:H, brick:L or a mesh file")
      ->capture_default_str();
  run->add_option("--experiment", cfg.experiment, "deform or cut")
      ->check(CLI::IsMember({"deform", "cut"}))
      ->capture_default_str();
  run->add_option("--solver", cfg.solver, "amps, amps-alt, cg or oracle")
      ->check(CLI::IsMember({"amps", "amps-alt", "cg", "oracle"}))
      ->capture_default_str();
  run->add_option("--script", cfg.script_path, "Experiment script file");
  run->add_option("--write-script", write_script_path,
                  "Write the generated script and exit");
  run->add_option("--reps", cfg.reps, "Repetitions; the first is a warm-up")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--threads", cfg.threads, "Worker threads (default: all)")
      ->check(CLI::PositiveNumber);
  run->add_option("--check-threads", cfg.check_threads,
                  "Rerun with this many threads and compare solutions")
      ->check(CLI::PositiveNumber);
  run->add_option("--steps", cfg.steps,
                  "Cut steps (default: whole path) or nodes to constrain (default 50)");
  run->add_option("--out", cfg.out_path, "Per-step CSV");
  run->add_option("--breakdown", cfg.breakdown_path, "Per-step phase shares CSV");
  std::string compare;
  run->add_option("--compare", compare, "Compare with a reference solver")
      ->check(CLI::IsMember({"oracle"}));
  run->add_flag("--pull-both", cfg.pull_both_copies,
                "Also push the original copy of each cut node");
  run->add_option("--cg-tol", cfg.cg_tol, "CG absolute residual tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--cg-precond", cfg.cg_precond, "jacobi or none")
      ->check(CLI::IsMember({"jacobi", "none"}))
      ->capture_default_str();
  run->add_option("--displacement", cfg.displacement,
                  "Prescribed y displacement in deform scripts")
      ->capture_default_str();

  double tol = 1e-8;
  auto* verify = app.add_subcommand("verify", "Oracle equivalence on small meshes");
  verify->add_option("--tol", tol, "Maximum relative inf-norm difference")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      write_mesh(gen_path, generate_from_spec(gen_spec));
      std::cout << "wrote " << gen_path << '\n';
      return 0;
    }
    if (*run) {
      cfg.compare_oracle = compare == "oracle";
      if (!write_script_path.empty()) {
        std::ofstream out(write_script_path);
        write_script(out, bench::make_script(bench::load_mesh(cfg.mesh), cfg));
        return out ? 0 : 1;
      }
      return bench::run_bench(cfg, std::cout);
    }
    if (*verify) return bench::run_verify(std::cout, tol) == 0 ? 0 : 1;
  } catch (const bench::StepFailure& e) {
    std::cerr << "solver failure at step " << e.step() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
