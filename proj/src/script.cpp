#include "amps/cutting.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "amps/timer.hpp"

namespace amps {

ExperimentScript parse_script(std::istream& in) {
  ExperimentScript script;
  std::string line;
  index_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream is(line);
    std::string word;
    if (!(is >> word)) continue;
    auto fail = [&](const std::string& why) {
      throw ParseError("script line " + std::to_string(lineno) + ": " + why);
    };
    ScriptAction a;
    if (word == "cut") {
      std::string kw_plane, kw_steps;
      a.kind = ScriptAction::Kind::cut;
      if (!(is >> kw_plane >> a.plane.normal.x() >> a.plane.normal.y() >>
            a.plane.normal.z() >> a.plane.offset >> kw_steps >> a.steps) ||
          kw_plane != "plane" || kw_steps != "steps")
        fail("expected 'cut plane nx ny nz d steps S'");
      const double len = a.plane.normal.norm();
      if (len == 0.0) fail("zero plane normal");
      a.plane.normal /= len;
      a.plane.offset /= len;
      if (a.steps < 0) fail("negative step count");
    } else if (word == "constrain" || word == "force") {
      a.kind = word == "force" ? ScriptAction::Kind::force
                               : ScriptAction::Kind::constrain;
      if (!(is >> a.vertex >> a.value.x() >> a.value.y() >> a.value.z()))
        fail("expected '" + word + " v x y z'");
      if (a.vertex < 0) fail("negative vertex id");
    } else {
      fail("unknown action '" + word + "'");
    }
    if (is >> word) fail("trailing tokens");
    script.actions.push_back(a);
  }
  return script;
}

ExperimentScript read_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open script '" + path + "'");
  return parse_script(in);
}

void write_script(std::ostream& out, const ExperimentScript& script) {
  const auto old_precision = out.precision(17);
  for (const ScriptAction& a : script.actions) {
    switch (a.kind) {
      case ScriptAction::Kind::cut:
        out << "cut plane " << a.plane.normal.x() << ' ' << a.plane.normal.y()
            << ' ' << a.plane.normal.z() << ' ' << a.plane.offset << " steps "
            << a.steps << '\n';
        break;
      case ScriptAction::Kind::constrain:
      case ScriptAction::Kind::force:
        out << (a.kind == ScriptAction::Kind::force ? "force " : "constrain ")
            << a.vertex << ' ' << a.value.x() << ' ' << a.value.y() << ' '
            << a.value.z() << '\n';
        break;
    }
  }
  out.precision(old_precision);
}

SolverKind parse_solver_kind(const std::string& name) {
  if (name == "amps") return SolverKind::amps;
  if (name == "amps-alt" || name == "amps_alt") return SolverKind::amps_alt;
  if (name == "cg") return SolverKind::cg;
  if (name == "oracle" || name == "refactor") return SolverKind::oracle;
  throw std::invalid_argument("unknown solver '" + name + "'");
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::amps: return "amps";
    case SolverKind::amps_alt: return "amps-alt";
    case SolverKind::cg: return "cg";
    case SolverKind::oracle: return "oracle";
  }
  return "?";
}

namespace {

bool is_amps(SolverKind k) {
  return k == SolverKind::amps || k == SolverKind::amps_alt;
}

void add_point_load(Vector& f, const DofMap& dofs, index_t vertex,
                    const Point& load) {
  for (int axis = 0; axis < 3; ++axis) {
    const index_t d = dofs.free_dof(vertex, axis);
    if (d >= 0) f[d] += load[axis];
  }
}

/// K with the rows and columns of `fixed` replaced by the identity.
SparseMatrix eliminate_rows(const SparseMatrix& k, const std::vector<char>& fixed) {
  SparseMatrix out;
  out.nrows = k.nrows;
  out.ncols = k.ncols;
  out.col_ptr.assign(k.ncols + 1, 0);
  out.row_idx.reserve(k.row_idx.size());
  out.values.reserve(k.values.size());
  for (index_t j = 0; j < k.ncols; ++j) {
    if (fixed[j]) {
      out.row_idx.push_back(j);
      out.values.push_back(1.0);
    } else {
      for (index_t q = k.col_ptr[j]; q < k.col_ptr[j + 1]; ++q) {
        if (fixed[k.row_idx[q]]) continue;
        out.row_idx.push_back(k.row_idx[q]);
        out.values.push_back(k.values[q]);
      }
    }
    out.col_ptr[j + 1] = static_cast<index_t>(out.row_idx.size());
  }
  return out;
}

struct BaselineOutcome {
  Vector solution;
  double us = 0.0;
  index_t iterations = 0;
  bool converged = true;
};

BaselineOutcome run_baseline(SolverKind kind, const SparseMatrix& k_hat,
                             const Vector& f_hat, const RunOptions& opt) {
  BaselineOutcome out;
  if (kind == SolverKind::cg) {
    CgResult r = cg_solve(k_hat, f_hat, opt.cg_abs_tol, opt.cg_precond,
                          opt.cg_max_iterations);
    out.solution = std::move(r.solution);
    out.us = r.report.wall_us;
    out.iterations = r.report.iterations;
    out.converged = r.report.converged;
  } else {
    Stopwatch clock;
    out.solution = refactorize_solve(k_hat, f_hat);
    out.us = clock.elapsed_us();
  }
  return out;
}

void finish_record(StepRecord& rec, const SparseMatrix& k_hat, const Vector& f_hat,
                   const Vector& solution, const RunOptions& opt) {
  rec.rel_residual = relative_residual(k_hat, solution, f_hat);
  const index_t stride = std::max<index_t>(opt.oracle_stride, 1);
  if (opt.compare_oracle && rec.step % stride == 0) {
    if (opt.solver == SolverKind::oracle) {
      rec.oracle_diff = 0.0;
      rec.oracle_us = rec.total_us;
    } else {
      Stopwatch clock;
      const Vector ref = refactorize_solve(k_hat, f_hat);
      rec.oracle_us = clock.elapsed_us();
      rec.oracle_diff = relative_inf_diff(solution, ref);
    }
  }
}

struct MemoGuard {
  bool armed = false;
  index_t prefix = 0;
  std::uint64_t checksum = 0;

  /// Checks that the previously stored prefix is unchanged, then records the
  /// current memo as the new reference.
  bool check_and_advance(const AmpsSolver& s) {
    const bool ok = !armed || s.memo_checksum(prefix) == checksum;
    armed = true;
    prefix = s.m();
    checksum = s.memo_checksum(prefix);
    return ok;
  }
};

RunResult run_cut(const Mesh& mesh0, const ExperimentScript& script,
                  const RunOptions& opt, const StepObserver& observer) {
  RunResult result;
  const AssembledSystem sys0 = assemble_stiffness(mesh0);
  const index_t n0 = sys0.dofs.num_free();
  result.n = n0;
  Vector f0 = body_force(mesh0, sys0.dofs, opt.gravity);
  // Point loads given before the first cut become part of the original load.
  std::size_t first = 0;
  for (; first < script.actions.size() &&
         script.actions[first].kind == ScriptAction::Kind::force;
       ++first)
    add_point_load(f0, sys0.dofs, script.actions[first].vertex,
                   script.actions[first].value);

  std::optional<AmpsSolver> solver;
  if (is_amps(opt.solver)) {
    AmpsOptions ao;
    ao.threads = opt.threads;
    Stopwatch clock;
    if (opt.factors)
      solver.emplace(sys0.k, opt.factors, f0, ao);
    else
      solver.emplace(sys0.k, f0, ao);
    result.init_us = clock.elapsed_us();
    result.nnz_l = solver->factors().nnz_l();
  }

  Mesh mesh = mesh0;
  Vector f_hat = f0;              // current load, extended numbering
  MemoGuard guard;
  index_t step = 0;
  for (std::size_t ai = first; ai < script.actions.size(); ++ai) {
    const ScriptAction& action = script.actions[ai];
    if (action.kind == ScriptAction::Kind::force) {
      if (action.vertex >= mesh.num_vertices())
        throw std::out_of_range("force on unknown vertex");
      add_point_load(f_hat, DofMap(mesh), action.vertex, action.value);
      continue;
    }
    const std::vector<index_t> path =
        cut_path(mesh, action.plane, mesh0.num_vertices());
    const index_t steps = std::min<index_t>(action.steps, path.size());
    for (index_t s = 0; s < steps; ++s, ++step) {
      CutResult cut = advance_cut(mesh, action.plane, path[s], step);
      if (cut.event.skipped_fixed && opt.warn_skips)
        std::cerr << "warning: step " << step << ": vertex " << path[s]
                  << " is constrained, skipped\n";
      StiffnessDelta delta;
      if (cut.event.new_vertex >= 0)
        delta = local_stiffness_diff(mesh, cut.mesh, cut.event.affected_elements);
      mesh = std::move(cut.mesh);
      const DofMap dofs(mesh);
      f_hat.resize(dofs.num_free(), 0.0);
      if (cut.event.new_vertex >= 0) {
        for (int axis = 0; axis < 3; ++axis) {
          const index_t dn = dofs.free_dof(cut.event.new_vertex, axis);
          const index_t dd = dofs.free_dof(cut.event.duplicated_vertex, axis);
          if (dn >= 0) f_hat[dn] += opt.pull_force * action.plane.normal[axis];
          if (opt.pull_both_copies && dd >= 0)
            f_hat[dd] -= opt.pull_force * action.plane.normal[axis];
        }
      }

      StepRecord rec;
      rec.step = step;
      rec.n = n0;
      rec.order = dofs.num_free();
      rec.duplicated_nodes = mesh.num_vertices() - mesh0.num_vertices();
      const SparseMatrix k_hat = assemble_stiffness(mesh).k;
      Vector solution;

      if (solver) {
        UpdateRequest req;
        for (index_t d : delta.existing_dofs)
          if (d < n0 && !solver->replaced().contains(d))
            req.new_replaced_dofs.push_back(d);
        req.new_dof_count = delta.new_dof_count;
        req.delta_dofs = delta.dofs;
        req.delta = delta.e;
        cut.event.new_replaced_dofs = req.new_replaced_dofs;
        rec.new_dofs_in_h = static_cast<index_t>(req.new_replaced_dofs.size()) +
                            req.new_dof_count;
        solver->apply(req);
        if (opt.solver == SolverKind::amps_alt) {
          solution = solver->solve_updated_alt(f_hat);
        } else {
          UpdateSolution us = solver->solve_updated(f_hat);
          solution = std::move(us.a_hat);
          rec.h_component_gap = us.h_component_gap;
        }
        rec.timings = solver->last_timings();
        rec.total_us = rec.timings.total_us();
        rec.m = solver->m();
        rec.k = solver->k();
        rec.memo_prefix_intact = guard.check_and_advance(*solver);
        if (opt.cross_check_alt &&
            std::equal(f0.begin(), f0.end(), f_hat.begin())) {
          const Vector other = opt.solver == SolverKind::amps_alt
                                   ? solver->solve_updated(f_hat).a_hat
                                   : solver->solve_updated_alt(f_hat);
          rec.alt_diff = relative_inf_diff(other, solution);
        }
      } else {
        BaselineOutcome b = run_baseline(opt.solver, k_hat, f_hat, opt);
        solution = std::move(b.solution);
        rec.total_us = b.us;
        rec.cg_iterations = b.iterations;
        rec.cg_converged = b.converged;
        rec.k = rec.order - n0;
      }
      finish_record(rec, k_hat, f_hat, solution, opt);
      if (observer) observer(rec, solver ? &*solver : nullptr, k_hat);
      if (opt.keep_solutions) rec.solution = std::move(solution);
      result.records.push_back(std::move(rec));
      if (opt.stop_on_cg_failure && !result.records.back().cg_converged) {
        result.final_mesh = mesh;
        return result;
      }
    }
  }
  result.final_mesh = std::move(mesh);
  return result;
}

RunResult run_deform(const Mesh& mesh0, const ExperimentScript& script,
                     const RunOptions& opt, const StepObserver& observer) {
  if (opt.solver == SolverKind::amps_alt)
    throw std::invalid_argument(
        "the alternative formulation does not apply to prescribed displacements");
  RunResult result;
  const AssembledSystem sys = assemble_stiffness(mesh0);
  const index_t n = sys.dofs.num_free();
  result.n = n;
  Vector f = body_force(mesh0, sys.dofs, opt.gravity);

  std::optional<AmpsSolver> solver;
  if (opt.solver == SolverKind::amps) {
    AmpsOptions ao;
    ao.threads = opt.threads;
    Stopwatch clock;
    if (opt.factors)
      solver.emplace(sys.k, opt.factors, f, ao);
    else
      solver.emplace(sys.k, f, ao);
    result.init_us = clock.elapsed_us();
    result.nnz_l = solver->factors().nnz_l();
  }

  std::vector<char> fixed(n, 0);
  std::vector<index_t> held;      // baseline copy of H
  Vector prescribed;             // ordered as H
  MemoGuard guard;
  index_t step = 0;
  for (const ScriptAction& action : script.actions) {
    if (action.vertex >= mesh0.num_vertices())
      throw std::out_of_range("script refers to unknown vertex " +
                              std::to_string(action.vertex));
    if (action.kind == ScriptAction::Kind::force) {
      add_point_load(f, sys.dofs, action.vertex, action.value);
      continue;
    }
    std::vector<index_t> added;
    for (int axis = 0; axis < 3; ++axis) {
      const index_t d = sys.dofs.free_dof(action.vertex, axis);
      if (d < 0 || fixed[d]) continue;
      fixed[d] = 1;
      added.push_back(d);
      held.push_back(d);
      prescribed.push_back(action.value[axis]);
    }
    if (added.empty() && opt.warn_skips)
      std::cerr << "warning: step " << step << ": vertex " << action.vertex
                << " has no free DOF left, constraint ignored\n";

    // Equivalent reduced system of order n: identity rows on H.
    const SparseMatrix k_hat = eliminate_rows(sys.k, fixed);
    Vector u_h(n, 0.0);
    for (std::size_t p = 0; p < held.size(); ++p) u_h[held[p]] = prescribed[p];
    Vector f_hat = f;
    {
      const Vector ku = spmv(sys.k, u_h);
      for (index_t i = 0; i < n; ++i) f_hat[i] = fixed[i] ? u_h[i] : f[i] - ku[i];
    }

    StepRecord rec;
    rec.step = step;
    rec.n = n;
    rec.order = n;
    rec.new_dofs_in_h = static_cast<index_t>(added.size());
    Vector solution;
    if (solver) {
      solver->extend_memo(added);
      DirichletSolution ds = solver->impose_dirichlet(prescribed, f);
      solution = std::move(ds.displacement);
      rec.timings = solver->last_timings();
      rec.total_us = rec.timings.total_us();
      rec.m = solver->m();
      rec.h_component_gap = ds.max_h_residue;
      rec.memo_prefix_intact = guard.check_and_advance(*solver);
    } else {
      BaselineOutcome b = run_baseline(opt.solver, k_hat, f_hat, opt);
      solution = std::move(b.solution);
      rec.total_us = b.us;
      rec.cg_iterations = b.iterations;
      rec.cg_converged = b.converged;
      rec.m = static_cast<index_t>(held.size());
    }
    finish_record(rec, k_hat, f_hat, solution, opt);
    if (observer) observer(rec, solver ? &*solver : nullptr, k_hat);
    if (opt.keep_solutions) rec.solution = std::move(solution);
    result.records.push_back(std::move(rec));
    ++step;
    if (opt.stop_on_cg_failure && !result.records.back().cg_converged) break;
  }
  result.final_mesh = mesh0;
  return result;
}

}  // namespace

RunResult run_script(const Mesh& mesh, const ExperimentScript& script,
                     const RunOptions& options, const StepObserver& observer) {
  bool has_cut = false, has_constrain = false;
  for (const ScriptAction& a : script.actions) {
    has_cut |= a.kind == ScriptAction::Kind::cut;
    has_constrain |= a.kind == ScriptAction::Kind::constrain;
  }
  if (has_cut && has_constrain)
    throw std::invalid_argument(
        "a script may either cut or constrain nodes, not both");
  if (options.solver == SolverKind::amps_alt && options.pull_both_copies)
    throw std::invalid_argument(
        "the alternative formulation needs the original load left unchanged");
  return has_constrain ? run_deform(mesh, script, options, observer)
                       : run_cut(mesh, script, options, observer);
}

void write_records_csv(std::ostream& out, const std::vector<StepRecord>& records,
                       bool include_diff) {
  out << "step,n,m,k,t_memo_us,t_s2_us,t_rhs_us,t_a2_us,t_ahat_us,t_total_us,"
         "rel_residual";
  if (include_diff) out << ",max_inf_diff";
  out << '\n';
  const auto old_precision = out.precision(6);
  for (const StepRecord& r : records) {
    out << r.step << ',' << r.n << ',' << r.m << ',' << r.k << ','
        << r.timings.memo_us << ',' << r.timings.s2_us << ',' << r.timings.rhs_us
        << ',' << r.timings.a2_us << ',' << r.timings.ahat_us << ',' << r.total_us
        << ',' << r.rel_residual;
    if (include_diff) out << ',' << r.oracle_diff;
    out << '\n';
  }
  out.precision(old_precision);
}

void write_breakdown_csv(std::ostream& out, const std::vector<StepRecord>& records) {
  out << "step,memo,s2,rhs,a2,ahat\n";
  const auto old_precision = out.precision(4);
  for (const StepRecord& r : records) {
    const StepTimings& t = r.timings;
    const double total = t.total_us();
    auto share = [&](double x) { return total > 0.0 ? x / total : 0.0; };
    out << r.step << ',' << share(t.memo_us) << ',' << share(t.s2_us) << ','
        << share(t.rhs_us) << ',' << share(t.a2_us) << ',' << share(t.ahat_us)
        << '\n';
  }
  out.precision(old_precision);
}

}  // namespace amps
