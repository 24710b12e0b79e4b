// Command-line front end: mesh generation/checking, single runs, ensembles,
// coupled convergence studies, and config validation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sacfv/sacfv.hpp"

namespace fs = std::filesystem;
using namespace sacfv;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitSolver = 2;
constexpr int kExitIo = 3;

struct CommonArgs {
  std::string config_path;
  int threads = 0;  // 0 = default
  std::string out_override;
};

Config load(const CommonArgs& args) {
  Config cfg = load_config(args.config_path);
  if (!args.out_override.empty()) cfg.output_dir = args.out_override;
  return cfg;
}

int resolve_threads(const CommonArgs& args) {
  return args.threads > 0 ? args.threads : default_thread_count();
}

/// Model validation + mesh admissibility; prints both reports.
bool preflight(const Config& cfg, const Mesh& mesh, const ModelSpec& spec) {
  const AdmissibilityReport mesh_report = check_admissibility(mesh);
  std::cout << "mesh: " << mesh_report.summary();
  const ValidationReport model_report = validate(spec, cfg.extents, cfg.dim);
  std::cout << "model: " << model_report.summary();
  return mesh_report.pass && model_report.pass;
}

int cmd_mesh(int dim, std::vector<double> extents, std::vector<int> res,
             const std::string& out, const std::string& check_file) {
  if (!check_file.empty()) {
    const Mesh mesh = read_mesh(check_file);
    const AdmissibilityReport report = check_admissibility(mesh);
    std::cout << report.summary();
    return report.pass ? kExitOk : kExitValidation;
  }
  if (extents.empty() || res.empty())
    throw validation_error("mesh: --extents and --res are required unless --check is given");
  if (dim == 0) dim = static_cast<int>(extents.size());
  const Mesh mesh = build_uniform_grid(dim, extents, res);
  const AdmissibilityReport report = check_admissibility(mesh);
  std::cout << mesh.n_cells() << " cells, " << mesh.interior_edges().size()
            << " interior edges, " << mesh.exterior_edges().size() << " exterior edges\n"
            << "h = " << format_real(mesh.h()) << ", reg = " << format_real(mesh.regularity())
            << ", hash = " << format_hash(mesh.hash()) << "\n"
            << report.summary();
  if (!out.empty()) write_mesh(mesh, out);
  return report.pass ? kExitOk : kExitValidation;
}

int cmd_run(const CommonArgs& args) {
  const WallClock clock;
  const Config cfg = load(args);
  const Mesh mesh = cfg.build_mesh();
  const ModelSpec spec = cfg.build_model();
  if (!preflight(cfg, mesh, spec)) return kExitValidation;
  const Config::TimeGrid tg = cfg.resolve_time_grid();

  const BrownianPath path = sample_path(cfg.seed, 0, tg.steps, tg.dt);
  const SingleRun run = run_single(mesh, spec, path, cfg.solver);

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_spacetime(run.trajectory, dir / "frames", cfg.seed, 0);
  write_path(path, dir / "path.txt");
  write_per_sample_csv(dir / "diagnostics.csv", 0, {run.diag});
  const EnsembleStats stats = ensemble_reduce({run.diag});
  write_energy_csv(dir / "energy.csv", stats, tg.dt);
  SolverSummary solver;
  solver.add_all(run.reports);
  write_run_manifest(dir / "manifest.json", "run", cfg.raw, {format_hash(mesh.hash())},
                     cfg.seed, 1, clock.seconds(), solver);
  std::cout << "run complete: " << tg.steps << " steps, dt = " << format_real(tg.dt)
            << ", epsilon = " << format_real(tg.epsilon) << "\n";
  return kExitOk;
}

int cmd_ensemble(const CommonArgs& args) {
  const WallClock clock;
  const Config cfg = load(args);
  const Mesh mesh = cfg.build_mesh();
  const ModelSpec spec = cfg.build_model();
  if (!preflight(cfg, mesh, spec)) return kExitValidation;
  const Config::TimeGrid tg = cfg.resolve_time_grid();

  const EnsembleRun run = run_ensemble(mesh, spec, tg.steps, tg.dt, cfg.seed, cfg.samples,
                                       cfg.solver, resolve_threads(args));

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_per_sample_csv(dir / "per_sample.csv", 0, run.per_sample);
  write_summary_csv(dir / "summary.csv", run.stats);
  write_energy_csv(dir / "energy_mean.csv", run.stats, tg.dt);

  const double f_norm = l2_norm_spacetime(spec.f, cfg.extents, cfg.dim, spec.horizon);
  const BoundReport bound =
      check_gronwall_bound(run.stats, spec, run.u0norm_sq, f_norm * f_norm);
  write_text(dir / "gronwall.txt", bound.summary() + "\n");
  write_run_manifest(dir / "manifest.json", "ensemble", cfg.raw, {format_hash(mesh.hash())},
                     cfg.seed, cfg.samples, clock.seconds(), run.solver);
  std::cout << bound.summary() << "\n";
  return kExitOk;
}

int cmd_converge(const CommonArgs& args) {
  const WallClock clock;
  const Config cfg = load(args);
  if (cfg.study_levels < 3)
    throw validation_error("converge: study.levels must be >= 3");
  if (cfg.steps < 1)
    throw validation_error("converge: time.steps must give the base step count");
  const Mesh base_mesh = cfg.build_mesh();
  const ModelSpec spec = cfg.build_model();
  if (!preflight(cfg, base_mesh, spec)) return kExitValidation;

  const CouplingSchedule schedule = build_schedule(spec, cfg.study_levels, cfg.resolution,
                                                   cfg.steps, cfg.dim, cfg.study_kappa);
  const ConvergeRun run = run_converge(spec, schedule, cfg.dim, cfg.extents, cfg.seed,
                                       cfg.samples, cfg.solver, resolve_threads(args));

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  std::vector<std::string> hashes;
  nlohmann::json study = nlohmann::json::array();
  for (std::size_t m = 0; m < run.levels.size(); ++m) {
    const auto& lvl = run.levels[m];
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "level_%zu", m);
    write_per_sample_csv(dir / (std::string(prefix) + "_per_sample.csv"),
                         static_cast<int>(m), lvl.per_sample);
    write_summary_csv(dir / (std::string(prefix) + "_summary.csv"), lvl.stats);
    hashes.push_back(format_hash(lvl.mesh_hash));
    study.push_back({{"level", m},
                     {"epsilon", lvl.sched.epsilon},
                     {"dt", lvl.sched.dt},
                     {"n_steps", lvl.sched.n_steps},
                     {"h", lvl.h},
                     {"resolution", lvl.sched.resolution}});
  }
  write_convergence_csv(dir / "convergence.csv", run, cfg.theta);
  write_text(dir / "constraint_decay.txt", run.decay.summary() + "\n");
  write_run_manifest(dir / "manifest.json", "converge", cfg.raw, hashes, cfg.seed,
                     cfg.samples, clock.seconds(), run.solver, study);
  std::cout << "convergence study complete: " << run.levels.size() << " levels\n"
            << run.decay.summary() << "\n";
  return kExitOk;
}

int cmd_check(const CommonArgs& args) {
  const Config cfg = load(args);
  const Mesh mesh = cfg.build_mesh();
  const ModelSpec spec = cfg.build_model();
  const bool ok = preflight(cfg, mesh, spec);
  const Config::TimeGrid tg = cfg.resolve_time_grid();
  std::cout << "time grid: N = " << tg.steps << ", dt = " << format_real(tg.dt)
            << ", epsilon = " << format_real(tg.epsilon) << "\n";
  return ok ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-volume solver for the constrained stochastic Allen-Cahn equation"};
  app.require_subcommand(1);

  CommonArgs common;
  int mesh_dim = 0;
  std::vector<double> mesh_extents;
  std::vector<int> mesh_res;
  std::string mesh_out, mesh_check;

  auto add_common = [&](CLI::App* sub, bool with_threads) {
    sub->add_option("--config", common.config_path, "configuration file (JSON)")
        ->required();
    if (with_threads)
      sub->add_option("--threads", common.threads, "worker thread count");
    sub->add_option("--out", common.out_override, "override output.dir");
  };

  CLI::App* mesh_cmd = app.add_subcommand("mesh", "generate or check a mesh");
  mesh_cmd->add_option("--dim", mesh_dim, "spatial dimension (2 or 3)");
  mesh_cmd->add_option("--extents", mesh_extents, "domain extents per axis")
      ->delimiter(',');
  mesh_cmd->add_option("--res", mesh_res, "cells per axis")->delimiter(',');
  mesh_cmd->add_option("--out", mesh_out, "write the mesh file here");
  mesh_cmd->add_option("--check", mesh_check, "check an existing mesh file");

  CLI::App* run_cmd = app.add_subcommand("run", "single-path run");
  add_common(run_cmd, false);
  CLI::App* ens_cmd = app.add_subcommand("ensemble", "Monte Carlo ensemble");
  add_common(ens_cmd, true);
  CLI::App* conv_cmd = app.add_subcommand("converge", "coupled convergence study");
  add_common(conv_cmd, true);
  CLI::App* check_cmd = app.add_subcommand("check", "validate a configuration");
  add_common(check_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (mesh_cmd->parsed())
      return cmd_mesh(mesh_dim, mesh_extents, mesh_res, mesh_out, mesh_check);
    if (run_cmd->parsed()) return cmd_run(common);
    if (ens_cmd->parsed()) return cmd_ensemble(common);
    if (conv_cmd->parsed()) return cmd_converge(common);
    if (check_cmd->parsed()) return cmd_check(common);
  } catch (const non_convergence_error& e) {
    std::cerr << "solver failure at step " << e.step_index << ": " << e.what() << "\n";
    return kExitSolver;
  } catch (const linear_solve_error& e) {
    std::cerr << "linear solve failure at step " << e.step_index << ": " << e.what()
              << "\n";
    return kExitSolver;
  } catch (const non_finite_error& e) {
    std::cerr << "non-finite value at step " << e.step_index << ": " << e.what() << "\n";
    return kExitSolver;
  } catch (const io_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const validation_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
