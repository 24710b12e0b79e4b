#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <exception>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sacfv/config.hpp"
#include "sacfv/diagnostics.hpp"
#include "sacfv/errors.hpp"
#include "sacfv/io.hpp"
#include "sacfv/model.hpp"
#include "sacfv/noise.hpp"
#include "sacfv/solver.hpp"

namespace sacfv {

inline constexpr const char* kVersion = "sac-fv 1.0.0";
inline constexpr const char* kThreadsEnvVar = "SACFV_THREADS";

/// SACFV_THREADS, else the hardware concurrency, clamped to [1, 256].
inline int default_thread_count() {
  if (const char* env = std::getenv(kThreadsEnvVar)) {
    const int v = std::atoi(env);
    if (v >= 1) return std::min(v, 256);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 256u));
}

namespace detail {

/// Runs fn(s) for s in [0, count) on `threads` workers pulling from an atomic
/// counter. The first exception is rethrown after all workers drain.
template <typename Fn>
void parallel_samples(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int s = 0; s < count; ++s) fn(s);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const int s = next.fetch_add(1, std::memory_order_relaxed);
      if (s >= count) return;
      try {
        fn(s);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Solver accounting
// ---------------------------------------------------------------------------

struct SolverSummary {
  long total_steps = 0;
  long total_newton_iters = 0;
  long total_linear_iters = 0;
  long damping_events = 0;
  int max_newton_iters = 0;
  double max_residual = 0.0;

  void add(const StepReport& r) {
    ++total_steps;
    total_newton_iters += r.newton_iters;
    total_linear_iters += r.linear_iters;
    damping_events += r.damping_events;
    max_newton_iters = std::max(max_newton_iters, r.newton_iters);
    max_residual = std::max(max_residual, r.residual);
  }

  void add_all(const std::vector<StepReport>& reports) {
    for (const auto& r : reports) add(r);
  }

  void merge(const SolverSummary& o) {
    total_steps += o.total_steps;
    total_newton_iters += o.total_newton_iters;
    total_linear_iters += o.total_linear_iters;
    damping_events += o.damping_events;
    max_newton_iters = std::max(max_newton_iters, o.max_newton_iters);
    max_residual = std::max(max_residual, o.max_residual);
  }

  nlohmann::json to_json() const {
    return {{"total_steps", total_steps},
            {"total_newton_iters", total_newton_iters},
            {"total_linear_iters", total_linear_iters},
            {"damping_events", damping_events},
            {"max_newton_iters", max_newton_iters},
            {"max_residual", max_residual}};
  }
};

// ---------------------------------------------------------------------------
// Single path
// ---------------------------------------------------------------------------

struct SingleRun {
  SpaceTimeField trajectory;
  std::vector<StepReport> reports;
  RunDiagnostics diag;
};

inline SingleRun run_single(const Mesh& mesh, const ModelSpec& spec,
                            const BrownianPath& path, const SolverConfig& cfg) {
  const CellField u0 = project_initial(spec.u0, mesh);
  PathRun run = run_path(u0, path, spec, mesh, cfg);
  RunDiagnostics diag = collect(run.trajectory, spec);
  diag.sample_index = path.sample_index;
  return {std::move(run.trajectory), std::move(run.reports), std::move(diag)};
}

// ---------------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------------

struct EnsembleRun {
  std::vector<RunDiagnostics> per_sample;  // ascending sample index
  EnsembleStats stats;
  SolverSummary solver;
  double u0norm_sq = 0.0;
};

/// S independent paths over the same data; bitwise deterministic for any
/// thread count (stateless noise, per-sample isolation, ordered reduction).
inline EnsembleRun run_ensemble(const Mesh& mesh, const ModelSpec& spec, int n_steps,
                                double dt, std::uint64_t seed, int samples,
                                const SolverConfig& cfg, int threads) {
  if (samples < 1) throw validation_error("run_ensemble: samples must be >= 1");
  const CellField u0 = project_initial(spec.u0, mesh);
  const double u0n = l2_norm(u0);

  std::vector<RunDiagnostics> diags(static_cast<std::size_t>(samples));
  std::vector<SolverSummary> summaries(static_cast<std::size_t>(samples));
  detail::parallel_samples(samples, threads, [&](int s) {
    const BrownianPath path =
        sample_path(seed, static_cast<std::uint64_t>(s), n_steps, dt);
    PathRun run = run_path(u0, path, spec, mesh, cfg);
    RunDiagnostics d = collect(run.trajectory, spec);
    d.sample_index = static_cast<std::uint64_t>(s);
    diags[static_cast<std::size_t>(s)] = std::move(d);
    summaries[static_cast<std::size_t>(s)].add_all(run.reports);
  });

  EnsembleRun out;
  out.stats = ensemble_reduce(diags);
  out.per_sample = std::move(diags);
  for (const auto& s : summaries) out.solver.merge(s);
  out.u0norm_sq = u0n * u0n;
  return out;
}

// ---------------------------------------------------------------------------
// Coupled convergence study
// ---------------------------------------------------------------------------

struct ConvergeLevelResult {
  ScheduleLevel sched;
  std::uint64_t mesh_hash = 0;
  double h = 0.0;
  std::vector<RunDiagnostics> per_sample;
  EnsembleStats stats;
};

struct ConvergeRun {
  std::deque<Mesh> meshes;  // stable addresses, one per level
  std::vector<ConvergeLevelResult> levels;
  std::vector<std::vector<double>> cauchy_samples;  // [pair m][sample]
  std::vector<Stat> cauchy;                         // level m vs m+1
  DecayReport decay;
  SolverSummary solver;
};

/// Runs every schedule level for every sample with one shared Brownian path
/// per sample (generated at the finest level, block-summed down), then the
/// cross-level Cauchy differences and the constraint-decay regression.
inline ConvergeRun run_converge(const ModelSpec& base, const CouplingSchedule& schedule,
                                int dim, const std::array<double, 3>& extents,
                                std::uint64_t seed, int samples, const SolverConfig& cfg,
                                int threads) {
  const int n_levels = static_cast<int>(schedule.levels.size());
  if (n_levels < 2) throw validation_error("run_converge: need at least 2 levels");
  if (samples < 1) throw validation_error("run_converge: samples must be >= 1");

  ConvergeRun out;
  std::vector<ModelSpec> specs;
  std::vector<CellField> u0s;
  for (const auto& lvl : schedule.levels) {
    out.meshes.push_back(build_uniform_grid(
        dim,
        std::span<const double>(extents.data(), static_cast<std::size_t>(dim)),
        std::span<const int>(lvl.resolution.data(), static_cast<std::size_t>(dim))));
    ModelSpec spec = base;
    spec.epsilon = lvl.epsilon;
    specs.push_back(std::move(spec));
    u0s.push_back(project_initial(base.u0, out.meshes.back()));
  }

  const int fine_n = schedule.levels.back().n_steps;
  const double fine_dt = schedule.levels.back().dt;

  std::vector<std::vector<RunDiagnostics>> diags(
      static_cast<std::size_t>(n_levels),
      std::vector<RunDiagnostics>(static_cast<std::size_t>(samples)));
  std::vector<std::vector<double>> cauchy(
      static_cast<std::size_t>(n_levels - 1),
      std::vector<double>(static_cast<std::size_t>(samples)));
  std::vector<SolverSummary> summaries(static_cast<std::size_t>(samples));

  detail::parallel_samples(samples, threads, [&](int s) {
    const BrownianPath fine =
        sample_path(seed, static_cast<std::uint64_t>(s), fine_n, fine_dt);
    std::vector<SpaceTimeField> trajs;
    trajs.reserve(static_cast<std::size_t>(n_levels));
    for (int m = 0; m < n_levels; ++m) {
      const int factor = fine_n / schedule.levels[static_cast<std::size_t>(m)].n_steps;
      const BrownianPath path = factor == 1 ? fine : coarsen(fine, factor);
      PathRun run = run_path(u0s[static_cast<std::size_t>(m)], path,
                             specs[static_cast<std::size_t>(m)],
                             out.meshes[static_cast<std::size_t>(m)], cfg);
      RunDiagnostics d = collect(run.trajectory, specs[static_cast<std::size_t>(m)]);
      d.sample_index = static_cast<std::uint64_t>(s);
      diags[static_cast<std::size_t>(m)][static_cast<std::size_t>(s)] = std::move(d);
      summaries[static_cast<std::size_t>(s)].add_all(run.reports);
      trajs.push_back(std::move(run.trajectory));
    }
    for (int m = 0; m + 1 < n_levels; ++m)
      cauchy[static_cast<std::size_t>(m)][static_cast<std::size_t>(s)] =
          cauchy_difference(trajs[static_cast<std::size_t>(m)],
                            trajs[static_cast<std::size_t>(m) + 1],
                            out.meshes[static_cast<std::size_t>(m) + 1]);
  });

  std::vector<double> epsilons;
  std::vector<EnsembleStats> level_stats;
  for (int m = 0; m < n_levels; ++m) {
    ConvergeLevelResult lvl;
    lvl.sched = schedule.levels[static_cast<std::size_t>(m)];
    lvl.mesh_hash = out.meshes[static_cast<std::size_t>(m)].hash();
    lvl.h = out.meshes[static_cast<std::size_t>(m)].h();
    lvl.stats = ensemble_reduce(diags[static_cast<std::size_t>(m)]);
    lvl.per_sample = std::move(diags[static_cast<std::size_t>(m)]);
    epsilons.push_back(lvl.sched.epsilon);
    level_stats.push_back(lvl.stats);
    out.levels.push_back(std::move(lvl));
  }
  for (const auto& column : cauchy) out.cauchy.push_back(detail::reduce_stat(column));
  out.cauchy_samples = std::move(cauchy);
  if (n_levels >= 3) out.decay = constraint_decay(epsilons, level_stats);
  for (const auto& s : summaries) out.solver.merge(s);
  return out;
}

// ---------------------------------------------------------------------------
// Artifact writers (shared by the CLI and the determinism tests)
// ---------------------------------------------------------------------------

inline std::vector<std::string> per_sample_csv_header() {
  std::vector<std::string> h{"level", "sample"};
  for (const auto& name : diagnostic_names()) h.push_back(name);
  return h;
}

inline void write_per_sample_csv(const std::filesystem::path& path, int level,
                                 const std::vector<RunDiagnostics>& per_sample) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& d : per_sample) {
    std::vector<std::string> row{std::to_string(level), std::to_string(d.sample_index)};
    for (double v : diagnostic_values(d)) row.push_back(format_real(v));
    rows.push_back(std::move(row));
  }
  write_csv(path, per_sample_csv_header(), rows);
}

inline void write_summary_csv(const std::filesystem::path& path,
                              const EnsembleStats& stats) {
  std::vector<std::vector<std::string>> rows;
  const auto& names = diagnostic_names();
  for (std::size_t q = 0; q < names.size(); ++q) {
    const Stat& s = stats.scalars[q];
    rows.push_back({names[q], format_real(s.mean), format_real(s.stddev),
                    format_real(s.stderr_), std::to_string(s.count)});
  }
  write_csv(path, {"quantity", "mean", "stddev", "stderr", "count"}, rows);
}

inline void write_energy_csv(const std::filesystem::path& path, const EnsembleStats& stats,
                             double dt) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t n = 0; n < stats.energy_by_step.size(); ++n) {
    const Stat& s = stats.energy_by_step[n];
    rows.push_back({std::to_string(n), format_real(static_cast<double>(n) * dt),
                    format_real(s.mean), format_real(s.stderr_)});
  }
  write_csv(path, {"step", "t", "mean_energy_sq", "stderr"}, rows);
}

inline void write_convergence_csv(const std::filesystem::path& path,
                                  const ConvergeRun& run, double theta) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t m = 0; m < run.levels.size(); ++m) {
    const auto& lvl = run.levels[m];
    const double ratio =
        lvl.sched.dt / std::pow(lvl.sched.epsilon, 2.0 + theta);
    std::string res = std::to_string(lvl.sched.resolution[0]);
    for (std::size_t a = 1; a < 3 && lvl.sched.resolution[a] > 1; ++a)
      res += "x" + std::to_string(lvl.sched.resolution[a]);
    const bool has_pair = m + 1 < run.levels.size();
    rows.push_back({std::to_string(m), format_real(lvl.sched.epsilon),
                    format_real(lvl.sched.dt), format_real(lvl.h),
                    std::to_string(lvl.sched.n_steps), res,
                    has_pair ? format_real(run.cauchy[m].mean) : "",
                    has_pair ? format_real(run.cauchy[m].stderr_) : "",
                    format_real(lvl.stats.scalar("neg_part_sq").mean),
                    format_real(lvl.stats.scalar("overshoot_sq").mean),
                    format_real(lvl.stats.scalar("psi_sq").mean),
                    format_real(lvl.stats.scalar("lr_gap_sq").mean / lvl.sched.dt),
                    format_real(ratio)});
  }
  write_csv(path,
            {"level", "epsilon", "dt", "h", "n_steps", "resolution", "cauchy_diff_mean",
             "cauchy_diff_stderr", "neg_part_sq_mean", "overshoot_sq_mean", "psi_sq_mean",
             "lr_gap_sq_over_dt", "coupling_ratio"},
            rows);
}

/// Manifest with everything needed to reproduce the run bit-for-bit, plus
/// wall clock and solver accounting (informational, excluded from
/// determinism comparisons precisely because of the timing field).
inline void write_run_manifest(const std::filesystem::path& path, const std::string& command,
                               const nlohmann::json& config_snapshot,
                               const std::vector<std::string>& mesh_hashes,
                               std::uint64_t seed, int samples, double wall_seconds,
                               const SolverSummary& solver,
                               const nlohmann::json& extra = {}) {
  nlohmann::json m;
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = config_snapshot;
  m["mesh_hashes"] = mesh_hashes;
  m["seed"] = seed;
  m["sample_range"] = {0, samples - 1};
  m["wall_clock_seconds"] = wall_seconds;
  m["solver_summary"] = solver.to_json();
  if (!extra.is_null() && !extra.empty()) m["study"] = extra;
  write_text(path, m.dump(2) + "\n");
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace sacfv
