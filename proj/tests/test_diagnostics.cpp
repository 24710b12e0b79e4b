#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sacfv/sacfv.hpp"

using sacfv::BrownianPath;
using sacfv::build_uniform_grid;
using sacfv::CellField;
using sacfv::collect;
using sacfv::EnsembleStats;
using sacfv::ensemble_reduce;
using sacfv::make_beta;
using sacfv::make_g;
using sacfv::make_u0;
using sacfv::Mesh;
using sacfv::ModelSpec;
using sacfv::RunDiagnostics;
using sacfv::sample_path;
using sacfv::SpaceTimeField;

namespace {

Mesh grid2(int nx, int ny, double lx = 1.0, double ly = 1.0) {
  const double ext[2] = {lx, ly};
  const int res[2] = {nx, ny};
  return build_uniform_grid(2, ext, res);
}

SpaceTimeField two_cell_run(const Mesh& mesh, double a, double b) {
  SpaceTimeField stf(mesh, 1, 0.5);
  stf.append(CellField(mesh, {0.0, 1.0}));
  stf.append(CellField(mesh, {a, b}));
  return stf;
}

RunDiagnostics synthetic_sample(std::uint64_t index, double neg, double over,
                                std::vector<double> energy) {
  RunDiagnostics d;
  d.sample_index = index;
  d.energy = std::move(energy);
  d.neg_part_sq = neg;
  d.overshoot_sq = over;
  return d;
}

ModelSpec quarter_eps_spec() {
  ModelSpec spec;
  spec.epsilon = 0.25;
  spec.horizon = 0.5;
  return spec;
}

}  // namespace

TEST_CASE("steady admissible trajectories have zero diagnostics") {
  const Mesh mesh = grid2(2, 2);
  SpaceTimeField stf(mesh, 3, 0.1);
  for (int n = 0; n <= 3; ++n) stf.append(CellField(mesh, 0.4));

  ModelSpec spec;
  spec.epsilon = 0.1;
  spec.horizon = 0.3;
  const RunDiagnostics d = collect(stf, spec);

  REQUIRE(d.energy.size() == 4);
  for (double e : d.energy) REQUIRE(e == Catch::Approx(0.16));
  REQUIRE(d.increment_sum == 0.0);
  REQUIRE(d.dissipation == 0.0);
  REQUIRE(d.psi_sq == 0.0);
  REQUIRE(d.neg_part_sq == 0.0);
  REQUIRE(d.overshoot_sq == 0.0);
  REQUIRE(d.lr_gap_sq == 0.0);
  REQUIRE(d.phi_terminal == 0.0);
  REQUIRE(d.violation() == 0.0);
  REQUIRE(d.sup_energy() == Catch::Approx(0.16));
  REQUIRE(d.terminal_energy() == Catch::Approx(0.16));
}

TEST_CASE("hand-computed diagnostics on a two-cell step inside [0,1]") {
  const Mesh mesh = grid2(2, 1);
  const auto stf = two_cell_run(mesh, 0.25, 0.75);
  const RunDiagnostics d = collect(stf, quarter_eps_spec());

  REQUIRE(d.energy[0] == Catch::Approx(0.5));
  REQUIRE(d.energy[1] == Catch::Approx(0.3125));
  REQUIRE(d.increment_sum == Catch::Approx(0.0625));
  REQUIRE(d.dissipation == Catch::Approx(0.25));       // dt tau (0.5)^2
  REQUIRE(d.lr_gap_sq == Catch::Approx(0.03125));      // dt * increment_sum
  REQUIRE(d.psi_sq == 0.0);
  REQUIRE(d.neg_part_sq == 0.0);
  REQUIRE(d.overshoot_sq == 0.0);
  REQUIRE(d.phi_terminal == 0.0);
  REQUIRE(d.sup_energy() == Catch::Approx(0.5));
  REQUIRE(d.terminal_energy() == Catch::Approx(0.3125));
}

TEST_CASE("hand-computed diagnostics on a constraint-violating step") {
  const Mesh mesh = grid2(2, 1);
  const auto stf = two_cell_run(mesh, -0.1, 1.2);
  const RunDiagnostics d = collect(stf, quarter_eps_spec());

  REQUIRE(d.psi_sq == Catch::Approx(0.2));          // dt (0.5*0.16 + 0.5*0.64)
  REQUIRE(d.neg_part_sq == Catch::Approx(0.0025));  // dt * 0.5 * 0.01
  REQUIRE(d.overshoot_sq == Catch::Approx(0.01));   // dt * 0.5 * 0.04
  REQUIRE(d.violation() == Catch::Approx(0.0125));
  // eps^2 ||psi||^2 = ||(u)^-||^2 + ||(u-1)^+||^2
  REQUIRE(0.25 * 0.25 * d.psi_sq == Catch::Approx(d.violation()).epsilon(1e-13));
  REQUIRE(d.phi_terminal == Catch::Approx(0.05));   // 0.5*0.02 + 0.5*0.08
  REQUIRE(d.increment_sum == Catch::Approx(0.025));
  REQUIRE(d.dissipation == Catch::Approx(1.69));    // dt tau (1.3)^2
}

TEST_CASE("collected diagnostics satisfy their structural identities on a noisy run") {
  const Mesh mesh = grid2(4, 4);
  ModelSpec spec;
  spec.epsilon = 0.2;
  spec.horizon = 0.5;
  spec.g = make_g("bump", {{"sigma", 0.8}});
  spec.beta = make_beta("sin", {{"lambda", 0.4}});
  spec.u0 = make_u0("cosine");
  sacfv::SolverConfig cfg;

  const CellField u0 = project_initial(spec.u0, mesh);
  const BrownianPath path = sample_path(29, 0, 10, 0.05);
  const auto run = run_path(u0, path, spec, mesh, cfg);
  const RunDiagnostics d = collect(run.trajectory, spec);
  const double dt = run.trajectory.dt();

  // right/left interpolant gap: piecewise-constant-in-time integral
  REQUIRE(d.lr_gap_sq ==
          Catch::Approx(dt * d.increment_sum).epsilon(1e-13).margin(1e-300));

  // penalty decomposition
  REQUIRE(spec.epsilon * spec.epsilon * d.psi_sq ==
          Catch::Approx(d.violation()).epsilon(1e-13).margin(1e-300));

  // independent interpolant-midpoint oracles for the time integrals
  double gap_oracle = 0.0, neg_oracle = 0.0, inc_oracle = 0.0;
  for (int n = 0; n < 10; ++n) {
    const double t_mid = (n + 0.5) * dt;
    const auto& right = run.trajectory.evaluate_right(t_mid);
    const auto& left = run.trajectory.evaluate_left(t_mid);
    double diff2 = 0.0, neg2 = 0.0;
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
      const double m = mesh.cells()[c].volume;
      const double jump = right[c] - left[c];
      diff2 += m * jump * jump;
      const double under = std::max(0.0, -right[c]);
      neg2 += m * under * under;
    }
    gap_oracle += dt * diff2;
    neg_oracle += dt * neg2;
    inc_oracle += diff2;
  }
  REQUIRE(d.lr_gap_sq == Catch::Approx(gap_oracle).epsilon(1e-12).margin(1e-300));
  REQUIRE(d.neg_part_sq == Catch::Approx(neg_oracle).epsilon(1e-12).margin(1e-300));
  REQUIRE(d.increment_sum == Catch::Approx(inc_oracle).epsilon(1e-12).margin(1e-300));

  // energies agree with the frame norms
  for (int n = 0; n <= 10; ++n) {
    const double nrm = l2_norm(run.trajectory.frame(static_cast<std::size_t>(n)));
    REQUIRE(d.energy[static_cast<std::size_t>(n)] == Catch::Approx(nrm * nrm));
  }
}

TEST_CASE("ensemble reduction: single and equal samples") {
  const auto single = ensemble_reduce({synthetic_sample(0, 0.5, 0.25, {1.0, 2.0})});
  REQUIRE(single.count == 1);
  const auto& neg = single.scalar("neg_part_sq");
  REQUIRE(neg.mean == 0.5);
  REQUIRE(neg.count == 1);
  REQUIRE_FALSE(neg.spread_defined());
  REQUIRE(std::isnan(neg.stddev));
  REQUIRE(neg.stderr_or_zero() == 0.0);
  REQUIRE(single.energy_by_step.size() == 2);
  REQUIRE(single.energy_by_step[1].mean == 2.0);

  const auto equal = ensemble_reduce(
      {synthetic_sample(0, 0.5, 0.0, {1.0}), synthetic_sample(1, 0.5, 0.0, {1.0})});
  REQUIRE(equal.scalar("neg_part_sq").stddev == 0.0);
  REQUIRE(equal.scalar("neg_part_sq").stderr_ == 0.0);
  REQUIRE(equal.scalar("neg_part_sq").spread_defined());
}

TEST_CASE("ensemble reduction: hand-checked spread and permutation invariance") {
  std::vector<RunDiagnostics> samples;
  for (std::uint64_t s = 0; s < 8; ++s)
    samples.push_back(synthetic_sample(s, 0.1 * static_cast<double>(s), 0.0,
                                       {static_cast<double>(s), 2.0}));

  // two-sample spread: values 1 and 3 -> mean 2, stddev sqrt(2), stderr 1
  const auto pair = ensemble_reduce(
      {synthetic_sample(0, 1.0, 0.0, {0.0}), synthetic_sample(1, 3.0, 0.0, {0.0})});
  REQUIRE(pair.scalar("neg_part_sq").mean == Catch::Approx(2.0));
  REQUIRE(pair.scalar("neg_part_sq").stddev == Catch::Approx(std::sqrt(2.0)));
  REQUIRE(pair.scalar("neg_part_sq").stderr_ == Catch::Approx(1.0));

  const auto forward = ensemble_reduce(samples);
  auto shuffled = samples;
  std::mt19937_64 rng(61);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto permuted = ensemble_reduce(shuffled);

  // bitwise identical: the reduction sorts by sample index before folding
  for (std::size_t q = 0; q < forward.scalars.size(); ++q) {
    REQUIRE(forward.scalars[q].mean == permuted.scalars[q].mean);
    REQUIRE((std::isnan(forward.scalars[q].stddev) ||
             forward.scalars[q].stddev == permuted.scalars[q].stddev));
  }
  for (std::size_t n = 0; n < forward.energy_by_step.size(); ++n)
    REQUIRE(forward.energy_by_step[n].mean == permuted.energy_by_step[n].mean);

  REQUIRE_THROWS_AS(ensemble_reduce({}), sacfv::validation_error);
  REQUIRE_THROWS_AS(ensemble_reduce({synthetic_sample(0, 0.0, 0.0, {1.0}),
                                     synthetic_sample(1, 0.0, 0.0, {1.0, 2.0})}),
                    sacfv::validation_error);
  REQUIRE_THROWS_AS(forward.scalar("no_such_quantity"), sacfv::validation_error);
}

TEST_CASE("energy bound check: zero data sits exactly on the bound") {
  ModelSpec spec;
  spec.horizon = 1.0;
  const auto stats = ensemble_reduce({synthetic_sample(0, 0.0, 0.0, {0.0, 0.0})});
  const auto report = check_gronwall_bound(stats, spec, 0.0, 0.0);
  REQUIRE(report.bound == 0.0);
  REQUIRE(report.estimate == 0.0);
  REQUIRE(report.holds);
}

TEST_CASE("energy bound check: deterministic hand case") {
  ModelSpec spec;
  spec.horizon = 1.0;  // L_g = L_beta = 0 -> bound = (u0^2 + 4 f^2) e^4

  const auto stats =
      ensemble_reduce({synthetic_sample(0, 0.0, 0.0, {0.1, 0.3, 0.2})});
  const auto report = check_gronwall_bound(stats, spec, 0.25, 0.0);
  REQUIRE(report.bound == Catch::Approx(0.25 * std::exp(4.0)));
  REQUIRE(report.estimate == Catch::Approx(0.3));
  REQUIRE(report.argmax_step == 1);
  REQUIRE(report.holds);
  REQUIRE(report.margin == Catch::Approx(report.bound - 0.3));
  REQUIRE(report.summary().find("holds") != std::string::npos);

  const auto blown =
      check_gronwall_bound(ensemble_reduce({synthetic_sample(0, 0.0, 0.0, {100.0})}),
                           spec, 0.25, 0.0);
  REQUIRE_FALSE(blown.holds);
  REQUIRE(blown.summary().find("VIOLATED") != std::string::npos);
}

TEST_CASE("energy bound accounts for the coefficient Lipschitz constants") {
  ModelSpec spec;
  spec.horizon = 0.5;
  spec.g = make_g("bump", {{"sigma", 2.0}});            // L_g = 2
  spec.beta = make_beta("linear", {{"lambda", 0.5}});   // L_beta = 1/2
  const auto stats = ensemble_reduce({synthetic_sample(0, 0.0, 0.0, {1.0})});
  const auto report = check_gronwall_bound(stats, spec, 1.0, 0.5);
  // (1 + 4*0.5) exp(4*0.5*(2*4 + 2*0.5 + 1)) = 3 e^20
  REQUIRE(report.bound == Catch::Approx(3.0 * std::exp(20.0)));
  REQUIRE_THROWS_AS(
      check_gronwall_bound(EnsembleStats{}, spec, 0.0, 0.0), sacfv::validation_error);
}

TEST_CASE("constraint decay: synthetic quadratic law fits slope two") {
  const std::vector<double> eps{0.5, 0.4, 0.3, 0.2};
  std::vector<EnsembleStats> levels;
  for (double e : eps)
    levels.push_back(
        ensemble_reduce({synthetic_sample(0, 1.5 * e * e / 2.0, 1.5 * e * e / 2.0, {0.0})}));

  const auto report = constraint_decay(eps, levels);
  REQUIRE(report.active);
  REQUIRE(report.fit_points == 4);
  REQUIRE(report.slope == Catch::Approx(2.0).epsilon(1e-12));
  for (double r : report.ratio_to_eps_sq) REQUIRE(r == Catch::Approx(1.5));
  REQUIRE(report.summary().find("slope") != std::string::npos);
}

TEST_CASE("constraint decay: inactive and degenerate inputs") {
  const std::vector<double> eps{0.5, 0.4, 0.3};
  std::vector<EnsembleStats> quiet;
  for (std::size_t i = 0; i < 3; ++i)
    quiet.push_back(ensemble_reduce({synthetic_sample(0, 0.0, 0.0, {0.0})}));
  const auto report = constraint_decay(eps, quiet);
  REQUIRE_FALSE(report.active);
  REQUIRE(std::isnan(report.slope));
  REQUIRE(report.summary().find("never active") != std::string::npos);

  // a single active level cannot support a fit but must not crash
  std::vector<EnsembleStats> lone = quiet;
  lone[1] = ensemble_reduce({synthetic_sample(0, 0.01, 0.0, {0.0})});
  const auto partial = constraint_decay(eps, lone);
  REQUIRE(partial.active);
  REQUIRE(partial.fit_points == 1);

  REQUIRE_THROWS_AS(constraint_decay({0.5, 0.4}, quiet), sacfv::validation_error);
  std::vector<EnsembleStats> two(quiet.begin(), quiet.begin() + 2);
  REQUIRE_THROWS_AS(constraint_decay({0.5, 0.4}, two), sacfv::validation_error);
}

TEST_CASE("cauchy difference: identical runs and exact prolongations vanish") {
  const Mesh coarse = grid2(2, 2);
  const Mesh fine = grid2(4, 4);

  SpaceTimeField a(coarse, 2, 0.5);
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int n = 0; n <= 2; ++n) {
    std::vector<double> v(coarse.n_cells());
    for (auto& x : v) x = dist(rng);
    a.append(CellField(coarse, v));
  }
  REQUIRE(sacfv::cauchy_difference(a, a, coarse) == 0.0);

  // fine run built as the exact prolongation on a doubled time grid
  SpaceTimeField b(fine, 4, 0.25);
  b.append(prolong(a.frame(0), fine));
  for (int j = 0; j < 4; ++j) b.append(prolong(a.frame(static_cast<std::size_t>(j / 2) + 1), fine));
  REQUIRE(sacfv::cauchy_difference(a, b, fine) <= 1e-14);
}

TEST_CASE("cauchy difference: hand-computed constant-frame value") {
  const Mesh mesh = grid2(2, 2);
  SpaceTimeField coarse(mesh, 2, 0.5);
  for (double v : {0.0, 1.0, 2.0}) coarse.append(CellField(mesh, v));
  SpaceTimeField fine(mesh, 4, 0.25);
  for (double v : {0.0, 0.5, 1.5, 1.5, 2.5}) fine.append(CellField(mesh, v));

  // per fine slab the constant gap is +-1/2, so the integral is 4*(0.25*0.25)
  REQUIRE(sacfv::cauchy_difference(coarse, fine, mesh) == Catch::Approx(0.5));
}

TEST_CASE("cauchy difference rejects incompatible runs") {
  const Mesh mesh = grid2(2, 2);
  SpaceTimeField coarse(mesh, 3, 1.0 / 3.0);
  for (int n = 0; n <= 3; ++n) coarse.append(CellField(mesh, 0.0));
  SpaceTimeField fine(mesh, 4, 0.25);
  for (int n = 0; n <= 4; ++n) fine.append(CellField(mesh, 0.0));
  REQUIRE_THROWS_AS(sacfv::cauchy_difference(coarse, fine, mesh), sacfv::validation_error);

  SpaceTimeField longer(mesh, 4, 0.5);  // horizon 2, not 1
  for (int n = 0; n <= 4; ++n) longer.append(CellField(mesh, 0.0));
  SpaceTimeField base(mesh, 2, 0.5);
  for (int n = 0; n <= 2; ++n) base.append(CellField(mesh, 0.0));
  REQUIRE_THROWS_AS(sacfv::cauchy_difference(base, longer, mesh), sacfv::validation_error);

  const Mesh other = grid2(3, 3);
  REQUIRE_THROWS_AS(sacfv::cauchy_difference(base, base, other), sacfv::validation_error);
}

TEST_CASE("diagnostic names and values stay aligned") {
  const auto& names = sacfv::diagnostic_names();
  REQUIRE(names.size() == 9);
  REQUIRE(names[0] == "sup_energy_sq");
  REQUIRE(names[8] == "phi_terminal");

  RunDiagnostics d;
  d.energy = {0.5, 2.0, 1.0};
  d.psi_sq = 0.125;
  const auto values = sacfv::diagnostic_values(d);
  REQUIRE(values.size() == names.size());
  REQUIRE(values[0] == 2.0);   // sup energy
  REQUIRE(values[1] == 1.0);   // terminal energy
  REQUIRE(values[4] == 0.125); // psi_sq
}
