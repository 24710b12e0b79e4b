#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sacfv/errors.hpp"
#include "sacfv/field.hpp"
#include "sacfv/mesh.hpp"
#include "sacfv/model.hpp"

namespace sacfv {

// ---------------------------------------------------------------------------
// Per-path diagnostics
// ---------------------------------------------------------------------------

/// Every stability quantity of a single path: the discrete energies, the
/// summed increments, the dissipation, the penalty norms and their split into
/// undershoot/overshoot, the right/left interpolant gap, and the terminal
/// value of the convex antiderivative.
struct RunDiagnostics {
  std::uint64_t sample_index = 0;
  std::vector<double> energy;  // ||u^n||^2 for n = 0..N
  double increment_sum = 0.0;  // sum_n ||u^{n+1} - u^n||^2
  double dissipation = 0.0;    // dt sum_n |u^{n+1}|_{1,h}^2
  double psi_sq = 0.0;         // dt sum_n ||psi_eps(u^{n+1})||^2
  double neg_part_sq = 0.0;    // ||(u^r)^-||^2_{L2(0,T;L2)}
  double overshoot_sq = 0.0;   // ||(u^r - 1)^+||^2_{L2(0,T;L2)}
  double lr_gap_sq = 0.0;      // ||u^r - u^l||^2_{L2(0,T;L2)}
  double phi_terminal = 0.0;   // sum_K m_K phi_eps(u^N_K)

  double sup_energy() const { return *std::max_element(energy.begin(), energy.end()); }
  double terminal_energy() const { return energy.back(); }
  double violation() const { return neg_part_sq + overshoot_sq; }
};

/// Names and accessors for the scalar diagnostics, in fixed CSV column order.
inline const std::vector<std::string>& diagnostic_names() {
  static const std::vector<std::string> names = {
      "sup_energy_sq", "terminal_energy_sq", "increment_sum", "dissipation", "psi_sq",
      "neg_part_sq",   "overshoot_sq",       "lr_gap_sq",     "phi_terminal"};
  return names;
}

inline std::vector<double> diagnostic_values(const RunDiagnostics& d) {
  return {d.sup_energy(), d.terminal_energy(), d.increment_sum, d.dissipation, d.psi_sq,
          d.neg_part_sq,  d.overshoot_sq,      d.lr_gap_sq,     d.phi_terminal};
}

/// Computes all diagnostics by exact dt-weighted frame sums; the time
/// integrals of the piecewise constant interpolants need no quadrature.
inline RunDiagnostics collect(const SpaceTimeField& stf, const ModelSpec& spec) {
  const Mesh& mesh = stf.mesh();
  const double dt = stf.dt();
  const double eps = spec.epsilon;
  const int n_steps = stf.n_steps();

  RunDiagnostics d;
  d.energy.reserve(static_cast<std::size_t>(n_steps) + 1);
  for (int n = 0; n <= n_steps; ++n) {
    const double nrm = l2_norm(stf.frame(n));
    d.energy.push_back(nrm * nrm);
  }

  for (int n = 0; n < n_steps; ++n) {
    const auto& prev = stf.frame(n).values();
    const auto& next = stf.frame(n + 1).values();
    double inc = 0.0, psi_nrm = 0.0, neg = 0.0, over = 0.0;
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
      const double m = mesh.cells()[c].volume;
      const double jump = next[c] - prev[c];
      inc += m * jump * jump;
      const double p = yosida(next[c], eps);
      psi_nrm += m * p * p;
      const double under = std::max(0.0, -next[c]);
      const double above = std::max(0.0, next[c] - 1.0);
      neg += m * under * under;
      over += m * above * above;
    }
    d.increment_sum += inc;
    d.lr_gap_sq += dt * inc;
    d.psi_sq += dt * psi_nrm;
    d.neg_part_sq += dt * neg;
    d.overshoot_sq += dt * over;
    const double semi = h1_seminorm(stf.frame(n + 1));
    d.dissipation += dt * semi * semi;
  }

  for (std::size_t c = 0; c < mesh.n_cells(); ++c)
    d.phi_terminal +=
        mesh.cells()[c].volume * yosida_antiderivative(stf.frame(n_steps).values()[c], eps);
  return d;
}

// ---------------------------------------------------------------------------
// Ensemble statistics
// ---------------------------------------------------------------------------

/// Sample mean / spread of one scalar. With a single sample the spread is
/// undefined; it is stored as NaN and stderr_or_zero() falls back to 0.
struct Stat {
  double mean = 0.0;
  double stddev = std::numeric_limits<double>::quiet_NaN();
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;

  bool spread_defined() const { return count >= 2; }
  double stderr_or_zero() const { return spread_defined() ? stderr_ : 0.0; }
};

namespace detail {
inline Stat reduce_stat(const std::vector<double>& xs) {
  Stat s;
  s.count = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    s.stderr_ = s.stddev / std::sqrt(static_cast<double>(xs.size()));
  }
  return s;
}
}  // namespace detail

struct EnsembleStats {
  std::size_t count = 0;
  std::vector<Stat> scalars;        // aligned with diagnostic_names()
  std::vector<Stat> energy_by_step; // E||u^n||^2 estimates, n = 0..N

  const Stat& scalar(const std::string& name) const {
    const auto& names = diagnostic_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return scalars[i];
    throw validation_error("unknown diagnostic: " + name);
  }
};

/// Deterministic reduction: samples are sorted by sample_index and folded in
/// ascending order, so the result is bit-identical for any input order.
inline EnsembleStats ensemble_reduce(std::vector<RunDiagnostics> per_sample) {
  if (per_sample.empty()) throw validation_error("ensemble_reduce: no samples");
  std::sort(per_sample.begin(), per_sample.end(),
            [](const RunDiagnostics& a, const RunDiagnostics& b) {
              return a.sample_index < b.sample_index;
            });
  const std::size_t n_frames = per_sample.front().energy.size();
  for (const auto& d : per_sample)
    if (d.energy.size() != n_frames)
      throw validation_error("ensemble_reduce: inconsistent frame counts");

  EnsembleStats stats;
  stats.count = per_sample.size();
  std::vector<double> column(per_sample.size());
  const std::size_t n_scalars = diagnostic_names().size();
  for (std::size_t q = 0; q < n_scalars; ++q) {
    for (std::size_t s = 0; s < per_sample.size(); ++s)
      column[s] = diagnostic_values(per_sample[s])[q];
    stats.scalars.push_back(detail::reduce_stat(column));
  }
  for (std::size_t n = 0; n < n_frames; ++n) {
    for (std::size_t s = 0; s < per_sample.size(); ++s)
      column[s] = per_sample[s].energy[n];
    stats.energy_by_step.push_back(detail::reduce_stat(column));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Bound checks
// ---------------------------------------------------------------------------

/// Result of testing sup_n E||u^n||^2 against the a priori energy bound
/// (E||u^0||^2 + 4 ||f||^2) exp(4T (2 L_g^2 + 2 L_beta + 1)).
struct BoundReport {
  double estimate = 0.0;  // sup_n (mean + 3 stderr)
  int argmax_step = 0;
  double bound = 0.0;
  double margin = 0.0;  // bound - estimate
  bool holds = false;

  std::string summary() const {
    std::ostringstream os;
    os << "energy bound " << (holds ? "holds" : "VIOLATED") << ": sup_n estimate = "
       << estimate << " (at step " << argmax_step << "), bound = " << bound
       << ", margin = " << margin;
    return os.str();
  }
};

/// u0norm_sq is ||u^0_h||^2 (the initial datum is deterministic), f_norm_sq
/// the squared L2((0,T) x Lambda) norm of f from high-order quadrature.
inline BoundReport check_gronwall_bound(const EnsembleStats& stats, const ModelSpec& spec,
                                        double u0norm_sq, double f_norm_sq) {
  if (stats.energy_by_step.empty())
    throw validation_error("check_gronwall_bound: empty energy sequence");
  BoundReport report;
  for (std::size_t n = 0; n < stats.energy_by_step.size(); ++n) {
    const Stat& s = stats.energy_by_step[n];
    const double upper = s.mean + 3.0 * s.stderr_or_zero();
    if (upper > report.estimate) {
      report.estimate = upper;
      report.argmax_step = static_cast<int>(n);
    }
  }
  const double lg = spec.g.lipschitz, lb = spec.beta.lipschitz;
  report.bound = (u0norm_sq + 4.0 * f_norm_sq) *
                 std::exp(4.0 * spec.horizon * (2.0 * lg * lg + 2.0 * lb + 1.0));
  report.margin = report.bound - report.estimate;
  report.holds = report.estimate <= report.bound;
  return report;
}

/// Constraint-violation decay across schedule levels. The violation energy
/// mean(neg_part_sq + overshoot_sq) is regressed against eps in log-log; the
/// penalty analysis gives an eps^2 envelope, so a slope near 2 is expected.
struct DecayReport {
  bool active = false;  // any level with positive violation
  int fit_points = 0;
  double slope = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> epsilons;
  std::vector<double> violations;        // ensemble means per level
  std::vector<double> ratio_to_eps_sq;   // violation / eps^2 (bound-constant probe)

  std::string summary() const {
    std::ostringstream os;
    if (!active) {
      os << "constraint never active (all violation energies zero)";
      return os.str();
    }
    os << "violation decay: slope = " << slope << " over " << fit_points
       << " levels;";
    for (std::size_t m = 0; m < epsilons.size(); ++m)
      os << " [eps=" << epsilons[m] << " v=" << violations[m] << "]";
    return os.str();
  }
};

inline DecayReport constraint_decay(const std::vector<double>& epsilons,
                                    const std::vector<EnsembleStats>& levels) {
  if (epsilons.size() != levels.size())
    throw validation_error("constraint_decay: level count mismatch");
  if (levels.size() < 3) throw validation_error("constraint_decay: need >= 3 levels");
  DecayReport report;
  for (std::size_t m = 0; m < levels.size(); ++m) {
    const double v =
        levels[m].scalar("neg_part_sq").mean + levels[m].scalar("overshoot_sq").mean;
    report.epsilons.push_back(epsilons[m]);
    report.violations.push_back(v);
    report.ratio_to_eps_sq.push_back(v / (epsilons[m] * epsilons[m]));
    if (v > 0.0) report.active = true;
  }
  if (!report.active) return report;

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t m = 0; m < report.violations.size(); ++m) {
    if (!(report.violations[m] > 0.0)) continue;
    const double x = std::log(report.epsilons[m]);
    const double y = std::log(report.violations[m]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  report.fit_points = n;
  if (n >= 2) {
    const double denom = n * sxx - sx * sx;
    report.slope = (n * sxy - sx * sy) / denom;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Cross-level Cauchy difference
// ---------------------------------------------------------------------------

/// ||prolong(coarse right interpolant) - fine right interpolant|| in
/// L2(0,T; L2), evaluated exactly on the fine time grid (which refines the
/// coarse one). Both runs must be driven by the same Brownian path.
inline double cauchy_difference(const SpaceTimeField& coarse, const SpaceTimeField& fine,
                                const Mesh& fine_mesh) {
  if (&fine.mesh() != &fine_mesh && fine.mesh().hash() != fine_mesh.hash())
    throw validation_error("cauchy_difference: fine run not on the given mesh");
  if (coarse.n_steps() < 1 || fine.n_steps() % coarse.n_steps() != 0)
    throw validation_error("cauchy_difference: time grids are not nested");
  const double t_coarse = coarse.n_steps() * coarse.dt();
  const double t_fine = fine.n_steps() * fine.dt();
  if (std::abs(t_coarse - t_fine) > 1e-12 * std::max(1.0, t_fine))
    throw validation_error("cauchy_difference: runs cover different horizons");

  const int q = fine.n_steps() / coarse.n_steps();
  std::vector<CellField> prolonged;
  prolonged.reserve(static_cast<std::size_t>(coarse.n_steps()) + 1);
  for (int i = 0; i <= coarse.n_steps(); ++i)
    prolonged.push_back(prolong(coarse.frame(i), fine_mesh));

  double total = 0.0;
  for (int j = 0; j < fine.n_steps(); ++j) {
    const auto& pc = prolonged[static_cast<std::size_t>(j / q) + 1].values();
    const auto& ff = fine.frame(j + 1).values();
    double nrm2 = 0.0;
    for (std::size_t c = 0; c < fine_mesh.n_cells(); ++c) {
      const double diff = pc[c] - ff[c];
      nrm2 += fine_mesh.cells()[c].volume * diff * diff;
    }
    total += fine.dt() * nrm2;
  }
  return std::sqrt(total);
}

}  // namespace sacfv
