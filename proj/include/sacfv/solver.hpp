#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "sacfv/errors.hpp"
#include "sacfv/field.hpp"
#include "sacfv/mesh.hpp"
#include "sacfv/model.hpp"
#include "sacfv/noise.hpp"

namespace sacfv {

// ---------------------------------------------------------------------------
// TPFA stiffness operator
// ---------------------------------------------------------------------------

/// Symmetric operator (A w)_K = sum_{sigma = K|L} tau_sigma (w_K - w_L).
/// Row sums vanish (homogeneous Neumann), off-diagonals are -tau_sigma.
struct StiffnessOperator {
  const Mesh* mesh = nullptr;
  std::vector<std::int32_t> edge_k, edge_l;
  std::vector<double> edge_tau;
  std::vector<double> diag;  // sum of incident transmissibilities per cell

  std::size_t size() const { return diag.size(); }

  void apply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t c = 0; c < diag.size(); ++c) y[c] = diag[c] * x[c];
    for (std::size_t e = 0; e < edge_tau.size(); ++e) {
      const auto k = static_cast<std::size_t>(edge_k[e]);
      const auto l = static_cast<std::size_t>(edge_l[e]);
      y[k] -= edge_tau[e] * x[l];
      y[l] -= edge_tau[e] * x[k];
    }
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    apply(x, y);
    return y;
  }
};

inline StiffnessOperator assemble_stiffness(const Mesh& mesh) {
  StiffnessOperator a;
  a.mesh = &mesh;
  a.diag.assign(mesh.n_cells(), 0.0);
  a.edge_k.reserve(mesh.interior_edges().size());
  a.edge_l.reserve(mesh.interior_edges().size());
  a.edge_tau.reserve(mesh.interior_edges().size());
  for (const auto& e : mesh.interior_edges()) {
    a.edge_k.push_back(e.k);
    a.edge_l.push_back(e.l);
    a.edge_tau.push_back(e.transmissibility);
    a.diag[static_cast<std::size_t>(e.k)] += e.transmissibility;
    a.diag[static_cast<std::size_t>(e.l)] += e.transmissibility;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Solver configuration and per-step report
// ---------------------------------------------------------------------------

struct SolverConfig {
  double newton_tol = 1e-10;   // on max_K |F_K| / m_K
  int newton_max_iter = 50;
  double linear_tol = 1e-12;   // relative residual of the inner CG
  int linear_max_iter = 0;     // 0 -> 10 n + 100
  double damping_min = 0x1p-20;

  void require_valid() const {
    if (!(newton_tol > 0.0) || !(linear_tol > 0.0) || !(damping_min > 0.0) ||
        newton_max_iter < 1)
      throw validation_error("solver config: tolerances must be positive");
  }
};

struct StepReport {
  int newton_iters = 0;
  double residual = 0.0;  // final max_K |F_K| / m_K
  int linear_iters = 0;   // summed over Newton iterations
  int damping_events = 0; // number of step halvings
  bool converged = false;
};

namespace detail {

/// Jacobi-preconditioned conjugate gradients for J x = b with
/// J = A + diag(extra). Returns iteration count; x is overwritten.
inline int pcg(const StiffnessOperator& a, std::span<const double> extra_diag,
               std::span<const double> b, std::span<double> x, double rel_tol,
               int max_iter, int step_index) {
  const std::size_t n = a.size();
  const auto apply_j = [&](std::span<const double> v, std::span<double> out) {
    a.apply(v, out);
    for (std::size_t c = 0; c < n; ++c) out[c] += extra_diag[c] * v[c];
  };

  std::vector<double> r(b.begin(), b.end());
  std::fill(x.begin(), x.end(), 0.0);
  double bnorm2 = 0.0;
  for (std::size_t c = 0; c < n; ++c) bnorm2 += b[c] * b[c];
  if (bnorm2 == 0.0) return 0;
  const double stop2 = rel_tol * rel_tol * bnorm2;

  std::vector<double> z(n), p(n), q(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double d = a.diag[c] + extra_diag[c];
    if (!(d > 0.0)) throw linear_solve_error("Jacobian diagonal not positive", step_index);
    z[c] = r[c] / d;
  }
  p = z;
  double rz = 0.0;
  for (std::size_t c = 0; c < n; ++c) rz += r[c] * z[c];

  for (int it = 1; it <= max_iter; ++it) {
    apply_j(p, q);
    double pq = 0.0;
    for (std::size_t c = 0; c < n; ++c) pq += p[c] * q[c];
    if (!(pq > 0.0))
      throw linear_solve_error("conjugate gradient breakdown (operator not SPD)", step_index);
    const double alpha = rz / pq;
    double rnorm2 = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      x[c] += alpha * p[c];
      r[c] -= alpha * q[c];
      rnorm2 += r[c] * r[c];
    }
    if (rnorm2 <= stop2) return it;
    double rz_next = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      z[c] = r[c] / (a.diag[c] + extra_diag[c]);
      rz_next += r[c] * z[c];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t c = 0; c < n; ++c) p[c] = z[c] + beta * p[c];
  }
  throw linear_solve_error("conjugate gradient did not reach tolerance", step_index);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// One semi-implicit step
// ---------------------------------------------------------------------------
// Solves, for v = u^{n+1},
//   (m_K/dt)(v_K - u^n_K) + (A v)_K + m_K psi_eps(v_K)
//     = (m_K/dt) g(u^n_K) dW + m_K beta(v_K) + m_K f^n_K
// by damped semismooth Newton; the convergence test is max_K |F_K|/m_K <= tol.

inline std::pair<CellField, StepReport> step(const CellField& u_n, double dW,
                                             const CellField& f_n, const ModelSpec& spec,
                                             const StiffnessOperator& A,
                                             const SolverConfig& cfg, double dt,
                                             int step_index = -1,
                                             std::span<const double> initial_guess = {}) {
  cfg.require_valid();
  if (A.mesh == nullptr) throw validation_error("step: stiffness operator has no mesh");
  const Mesh& mesh = *A.mesh;
  require_same_mesh(u_n, f_n);
  if (&u_n.mesh() != &mesh && u_n.mesh().hash() != mesh.hash())
    throw validation_error("step: operator and state live on different meshes");
  if (!(dt > 0.0)) throw validation_error("step: dt must be positive");
  if (!dt_smallness_ok(dt, spec.beta.lipschitz))
    throw validation_error("step: dt (2 L_beta + 1) <= 3/4 violated");

  const std::size_t n = mesh.n_cells();
  const double eps = spec.epsilon;

  // Explicit part: per-cell constant c_K = u^n_K + g(u^n_K) dW + dt f^n_K, so
  // F_K(v) = m_K ((v_K - c_K)/dt + psi(v_K) - beta(v_K) - (c_K - u^n_K - g dW)/dt ...)
  // folded below as F_K = m_K ((v_K - base_K)/dt + psi(v_K) - beta(v_K)) + (A v)_K
  // with base_K = u^n_K + g(u^n_K) dW + dt f^n_K.
  std::vector<double> base(n);
  for (std::size_t c = 0; c < n; ++c)
    base[c] = u_n.values()[c] + spec.g(u_n.values()[c]) * dW + dt * f_n.values()[c];

  std::vector<double> v(n);
  if (!initial_guess.empty()) {
    if (initial_guess.size() != n)
      throw validation_error("step: initial guess has wrong length");
    std::copy(initial_guess.begin(), initial_guess.end(), v.begin());
  } else {
    std::copy(u_n.values().begin(), u_n.values().end(), v.begin());
  }

  std::vector<double> flux(n), residual(n);
  const auto eval_residual = [&](const std::vector<double>& w, std::vector<double>& out) {
    A.apply(w, flux);
    double merit = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double m = mesh.cells()[c].volume;
      out[c] = m * ((w[c] - base[c]) / dt + yosida(w[c], eps) - spec.beta(w[c])) + flux[c];
      if (!std::isfinite(out[c]))
        throw non_finite_error("non-finite residual entry", step_index);
      merit = std::max(merit, std::abs(out[c]) / m);
    }
    return merit;
  };

  StepReport report;
  const int lin_max = cfg.linear_max_iter > 0 ? cfg.linear_max_iter
                                              : static_cast<int>(10 * n + 100);
  std::vector<double> extra_diag(n), direction(n), trial(n), trial_res(n);
  double merit = eval_residual(v, residual);

  for (int it = 0; it < cfg.newton_max_iter; ++it) {
    if (merit <= cfg.newton_tol) {
      report.converged = true;
      break;
    }
    for (std::size_t c = 0; c < n; ++c) {
      const double m = mesh.cells()[c].volume;
      const double bslope = spec.beta.slope(v[c]);
      if (!(1.0 / dt - bslope > 0.0))
        throw linear_solve_error("Jacobian diagonal dominance lost (dt L_beta >= 1)",
                                 step_index);
      extra_diag[c] = m * (1.0 / dt + yosida_slope(v[c], eps) - bslope);
    }
    for (std::size_t c = 0; c < n; ++c) residual[c] = -residual[c];
    report.linear_iters +=
        detail::pcg(A, extra_diag, residual, direction, cfg.linear_tol, lin_max, step_index);
    ++report.newton_iters;

    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= cfg.damping_min) {
      for (std::size_t c = 0; c < n; ++c) trial[c] = v[c] + alpha * direction[c];
      const double trial_merit = eval_residual(trial, trial_res);
      if (trial_merit <= (1.0 - 1e-4 * alpha) * merit) {
        v.swap(trial);
        residual.swap(trial_res);
        merit = trial_merit;
        accepted = true;
        break;
      }
      alpha *= 0.5;
      ++report.damping_events;
    }
    if (!accepted)
      throw non_convergence_error("Newton line search hit the damping floor", step_index);
  }
  if (!report.converged && merit <= cfg.newton_tol) report.converged = true;
  report.residual = merit;
  if (!report.converged) {
    std::ostringstream os;
    os << "Newton did not converge in " << cfg.newton_max_iter
       << " iterations (residual " << merit << ")";
    throw non_convergence_error(os.str(), step_index);
  }
  return {CellField(u_n.mesh(), std::move(v)), report};
}

/// Convenience overload using the coupled time step dt = C eps^(2+theta).
inline std::pair<CellField, StepReport> step(const CellField& u_n, double dW,
                                             const CellField& f_n, const ModelSpec& spec,
                                             const StiffnessOperator& A,
                                             const SolverConfig& cfg) {
  return step(u_n, dW, f_n, spec, A, cfg, spec.coupled_dt());
}

// ---------------------------------------------------------------------------
// Full path run
// ---------------------------------------------------------------------------

struct PathRun {
  SpaceTimeField trajectory;
  std::vector<StepReport> reports;
};

/// Marches the scheme over all increments of `path`; frame 0 is u0_field.
/// Requires n_steps * dt = horizon. Step failures carry their step index.
inline PathRun run_path(const CellField& u0_field, const BrownianPath& path,
                        const ModelSpec& spec, const Mesh& mesh, const SolverConfig& cfg) {
  if (&u0_field.mesh() != &mesh && u0_field.mesh().hash() != mesh.hash())
    throw validation_error("run_path: initial field not on the given mesh");
  const double span = path.n_steps * path.dt;
  if (std::abs(span - spec.horizon) > 1e-12 * std::max(1.0, spec.horizon))
    throw validation_error("run_path: path does not cover the time horizon");
  if (!dt_smallness_ok(path.dt, spec.beta.lipschitz))
    throw validation_error("run_path: dt (2 L_beta + 1) <= 3/4 violated");

  const StiffnessOperator A = assemble_stiffness(mesh);
  PathRun run{SpaceTimeField(mesh, path.n_steps, path.dt), {}};
  run.reports.reserve(static_cast<std::size_t>(path.n_steps));
  run.trajectory.append(u0_field);

  CellField u = u0_field;
  CellField f_cached(mesh, 0.0);
  if (spec.f.time_independent) f_cached = discretize_source(spec.f, mesh, 0, path.dt);
  for (int n = 0; n < path.n_steps; ++n) {
    const CellField& f_n =
        spec.f.time_independent ? f_cached
                                : (f_cached = discretize_source(spec.f, mesh, n, path.dt));
    auto [next, rep] = step(u, path.increment(n), f_n, spec, A, cfg, path.dt, n);
    run.reports.push_back(rep);
    run.trajectory.append(next);
    u = std::move(next);
  }
  return run;
}

}  // namespace sacfv
