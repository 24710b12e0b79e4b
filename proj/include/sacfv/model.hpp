#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sacfv/errors.hpp"
#include "sacfv/field.hpp"
#include "sacfv/mesh.hpp"
#include "sacfv/quadrature.hpp"

namespace sacfv {

// ---------------------------------------------------------------------------
// Yosida regularization of the [0,1] indicator subdifferential
// ---------------------------------------------------------------------------

/// psi_eps(v) = -(v)^-/eps + (v-1)^+/eps: linear penalty outside [0,1].
inline double yosida(double v, double eps) {
  if (!(eps > 0.0)) throw validation_error("yosida: eps must be positive");
  if (v < 0.0) return v / eps;
  if (v > 1.0) return (v - 1.0) / eps;
  return 0.0;
}

/// Convex antiderivative phi_eps of psi_eps; zero on [0,1].
inline double yosida_antiderivative(double v, double eps) {
  if (!(eps > 0.0)) throw validation_error("yosida_antiderivative: eps must be positive");
  if (v < 0.0) return v * v / (2.0 * eps);
  if (v > 1.0) return (v - 1.0) * (v - 1.0) / (2.0 * eps);
  return 0.0;
}

/// Generalized derivative of psi_eps; 0 at the kinks v in {0,1}.
inline double yosida_slope(double v, double eps) {
  if (!(eps > 0.0)) throw validation_error("yosida_slope: eps must be positive");
  if (v < 0.0 || v > 1.0) return 1.0 / eps;
  return 0.0;
}

// ---------------------------------------------------------------------------
// Named problem-data functions
// ---------------------------------------------------------------------------

using Params = std::map<std::string, double>;

/// Scalar coefficient (beta or g) with its Lipschitz constant and, when the
/// preset is smooth, an exact derivative for the Newton Jacobian.
struct ScalarFunc {
  std::string name;
  Params params;
  std::function<double(double)> eval;
  std::function<double(double)> deriv;  // empty -> secant fallback
  double lipschitz = 0.0;

  double operator()(double v) const { return eval(v); }

  /// Derivative if available, else central secant over delta = 1e-8.
  double slope(double v) const {
    if (deriv) return deriv(v);
    const double delta = 1e-8;
    return (eval(v + delta) - eval(v - delta)) / (2.0 * delta);
  }
};

struct SpatialFunc {
  std::string name;
  Params params;
  std::function<double(const std::array<double, 3>&)> eval;

  double operator()(const std::array<double, 3>& x) const { return eval(x); }
};

struct SpaceTimeFunc {
  std::string name;
  Params params;
  std::function<double(double, const std::array<double, 3>&)> eval;
  bool time_independent = false;

  double operator()(double t, const std::array<double, 3>& x) const { return eval(t, x); }
};

namespace detail {
inline double get_param(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}
}  // namespace detail

/// beta presets: "zero", "linear" (lambda*u), "sin" (lambda*sin u).
/// All satisfy beta(0) = 0 with known Lipschitz constants.
inline ScalarFunc make_beta(const std::string& name, const Params& params = {}) {
  ScalarFunc f;
  f.name = name;
  f.params = params;
  if (name == "zero") {
    f.eval = [](double) { return 0.0; };
    f.deriv = [](double) { return 0.0; };
    f.lipschitz = 0.0;
  } else if (name == "linear") {
    const double lambda = detail::get_param(params, "lambda", 1.0);
    f.eval = [lambda](double v) { return lambda * v; };
    f.deriv = [lambda](double) { return lambda; };
    f.lipschitz = std::abs(lambda);
  } else if (name == "sin") {
    const double lambda = detail::get_param(params, "lambda", 1.0);
    f.eval = [lambda](double v) { return lambda * std::sin(v); };
    f.deriv = [lambda](double v) { return lambda * std::cos(v); };
    f.lipschitz = std::abs(lambda);
  } else {
    throw validation_error("unknown beta preset: " + name);
  }
  return f;
}

/// g presets: "zero" and "bump" (sigma * max(0, u(1-u))), supported in [0,1].
inline ScalarFunc make_g(const std::string& name, const Params& params = {}) {
  ScalarFunc f;
  f.name = name;
  f.params = params;
  if (name == "zero") {
    f.eval = [](double) { return 0.0; };
    f.deriv = [](double) { return 0.0; };
    f.lipschitz = 0.0;
  } else if (name == "bump") {
    const double sigma = detail::get_param(params, "sigma", 1.0);
    f.eval = [sigma](double v) { return sigma * std::max(0.0, v * (1.0 - v)); };
    f.lipschitz = std::abs(sigma);
  } else {
    throw validation_error("unknown g preset: " + name);
  }
  return f;
}

/// u0 presets: "constant" (c), "cosine" ((1+cos(pi x1))/2),
/// "clipped_linear" (clamp(a x1 + b, 0, 1)). All map into [0,1].
inline SpatialFunc make_u0(const std::string& name, const Params& params = {}) {
  SpatialFunc f;
  f.name = name;
  f.params = params;
  if (name == "constant") {
    const double c = detail::get_param(params, "c", 0.5);
    f.eval = [c](const std::array<double, 3>&) { return c; };
  } else if (name == "cosine") {
    f.eval = [](const std::array<double, 3>& x) {
      return 0.5 * (1.0 + std::cos(M_PI * x[0]));
    };
  } else if (name == "clipped_linear") {
    const double a = detail::get_param(params, "a", 2.0);
    const double b = detail::get_param(params, "b", -0.5);
    f.eval = [a, b](const std::array<double, 3>& x) {
      return std::clamp(a * x[0] + b, 0.0, 1.0);
    };
  } else {
    throw validation_error("unknown u0 preset: " + name);
  }
  return f;
}

/// f presets: "zero", "constant" (c), "time" (t), "x1" (x1), "product" (c t x1).
inline SpaceTimeFunc make_f(const std::string& name, const Params& params = {}) {
  SpaceTimeFunc f;
  f.name = name;
  f.params = params;
  if (name == "zero") {
    f.eval = [](double, const std::array<double, 3>&) { return 0.0; };
    f.time_independent = true;
  } else if (name == "constant") {
    const double c = detail::get_param(params, "c", 1.0);
    f.eval = [c](double, const std::array<double, 3>&) { return c; };
    f.time_independent = true;
  } else if (name == "time") {
    f.eval = [](double t, const std::array<double, 3>&) { return t; };
  } else if (name == "x1") {
    f.eval = [](double, const std::array<double, 3>& x) { return x[0]; };
    f.time_independent = true;
  } else if (name == "product") {
    const double c = detail::get_param(params, "c", 1.0);
    f.eval = [c](double t, const std::array<double, 3>& x) { return c * t * x[0]; };
  } else {
    throw validation_error("unknown f preset: " + name);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Problem data
// ---------------------------------------------------------------------------

/// The data of the regularized problem plus the dt = C eps^(2+theta) coupling.
struct ModelSpec {
  double epsilon = 0.1;            // Yosida parameter, in (0,1)
  double theta = 1.0;              // coupling exponent, > 0
  double coupling_constant = 1.0;  // C in dt = C eps^(2+theta)
  ScalarFunc beta = make_beta("zero");
  ScalarFunc g = make_g("zero");
  SpaceTimeFunc f = make_f("zero");
  SpatialFunc u0 = make_u0("constant", {{"c", 0.5}});
  double horizon = 1.0;  // T

  double coupled_dt() const { return coupling_constant * std::pow(epsilon, 2.0 + theta); }
};

/// Time step bound 1 - dt(2 L_beta + 1) >= 1/4 behind the energy estimates;
/// also comfortably inside the well-posedness regime.
inline constexpr double kSmallnessBound = 0.75;

inline bool dt_smallness_ok(double dt, double lipschitz_beta) {
  return dt * (2.0 * lipschitz_beta + 1.0) <= kSmallnessBound;
}

struct ValidationEntry {
  std::string check;
  bool passed = true;
  std::string detail;
};

struct ValidationReport {
  bool pass = true;
  std::vector<ValidationEntry> entries;

  void add(const std::string& check, bool ok, const std::string& detail = "") {
    pass = pass && ok;
    entries.push_back({check, ok, detail});
  }

  std::string summary() const {
    std::ostringstream os;
    os << (pass ? "valid" : "INVALID") << "\n";
    for (const auto& e : entries) {
      os << "  [" << (e.passed ? "ok" : "FAIL") << "] " << e.check;
      if (!e.detail.empty()) os << ": " << e.detail;
      os << "\n";
    }
    return os.str();
  }
};

/// Sampled checks of the standing assumptions (u0 range, supp g, Lipschitz
/// slope of beta, beta(0) = 0) plus parameter ranges and dt smallness for
/// the coupled step. Failures are report entries, never exceptions.
inline ValidationReport validate(const ModelSpec& spec,
                                 const std::array<double, 3>& extents, int dim) {
  ValidationReport report;
  report.add("epsilon in (0,1)", spec.epsilon > 0.0 && spec.epsilon < 1.0,
             "epsilon = " + std::to_string(spec.epsilon));
  report.add("theta > 0", spec.theta > 0.0);
  report.add("coupling constant > 0", spec.coupling_constant > 0.0);
  report.add("horizon > 0", spec.horizon > 0.0);
  report.add("lipschitz constants nonnegative",
             spec.beta.lipschitz >= 0.0 && spec.g.lipschitz >= 0.0);

  report.add("beta(0) = 0", spec.beta(0.0) == 0.0,
             "beta(0) = " + std::to_string(spec.beta(0.0)));

  {
    bool ok = true;
    double worst = 0.0;
    const int n = 141;
    double prev_v = -3.0, prev_b = spec.beta(prev_v);
    for (int i = 1; i < n; ++i) {
      const double v = -3.0 + 7.0 * i / (n - 1);
      const double b = spec.beta(v);
      const double slope = std::abs(b - prev_b) / (v - prev_v);
      worst = std::max(worst, slope);
      if (slope > spec.beta.lipschitz * (1.0 + 1e-9) + 1e-12) ok = false;
      prev_v = v;
      prev_b = b;
    }
    report.add("sampled beta slopes within L_beta", ok,
               "max sampled slope = " + std::to_string(worst));
  }

  {
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      const double below = -2.0 + (2.0 - 1e-6) * i / 49.0;
      const double above = 1.0 + 1e-6 + 2.0 * i / 49.0;
      if (spec.g(below) != 0.0 || spec.g(above) != 0.0) ok = false;
    }
    report.add("supp g in [0,1]", ok);
  }

  {
    bool ok = true;
    double bad = 0.0;
    const int n = 33;
    std::array<double, 3> x{0.0, 0.0, 0.0};
    const int ny = dim >= 2 ? n : 1;
    const int nz = dim >= 3 ? n : 1;
    for (int k = 0; k < nz && ok; ++k)
      for (int j = 0; j < ny && ok; ++j)
        for (int i = 0; i < n && ok; ++i) {
          x[0] = extents[0] * i / (n - 1);
          if (dim >= 2) x[1] = extents[1] * j / (ny - 1 + (ny == 1));
          if (dim >= 3) x[2] = extents[2] * k / (nz - 1 + (nz == 1));
          const double v = spec.u0(x);
          if (!(v >= 0.0 && v <= 1.0)) {
            ok = false;
            bad = v;
          }
        }
    report.add("u0 in [0,1] at sampled points", ok,
               ok ? "" : "found u0 = " + std::to_string(bad));
  }

  {
    const double dt = spec.coupled_dt();
    report.add("dt (2 L_beta + 1) <= 3/4", dt_smallness_ok(dt, spec.beta.lipschitz),
               "coupled dt = " + std::to_string(dt));
  }

  return report;
}

// ---------------------------------------------------------------------------
// Projections of the data onto the mesh
// ---------------------------------------------------------------------------

namespace detail {
/// Cell bounding box from the structured grid when available; otherwise the
/// midpoint rule on x_K (exact for affine data) is all the mesh supports.
inline bool cell_box(const Mesh& mesh, std::size_t c, std::array<double, 3>& lo,
                     std::array<double, 3>& hi) {
  if (!mesh.grid_info()) return false;
  const auto& g = *mesh.grid_info();
  const auto& center = mesh.cells()[c].center;
  for (int a = 0; a < mesh.dim(); ++a) {
    const auto ia = static_cast<std::size_t>(a);
    lo[ia] = center[ia] - 0.5 * g.cell_size[ia];
    hi[ia] = center[ia] + 0.5 * g.cell_size[ia];
  }
  return true;
}
}  // namespace detail

inline constexpr int kSpaceQuadOrder = 3;
inline constexpr int kTimeQuadOrder = 2;

/// u0_K = (1/m_K) int_K u0 dx by tensor Gauss quadrature (order 3 per axis).
inline CellField project_initial(const SpatialFunc& u0, const Mesh& mesh) {
  std::vector<double> values(mesh.n_cells());
  std::array<double, 3> lo{}, hi{};
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    if (detail::cell_box(mesh, c, lo, hi)) {
      values[c] = integrate_box(mesh.dim(), lo, hi, kSpaceQuadOrder,
                                [&](const std::array<double, 3>& x) { return u0(x); }) /
                  mesh.cells()[c].volume;
    } else {
      values[c] = u0(mesh.cells()[c].center);
    }
  }
  return CellField(mesh, std::move(values));
}

/// f^n_K = (1/(dt m_K)) int_{t_n}^{t_{n+1}} int_K f dx dt, Gauss in both.
inline CellField discretize_source(const SpaceTimeFunc& f, const Mesh& mesh, int n,
                                   double dt) {
  if (n < 0) throw validation_error("discretize_source: negative step index");
  const double t0 = n * dt, t1 = (n + 1) * dt;
  const auto time_rule = gauss_legendre(kTimeQuadOrder);
  std::vector<double> values(mesh.n_cells());
  std::array<double, 3> lo{}, hi{};
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    double acc = 0.0;
    for (const auto& q : time_rule) {
      const double t = 0.5 * (t0 + t1) + 0.5 * dt * q.node;
      double space;
      if (detail::cell_box(mesh, c, lo, hi)) {
        space = integrate_box(mesh.dim(), lo, hi, kSpaceQuadOrder,
                              [&](const std::array<double, 3>& x) { return f(t, x); }) /
                mesh.cells()[c].volume;
      } else {
        space = f(t, mesh.cells()[c].center);
      }
      acc += q.weight * space;
    }
    values[c] = 0.5 * acc;  // GL weights on [-1,1] sum to 2
  }
  return CellField(mesh, std::move(values));
}

/// L2 norm of u0 over the box domain by composite high-order quadrature.
inline double l2_norm_spatial(const SpatialFunc& u0, const std::array<double, 3>& extents,
                              int dim, int panels_per_axis = 16) {
  double total = 0.0;
  std::array<int, 3> np{panels_per_axis, dim >= 2 ? panels_per_axis : 1,
                        dim >= 3 ? panels_per_axis : 1};
  std::array<double, 3> step{};
  for (int a = 0; a < 3; ++a)
    step[static_cast<std::size_t>(a)] =
        extents[static_cast<std::size_t>(a)] / np[static_cast<std::size_t>(a)];
  std::array<double, 3> lo{}, hi{};
  for (int k = 0; k < np[2]; ++k)
    for (int j = 0; j < np[1]; ++j)
      for (int i = 0; i < np[0]; ++i) {
        lo = {i * step[0], j * step[1], k * step[2]};
        hi = {(i + 1) * step[0], (j + 1) * step[1], (k + 1) * step[2]};
        total += integrate_box(dim, lo, hi, 5, [&](const std::array<double, 3>& x) {
          const double v = u0(x);
          return v * v;
        });
      }
  return std::sqrt(total);
}

/// L2 norm of f over (0,T) x Lambda (deterministic f, so this is also the
/// L2(Omega x (0,T); L2) norm in the stability bound).
inline double l2_norm_spacetime(const SpaceTimeFunc& f, const std::array<double, 3>& extents,
                                int dim, double horizon, int panels = 16) {
  return std::sqrt(integrate_interval(0.0, horizon, panels, 5, [&](double t) {
    SpatialFunc slice{"slice", {}, [&f, t](const std::array<double, 3>& x) { return f(t, x); }};
    const double nrm = l2_norm_spatial(slice, extents, dim, 4);
    return nrm * nrm;
  }));
}

// ---------------------------------------------------------------------------
// Coupled refinement schedules
// ---------------------------------------------------------------------------

struct ScheduleLevel {
  double epsilon = 0.0;
  double dt = 0.0;
  int n_steps = 0;
  std::array<int, 3> resolution{1, 1, 1};
};

/// Nested (eps, dt, h) levels with dt_m = C eps_m^(2+theta) exact by deriving
/// eps from the integer step count.
struct CouplingSchedule {
  std::vector<ScheduleLevel> levels;
};

/// Builds `levels` nested levels: N_m = base_N 2^(kappa m) (so coarser paths
/// arise from the finest by block summation), resolution doubled per level,
/// eps_m = (T / (C N_m))^(1/(2+theta)).
inline CouplingSchedule build_schedule(const ModelSpec& spec, int levels,
                                       const std::array<int, 3>& base_resolution, int base_n,
                                       int dim, int kappa = 1) {
  if (levels < 2) throw validation_error("schedule needs at least 2 levels");
  if (base_n < 1) throw validation_error("base step count must be positive");
  if (kappa < 1) throw validation_error("kappa must be >= 1");
  CouplingSchedule schedule;
  for (int m = 0; m < levels; ++m) {
    ScheduleLevel lvl;
    lvl.n_steps = base_n << (kappa * m);
    lvl.dt = spec.horizon / lvl.n_steps;
    lvl.epsilon = std::pow(spec.horizon / (spec.coupling_constant * lvl.n_steps),
                           1.0 / (2.0 + spec.theta));
    for (int a = 0; a < dim; ++a)
      lvl.resolution[static_cast<std::size_t>(a)] =
          base_resolution[static_cast<std::size_t>(a)] << m;
    if (!(lvl.epsilon > 0.0 && lvl.epsilon < 1.0)) {
      std::ostringstream os;
      os << "schedule level " << m << " has epsilon = " << lvl.epsilon
         << " outside (0,1); increase base_N or the coupling constant";
      throw validation_error(os.str());
    }
    if (!dt_smallness_ok(lvl.dt, spec.beta.lipschitz)) {
      std::ostringstream os;
      os << "schedule level " << m << " violates dt (2 L_beta + 1) <= 3/4 (dt = " << lvl.dt
         << ")";
      throw validation_error(os.str());
    }
    schedule.levels.push_back(lvl);
  }
  return schedule;
}

}  // namespace sacfv
