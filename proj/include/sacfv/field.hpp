#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "sacfv/errors.hpp"
#include "sacfv/mesh.hpp"

namespace sacfv {

/// One real value per control volume. The mesh is referenced, not owned;
/// it must outlive the field.
class CellField {
 public:
  CellField(const Mesh& mesh, std::vector<double> values)
      : mesh_(&mesh), values_(std::move(values)) {
    if (values_.size() != mesh.n_cells())
      throw validation_error("field length does not match mesh cell count");
    assert_finite();
  }

  CellField(const Mesh& mesh, double fill)
      : mesh_(&mesh), values_(mesh.n_cells(), fill) {
    if (!std::isfinite(fill)) throw non_finite_error("field fill value");
  }

  const Mesh& mesh() const { return *mesh_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  void assert_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) throw non_finite_error("field contains NaN/Inf");
  }

 private:
  const Mesh* mesh_;
  std::vector<double> values_;
};

inline void require_same_mesh(const CellField& a, const CellField& b) {
  if (&a.mesh() != &b.mesh() && a.mesh().hash() != b.mesh().hash())
    throw validation_error("fields live on different meshes");
}

/// ( sum_K m_K |w_K|^2 )^(1/2)
inline double l2_norm(const CellField& w) {
  double s = 0.0;
  const auto& cells = w.mesh().cells();
  for (std::size_t i = 0; i < w.size(); ++i) s += cells[i].volume * w[i] * w[i];
  return std::sqrt(s);
}

inline double l2_inner(const CellField& a, const CellField& b) {
  require_same_mesh(a, b);
  double s = 0.0;
  const auto& cells = a.mesh().cells();
  for (std::size_t i = 0; i < a.size(); ++i) s += cells[i].volume * a[i] * b[i];
  return s;
}

/// ( sum_{sigma=K|L} (m_sigma/d_KL) |w_K - w_L|^2 )^(1/2)
inline double h1_seminorm(const CellField& w) {
  double s = 0.0;
  for (const auto& e : w.mesh().interior_edges()) {
    const double d = w[static_cast<std::size_t>(e.k)] - w[static_cast<std::size_t>(e.l)];
    s += e.transmissibility * d * d;
  }
  return std::sqrt(s);
}

/// L2 norm of the edge-wise weak gradient; exterior edges contribute zero.
/// Evaluated per edge as (d_KL m_sigma / d) |d (w_K - w_L)/d_KL|^2, the
/// seminorm relation is left to the caller as a cross-check.
inline double weak_gradient_norm(const CellField& w) {
  const double dim = static_cast<double>(w.mesh().dim());
  double s = 0.0;
  for (const auto& e : w.mesh().interior_edges()) {
    const double jump = w[static_cast<std::size_t>(e.k)] - w[static_cast<std::size_t>(e.l)];
    const double grad = dim * jump / e.center_distance;
    s += (e.center_distance * e.measure / dim) * grad * grad;
  }
  return std::sqrt(s);
}

/// Both sides of the discrete partial integration identity
///   sum_K sum_{sigma=K|L in E_K} tau_sigma (w_K - w_L) wt_K
///     = sum_{sigma=K|L} tau_sigma (w_K - w_L)(wt_K - wt_L).
/// The left side is accumulated cell-major (per-cell flux sums dotted with
/// wt), the right side edge-major, so the two routes share no intermediate.
inline std::pair<double, double> partial_integration_sides(const CellField& w,
                                                           const CellField& wt) {
  require_same_mesh(w, wt);
  std::vector<double> flux(w.size(), 0.0);
  double rhs = 0.0;
  for (const auto& e : w.mesh().interior_edges()) {
    const auto k = static_cast<std::size_t>(e.k);
    const auto l = static_cast<std::size_t>(e.l);
    const double jump = w[k] - w[l];
    flux[k] += e.transmissibility * jump;
    flux[l] -= e.transmissibility * jump;
    rhs += e.transmissibility * jump * (wt[k] - wt[l]);
  }
  double lhs = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) lhs += flux[k] * wt[k];
  return {lhs, rhs};
}

/// |LHS - RHS| of the identity above.
inline double partial_integration_residual(const CellField& w, const CellField& wt) {
  const auto [lhs, rhs] = partial_integration_sides(w, wt);
  return std::abs(lhs - rhs);
}

/// Frames u_h^0 ... u_h^N of one run, with the uniform step dt.
/// Append-only while a run is in flight, immutable afterwards.
class SpaceTimeField {
 public:
  SpaceTimeField(const Mesh& mesh, int n_steps, double dt)
      : mesh_(&mesh), n_steps_(n_steps), dt_(dt) {
    if (n_steps < 1) throw validation_error("need at least one time step");
    if (!(dt > 0.0)) throw validation_error("dt must be positive");
    frames_.reserve(static_cast<std::size_t>(n_steps) + 1);
  }

  const Mesh& mesh() const { return *mesh_; }
  int n_steps() const { return n_steps_; }
  double dt() const { return dt_; }
  double horizon() const { return n_steps_ * dt_; }
  std::size_t n_frames() const { return frames_.size(); }
  bool complete() const { return frames_.size() == static_cast<std::size_t>(n_steps_) + 1; }

  const CellField& frame(std::size_t n) const { return frames_.at(n); }

  void append(CellField f) {
    if (complete()) throw validation_error("space-time field already complete");
    require_compatible(f);
    frames_.push_back(std::move(f));
  }

  /// Right interpolant: frame n+1 on [t_n, t_{n+1}), frame N at t = T.
  const CellField& evaluate_right(double t) const {
    const int n = locate(t);
    if (n == n_steps_) return frames_.back();
    return frames_.at(static_cast<std::size_t>(n) + 1);
  }

  /// Left interpolant: frame n on [t_n, t_{n+1}), frame 0 at t = 0 and
  /// frame N-1 at t = T (endpoint convention; measure-irrelevant).
  const CellField& evaluate_left(double t) const {
    const int n = locate(t);
    if (n == n_steps_) return frames_.at(static_cast<std::size_t>(n_steps_) - 1);
    return frames_.at(static_cast<std::size_t>(n));
  }

 private:
  void require_compatible(const CellField& f) const {
    if (f.size() != mesh_->n_cells())
      throw validation_error("frame size does not match mesh");
  }

  // index n of the half-open cell [t_n, t_{n+1}) containing t; n_steps at t = T
  int locate(double t) const {
    if (!complete()) throw validation_error("space-time field incomplete");
    const double T = horizon();
    if (t < 0.0 || t > T * (1.0 + 1e-12)) throw validation_error("time outside [0,T]");
    if (t >= T) return n_steps_;
    const int n = static_cast<int>(t / dt_);
    return std::min(n, n_steps_ - 1);
  }

  const Mesh* mesh_;
  int n_steps_;
  double dt_;
  std::vector<CellField> frames_;
};

/// Piecewise-constant injection onto a nested refinement: each fine cell
/// inherits its coarse parent's value. Preserves the L2 norm exactly.
inline CellField prolong(const CellField& field, const Mesh& fine_mesh) {
  const Mesh& coarse = field.mesh();
  if (!is_nested_refinement(coarse, fine_mesh))
    throw validation_error("prolong requires a nested uniform refinement");
  const auto& gc = *coarse.grid_info();
  const auto& gf = *fine_mesh.grid_info();
  std::array<int, 3> q{1, 1, 1};
  for (int a = 0; a < coarse.dim(); ++a) {
    const auto ia = static_cast<std::size_t>(a);
    q[ia] = gf.resolution[ia] / gc.resolution[ia];
  }
  std::vector<double> out(fine_mesh.n_cells());
  const int fnx = gf.resolution[0], fny = gf.resolution[1], fnz = gf.resolution[2];
  const int cnx = gc.resolution[0], cny = gc.resolution[1];
  for (int k = 0; k < fnz; ++k)
    for (int j = 0; j < fny; ++j)
      for (int i = 0; i < fnx; ++i) {
        const std::size_t fid = static_cast<std::size_t>(i) +
                                static_cast<std::size_t>(fnx) *
                                    (static_cast<std::size_t>(j) +
                                     static_cast<std::size_t>(fny) * static_cast<std::size_t>(k));
        const std::size_t cid = static_cast<std::size_t>(i / q[0]) +
                                static_cast<std::size_t>(cnx) *
                                    (static_cast<std::size_t>(j / q[1]) +
                                     static_cast<std::size_t>(cny) *
                                         static_cast<std::size_t>(k / q[2]));
        out[fid] = field[cid];
      }
  return CellField(fine_mesh, std::move(out));
}

/// Volume-weighted average back onto the coarse mesh; left inverse of prolong.
inline CellField restrict_to(const CellField& field, const Mesh& coarse_mesh) {
  const Mesh& fine = field.mesh();
  if (!is_nested_refinement(coarse_mesh, fine))
    throw validation_error("restrict requires a nested uniform refinement");
  const auto& gc = *coarse_mesh.grid_info();
  const auto& gf = *fine.grid_info();
  std::array<int, 3> q{1, 1, 1};
  for (int a = 0; a < coarse_mesh.dim(); ++a) {
    const auto ia = static_cast<std::size_t>(a);
    q[ia] = gf.resolution[ia] / gc.resolution[ia];
  }
  std::vector<double> acc(coarse_mesh.n_cells(), 0.0);
  std::vector<double> vol(coarse_mesh.n_cells(), 0.0);
  const int fnx = gf.resolution[0], fny = gf.resolution[1], fnz = gf.resolution[2];
  const int cnx = gc.resolution[0], cny = gc.resolution[1];
  for (int k = 0; k < fnz; ++k)
    for (int j = 0; j < fny; ++j)
      for (int i = 0; i < fnx; ++i) {
        const std::size_t fid = static_cast<std::size_t>(i) +
                                static_cast<std::size_t>(fnx) *
                                    (static_cast<std::size_t>(j) +
                                     static_cast<std::size_t>(fny) * static_cast<std::size_t>(k));
        const std::size_t cid = static_cast<std::size_t>(i / q[0]) +
                                static_cast<std::size_t>(cnx) *
                                    (static_cast<std::size_t>(j / q[1]) +
                                     static_cast<std::size_t>(cny) *
                                         static_cast<std::size_t>(k / q[2]));
        const double mv = fine.cells()[fid].volume;
        acc[cid] += mv * field[fid];
        vol[cid] += mv;
      }
  for (std::size_t c = 0; c < acc.size(); ++c) acc[c] /= vol[c];
  return CellField(coarse_mesh, std::move(acc));
}

}  // namespace sacfv
