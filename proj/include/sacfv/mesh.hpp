#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sacfv/errors.hpp"

namespace sacfv {

/// Control volume: center point and d-dimensional measure.
/// For dim == 2 the third center coordinate is kept at zero.
struct Cell {
  std::array<double, 3> center{};
  double volume = 0.0;
};

/// Shared face between two control volumes K and L.
/// transmissibility = measure / center_distance, the TPFA flux coefficient.
/// The unit normal of the face plane is kept when the construction knows it
/// (generated grids); meshes ingested from file carry no normal and the
/// orthogonality check falls back to the center-distance consistency test.
struct InteriorEdge {
  std::int32_t k = -1;
  std::int32_t l = -1;
  double measure = 0.0;
  double center_distance = 0.0;
  double transmissibility = 0.0;
  std::array<double, 3> normal{};
  bool has_normal = false;
};

/// Boundary face. Carries no flux (homogeneous Neumann); kept so that
/// admissibility checks can see the full boundary.
struct ExteriorEdge {
  std::int32_t cell = -1;
  double measure = 0.0;
};

/// Structured origin of a mesh built by build_uniform_grid. Needed for
/// closed-form regularity, nested prolongation and cell-index arithmetic.
struct UniformGridInfo {
  std::array<int, 3> resolution{1, 1, 1};
  std::array<double, 3> extents{1.0, 1.0, 1.0};
  std::array<double, 3> cell_size{1.0, 1.0, 1.0};
};

enum class ViolationKind {
  nonpositive_cell_volume,
  nonpositive_edge_measure,
  nonpositive_center_distance,
  center_distance_mismatch,
  orthogonality,
  regularity_bound,
  volume_partition,
  disconnected,
  non_finite,
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::nonpositive_cell_volume: return "nonpositive_cell_volume";
    case ViolationKind::nonpositive_edge_measure: return "nonpositive_edge_measure";
    case ViolationKind::nonpositive_center_distance: return "nonpositive_center_distance";
    case ViolationKind::center_distance_mismatch: return "center_distance_mismatch";
    case ViolationKind::orthogonality: return "orthogonality";
    case ViolationKind::regularity_bound: return "regularity_bound";
    case ViolationKind::volume_partition: return "volume_partition";
    case ViolationKind::disconnected: return "disconnected";
    case ViolationKind::non_finite: return "non_finite";
  }
  return "unknown";
}

struct AdmissibilityViolation {
  ViolationKind kind{};
  int cell = -1;   // -1 when not cell-specific
  int edge = -1;   // -1 when not edge-specific
  double measured = 0.0;
  std::string detail;
};

struct AdmissibilityReport {
  bool pass = true;
  std::vector<AdmissibilityViolation> violations;

  std::string summary() const {
    std::ostringstream os;
    os << (pass ? "admissible" : "NOT admissible") << " (" << violations.size()
       << " violation" << (violations.size() == 1 ? "" : "s") << ")\n";
    for (const auto& v : violations) {
      os << "  " << to_string(v.kind);
      if (v.cell >= 0) os << " cell=" << v.cell;
      if (v.edge >= 0) os << " edge=" << v.edge;
      os << " measured=" << v.measured;
      if (!v.detail.empty()) os << " (" << v.detail << ")";
      os << "\n";
    }
    return os.str();
  }
};

/// Raw ingredients of a mesh. h, regularity and total_volume are computed
/// (or estimated, for file-ingested meshes without full geometry) when absent.
struct MeshParts {
  int dim = 2;
  std::vector<Cell> cells;
  std::vector<InteriorEdge> interior_edges;
  std::vector<ExteriorEdge> exterior_edges;
  std::optional<UniformGridInfo> grid;
  std::optional<double> h;
  std::optional<double> regularity;
  std::optional<double> total_volume;
};

/// Finite-volume mesh: cells, faces, transmissibilities and the regularity
/// number. Immutable after construction; safe to share across threads.
class Mesh {
 public:
  static Mesh from_parts(MeshParts parts);

  int dim() const { return dim_; }
  std::size_t n_cells() const { return cells_.size(); }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<InteriorEdge>& interior_edges() const { return interior_edges_; }
  const std::vector<ExteriorEdge>& exterior_edges() const { return exterior_edges_; }
  const std::optional<UniformGridInfo>& grid_info() const { return grid_; }

  /// Mesh size h: maximal cell diameter. Exact for generated grids; for
  /// file-ingested meshes estimated as the largest center distance.
  double h() const { return h_; }
  double regularity() const { return regularity_; }
  double total_volume() const { return total_volume_; }

  /// FNV-1a digest of the defining data; links field snapshots to meshes.
  std::uint64_t hash() const { return hash_; }

 private:
  Mesh() = default;

  int dim_ = 2;
  std::vector<Cell> cells_;
  std::vector<InteriorEdge> interior_edges_;
  std::vector<ExteriorEdge> exterior_edges_;
  std::optional<UniformGridInfo> grid_;
  double h_ = 0.0;
  double regularity_ = 0.0;
  double total_volume_ = 0.0;
  std::uint64_t hash_ = 0;
};

namespace detail {

inline void fnv1a(std::uint64_t& state, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    state ^= p[i];
    state *= 0x100000001b3ull;
  }
}

inline void fnv1a_f64(std::uint64_t& state, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  fnv1a(state, &bits, sizeof bits);
}

inline std::uint64_t mesh_digest(int dim, const std::vector<Cell>& cells,
                                 const std::vector<InteriorEdge>& ie,
                                 const std::vector<ExteriorEdge>& ee) {
  std::uint64_t s = 0xcbf29ce484222325ull;
  std::int64_t header[3] = {dim, static_cast<std::int64_t>(cells.size()),
                            static_cast<std::int64_t>(ie.size())};
  fnv1a(s, header, sizeof header);
  for (const auto& c : cells) {
    fnv1a_f64(s, c.volume);
    for (int a = 0; a < dim; ++a) fnv1a_f64(s, c.center[static_cast<std::size_t>(a)]);
  }
  for (const auto& e : ie) {
    fnv1a(s, &e.k, sizeof e.k);
    fnv1a(s, &e.l, sizeof e.l);
    fnv1a_f64(s, e.measure);
    fnv1a_f64(s, e.center_distance);
  }
  for (const auto& e : ee) {
    fnv1a(s, &e.cell, sizeof e.cell);
    fnv1a_f64(s, e.measure);
  }
  return s;
}

inline double grid_diameter(const UniformGridInfo& g, int dim) {
  double sq = 0.0;
  for (int a = 0; a < dim; ++a) sq += g.cell_size[static_cast<std::size_t>(a)] * g.cell_size[static_cast<std::size_t>(a)];
  return std::sqrt(sq);
}

/// Closed-form reg(T) of a uniform box grid: the vertex-incidence count is
/// 4 (d=2) or 12 (d=3, counting faces), and diam(K)/d(x_K,sigma) peaks on
/// the faces orthogonal to the shortest cell axis.
inline double grid_regularity(const UniformGridInfo& g, int dim) {
  const double vertex_incidence = (dim == 2) ? 4.0 : 12.0;
  double min_side = g.cell_size[0];
  for (int a = 1; a < dim; ++a) min_side = std::min(min_side, g.cell_size[static_cast<std::size_t>(a)]);
  const double ratio = grid_diameter(g, dim) / (0.5 * min_side);
  return std::max(vertex_incidence, ratio);
}

}  // namespace detail

inline Mesh Mesh::from_parts(MeshParts parts) {
  if (parts.dim != 2 && parts.dim != 3)
    throw validation_error("mesh dimension must be 2 or 3");
  const auto n = static_cast<std::int32_t>(parts.cells.size());
  if (n == 0) throw validation_error("mesh has no cells");
  for (const auto& e : parts.interior_edges) {
    if (e.k < 0 || e.k >= n || e.l < 0 || e.l >= n || e.k == e.l)
      throw validation_error("interior edge references invalid cell index");
  }
  for (const auto& e : parts.exterior_edges) {
    if (e.cell < 0 || e.cell >= n)
      throw validation_error("exterior edge references invalid cell index");
  }

  Mesh m;
  m.dim_ = parts.dim;
  m.cells_ = std::move(parts.cells);
  m.interior_edges_ = std::move(parts.interior_edges);
  m.exterior_edges_ = std::move(parts.exterior_edges);
  m.grid_ = parts.grid;
  for (auto& e : m.interior_edges_) {
    e.transmissibility = (e.center_distance != 0.0) ? e.measure / e.center_distance : 0.0;
  }

  double min_d = 0.0, max_d = 0.0;
  if (!m.interior_edges_.empty()) {
    min_d = max_d = m.interior_edges_[0].center_distance;
    for (const auto& e : m.interior_edges_) {
      min_d = std::min(min_d, e.center_distance);
      max_d = std::max(max_d, e.center_distance);
    }
  }

  if (parts.total_volume) {
    m.total_volume_ = *parts.total_volume;
  } else if (m.grid_) {
    double v = 1.0;
    for (int a = 0; a < m.dim_; ++a) v *= m.grid_->extents[static_cast<std::size_t>(a)];
    m.total_volume_ = v;
  } else {
    double v = 0.0;
    for (const auto& c : m.cells_) v += c.volume;
    m.total_volume_ = v;
  }

  if (parts.h) {
    m.h_ = *parts.h;
  } else if (m.grid_) {
    m.h_ = detail::grid_diameter(*m.grid_, m.dim_);
  } else {
    m.h_ = max_d;  // estimate; exact diameters are not recoverable from file data
  }

  if (parts.regularity) {
    m.regularity_ = *parts.regularity;
  } else if (m.grid_) {
    m.regularity_ = detail::grid_regularity(*m.grid_, m.dim_);
  } else {
    m.regularity_ = (min_d > 0.0) ? m.h_ / min_d : 0.0;
  }

  m.hash_ = detail::mesh_digest(m.dim_, m.cells_, m.interior_edges_, m.exterior_edges_);
  return m;
}

/// Axis-aligned uniform box grid on [0,extents]. Cell centers are centroids,
/// so center segments are orthogonal to the shared faces by construction.
inline Mesh build_uniform_grid(int dim, std::span<const double> extents,
                               std::span<const int> resolution) {
  if (dim != 2 && dim != 3) throw validation_error("dim must be 2 or 3");
  if (extents.size() != static_cast<std::size_t>(dim) ||
      resolution.size() != static_cast<std::size_t>(dim))
    throw validation_error("extents/resolution size must match dim");
  for (int a = 0; a < dim; ++a) {
    if (!(extents[static_cast<std::size_t>(a)] > 0.0))
      throw validation_error("extents must be positive");
    if (resolution[static_cast<std::size_t>(a)] < 1)
      throw validation_error("resolution must be >= 1");
  }

  UniformGridInfo g;
  for (int a = 0; a < dim; ++a) {
    const auto ia = static_cast<std::size_t>(a);
    g.resolution[ia] = resolution[ia];
    g.extents[ia] = extents[ia];
    g.cell_size[ia] = extents[ia] / resolution[ia];
  }
  if (dim == 2) {
    g.resolution[2] = 1;
    g.extents[2] = 1.0;
    g.cell_size[2] = 1.0;
  }

  const int nx = g.resolution[0], ny = g.resolution[1], nz = g.resolution[2];
  const double sx = g.cell_size[0], sy = g.cell_size[1], sz = g.cell_size[2];
  double cell_volume = sx * sy;
  if (dim == 3) cell_volume *= sz;

  MeshParts parts;
  parts.dim = dim;
  parts.grid = g;
  parts.cells.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        Cell c;
        c.center = {(i + 0.5) * sx, (j + 0.5) * sy, dim == 3 ? (k + 0.5) * sz : 0.0};
        c.volume = cell_volume;
        parts.cells.push_back(c);
      }

  auto cell_id = [&](int i, int j, int k) {
    return static_cast<std::int32_t>(i + nx * (j + static_cast<std::int64_t>(ny) * k));
  };
  const std::array<double, 3> side{sx, sy, sz};
  // face measure orthogonal to axis a
  auto face_measure = [&](int a) {
    double mface = 1.0;
    for (int b = 0; b < dim; ++b)
      if (b != a) mface *= side[static_cast<std::size_t>(b)];
    return mface;
  };

  for (int a = 0; a < dim; ++a) {
    const double mface = face_measure(a);
    std::array<double, 3> normal{};
    normal[static_cast<std::size_t>(a)] = 1.0;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const std::array<int, 3> idx{i, j, k};
          if (idx[static_cast<std::size_t>(a)] + 1 >= g.resolution[static_cast<std::size_t>(a)]) continue;
          std::array<int, 3> nb = idx;
          nb[static_cast<std::size_t>(a)] += 1;
          InteriorEdge e;
          e.k = cell_id(i, j, k);
          e.l = cell_id(nb[0], nb[1], nb[2]);
          e.measure = mface;
          e.center_distance = side[static_cast<std::size_t>(a)];
          e.normal = normal;
          e.has_normal = true;
          parts.interior_edges.push_back(e);
        }
  }

  for (int a = 0; a < dim; ++a) {
    const double mface = face_measure(a);
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const std::array<int, 3> idx{i, j, k};
          const int pos = idx[static_cast<std::size_t>(a)];
          const int last = g.resolution[static_cast<std::size_t>(a)] - 1;
          if (pos == 0) parts.exterior_edges.push_back({cell_id(i, j, k), mface});
          if (pos == last) parts.exterior_edges.push_back({cell_id(i, j, k), mface});
        }
  }

  return Mesh::from_parts(std::move(parts));
}

/// reg(T): vertex-incidence count vs. diam(K)/d(x_K,sigma), whichever is
/// larger. Closed form for generated grids; the stored estimate otherwise.
inline double regularity(const Mesh& mesh) {
  if (mesh.grid_info()) return detail::grid_regularity(*mesh.grid_info(), mesh.dim());
  for (const auto& e : mesh.interior_edges())
    if (!(e.center_distance > 0.0))
      throw validation_error("regularity undefined: zero center distance");
  return mesh.regularity();
}

/// Checks the admissibility conditions that the stored data can express.
/// Violations are returned as data; nothing throws on a bad mesh.
inline AdmissibilityReport check_admissibility(const Mesh& mesh) {
  AdmissibilityReport report;
  auto flag = [&](AdmissibilityViolation v) {
    report.pass = false;
    report.violations.push_back(std::move(v));
  };

  const double angular_tol = 1e-10;
  const double rel_tol = 1e-10;

  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    const auto& cell = mesh.cells()[c];
    if (!std::isfinite(cell.volume) || !std::isfinite(cell.center[0]) ||
        !std::isfinite(cell.center[1]) || !std::isfinite(cell.center[2])) {
      flag({ViolationKind::non_finite, static_cast<int>(c), -1, cell.volume, "cell data"});
      continue;
    }
    if (!(cell.volume > 0.0))
      flag({ViolationKind::nonpositive_cell_volume, static_cast<int>(c), -1, cell.volume, ""});
  }

  for (std::size_t idx = 0; idx < mesh.interior_edges().size(); ++idx) {
    const auto& e = mesh.interior_edges()[idx];
    const int ei = static_cast<int>(idx);
    if (!(e.measure > 0.0))
      flag({ViolationKind::nonpositive_edge_measure, -1, ei, e.measure, ""});
    if (!(e.center_distance > 0.0)) {
      flag({ViolationKind::nonpositive_center_distance, -1, ei, e.center_distance, ""});
      continue;
    }
    const auto& xk = mesh.cells()[static_cast<std::size_t>(e.k)].center;
    const auto& xl = mesh.cells()[static_cast<std::size_t>(e.l)].center;
    std::array<double, 3> v{xl[0] - xk[0], xl[1] - xk[1], xl[2] - xk[2]};
    const double vnorm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(vnorm > 0.0)) {
      flag({ViolationKind::nonpositive_center_distance, -1, ei, vnorm,
            "coincident cell centers"});
      continue;
    }
    if (std::abs(vnorm - e.center_distance) > rel_tol * e.center_distance)
      flag({ViolationKind::center_distance_mismatch, -1, ei, vnorm,
            "stored d_KL inconsistent with |x_K - x_L|"});
    if (e.has_normal) {
      // small-angle-safe: sin(theta) from the component of v orthogonal to n
      const double dot = v[0] * e.normal[0] + v[1] * e.normal[1] + v[2] * e.normal[2];
      std::array<double, 3> perp{v[0] - dot * e.normal[0], v[1] - dot * e.normal[1],
                                 v[2] - dot * e.normal[2]};
      const double pn = std::sqrt(perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2]);
      const double angle = std::asin(std::min(1.0, pn / vnorm));
      if (angle > angular_tol)
        flag({ViolationKind::orthogonality, -1, ei, angle,
              "center segment not orthogonal to face"});
    }
    if (mesh.h() > 0.0 &&
        mesh.h() / e.center_distance > mesh.regularity() * (1.0 + 1e-12))
      flag({ViolationKind::regularity_bound, -1, ei, mesh.h() / e.center_distance,
            "h/d_KL exceeds reg(T)"});
  }

  for (std::size_t idx = 0; idx < mesh.exterior_edges().size(); ++idx) {
    const auto& e = mesh.exterior_edges()[idx];
    if (!(e.measure > 0.0))
      flag({ViolationKind::nonpositive_edge_measure, -1, static_cast<int>(idx), e.measure,
            "exterior edge"});
  }

  // partition of the domain; only checkable when |Lambda| is known independently
  if (mesh.grid_info()) {
    double sum = 0.0;
    for (const auto& c : mesh.cells()) sum += c.volume;
    if (std::abs(sum - mesh.total_volume()) > 1e-12 * mesh.total_volume())
      flag({ViolationKind::volume_partition, -1, -1, sum,
            "sum of cell volumes differs from |Lambda|"});
  }

  // connectivity over the interior-edge adjacency graph
  {
    std::vector<char> seen(mesh.n_cells(), 0);
    std::vector<std::vector<std::int32_t>> adj(mesh.n_cells());
    for (const auto& e : mesh.interior_edges()) {
      adj[static_cast<std::size_t>(e.k)].push_back(e.l);
      adj[static_cast<std::size_t>(e.l)].push_back(e.k);
    }
    std::vector<std::int32_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const auto c = stack.back();
      stack.pop_back();
      for (auto nb : adj[static_cast<std::size_t>(c)]) {
        if (!seen[static_cast<std::size_t>(nb)]) {
          seen[static_cast<std::size_t>(nb)] = 1;
          ++reached;
          stack.push_back(nb);
        }
      }
    }
    if (reached != mesh.n_cells())
      flag({ViolationKind::disconnected, -1, -1, static_cast<double>(reached),
            "interior-edge adjacency graph is not connected"});
  }

  return report;
}

/// Piecewise-constant injection target check: true when `fine` refines
/// `coarse` by an integer factor per axis on the same box.
inline bool is_nested_refinement(const Mesh& coarse, const Mesh& fine) {
  if (!coarse.grid_info() || !fine.grid_info()) return false;
  if (coarse.dim() != fine.dim()) return false;
  const auto& gc = *coarse.grid_info();
  const auto& gf = *fine.grid_info();
  for (int a = 0; a < coarse.dim(); ++a) {
    const auto ia = static_cast<std::size_t>(a);
    if (std::abs(gc.extents[ia] - gf.extents[ia]) > 1e-12 * gc.extents[ia]) return false;
    if (gf.resolution[ia] % gc.resolution[ia] != 0) return false;
  }
  return true;
}

}  // namespace sacfv
