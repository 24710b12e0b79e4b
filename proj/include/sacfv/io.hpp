#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sacfv/errors.hpp"
#include "sacfv/field.hpp"
#include "sacfv/mesh.hpp"
#include "sacfv/noise.hpp"

namespace sacfv {

// ---------------------------------------------------------------------------
// Formatting helpers
// ---------------------------------------------------------------------------

/// Reals are serialized with 17 significant digits, enough to round-trip
/// IEEE doubles exactly.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_hash(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw io_error("cannot open for writing: " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw io_error("cannot open for reading: " + p.string());
  return is;
}

/// Next line that is neither blank nor a comment; false at end of stream.
inline bool next_content_line(std::istream& is, std::string& line) {
  while (std::getline(is, line)) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size() || line[i] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mesh files
// ---------------------------------------------------------------------------
// Header `fvmesh <dim> <ncells> <n_int_edges> <n_ext_edges>`, then per cell
// `C <id> <m_K> <x_K coords...>`, per interior edge `I <K> <L> <m_sigma> <d_KL>`,
// per exterior edge `E <K> <m_sigma>`. `#` starts a comment line.

inline void write_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  auto os = detail::open_out(path);
  os << "fvmesh " << mesh.dim() << ' ' << mesh.n_cells() << ' '
     << mesh.interior_edges().size() << ' ' << mesh.exterior_edges().size() << '\n';
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    const auto& cell = mesh.cells()[c];
    os << "C " << c << ' ' << format_real(cell.volume);
    for (int a = 0; a < mesh.dim(); ++a)
      os << ' ' << format_real(cell.center[static_cast<std::size_t>(a)]);
    os << '\n';
  }
  for (const auto& e : mesh.interior_edges())
    os << "I " << e.k << ' ' << e.l << ' ' << format_real(e.measure) << ' '
       << format_real(e.center_distance) << '\n';
  for (const auto& e : mesh.exterior_edges())
    os << "E " << e.cell << ' ' << format_real(e.measure) << '\n';
  if (!os) throw io_error("write failed: " + path.string());
}

inline Mesh read_mesh(const std::filesystem::path& path) {
  auto is = detail::open_in(path);
  std::string line;
  if (!detail::next_content_line(is, line))
    throw io_error("mesh file is empty: " + path.string());
  std::istringstream header(line);
  std::string magic;
  int dim = 0;
  std::size_t ncells = 0, nint = 0, next = 0;
  header >> magic >> dim >> ncells >> nint >> next;
  if (!header || magic != "fvmesh")
    throw io_error("bad mesh header in " + path.string());
  if (ncells == 0) throw io_error("mesh file declares zero cells");

  MeshParts parts;
  parts.dim = dim;
  parts.cells.resize(ncells);
  std::vector<char> seen(ncells, 0);
  parts.interior_edges.reserve(nint);
  parts.exterior_edges.reserve(next);

  std::size_t got_cells = 0, got_int = 0, got_ext = 0;
  while (detail::next_content_line(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "C") {
      std::size_t id = 0;
      Cell cell;
      ls >> id >> cell.volume;
      for (int a = 0; a < dim; ++a) ls >> cell.center[static_cast<std::size_t>(a)];
      if (!ls) throw io_error("malformed cell line: " + line);
      if (id >= ncells) throw io_error("cell id out of range: " + line);
      if (seen[id]) throw io_error("duplicate cell id: " + line);
      seen[id] = 1;
      parts.cells[id] = cell;
      ++got_cells;
    } else if (tag == "I") {
      InteriorEdge e;
      ls >> e.k >> e.l >> e.measure >> e.center_distance;
      if (!ls) throw io_error("malformed interior edge line: " + line);
      parts.interior_edges.push_back(e);
      ++got_int;
    } else if (tag == "E") {
      ExteriorEdge e;
      ls >> e.cell >> e.measure;
      if (!ls) throw io_error("malformed exterior edge line: " + line);
      parts.exterior_edges.push_back(e);
      ++got_ext;
    } else {
      throw io_error("unknown record tag '" + tag + "' in " + path.string());
    }
  }
  if (got_cells != ncells || got_int != nint || got_ext != next)
    throw io_error("mesh file record counts disagree with header: " + path.string());
  return Mesh::from_parts(std::move(parts));
}

// ---------------------------------------------------------------------------
// Field snapshots
// ---------------------------------------------------------------------------
// Header `fvfield <mesh_hash> <ncells>`, one value per line.

inline void write_field(const CellField& field, const std::filesystem::path& path) {
  auto os = detail::open_out(path);
  os << "fvfield " << format_hash(field.mesh().hash()) << ' ' << field.size() << '\n';
  for (std::size_t c = 0; c < field.size(); ++c) os << format_real(field[c]) << '\n';
  if (!os) throw io_error("write failed: " + path.string());
}

inline CellField read_field(const std::filesystem::path& path, const Mesh& mesh) {
  auto is = detail::open_in(path);
  std::string line;
  if (!detail::next_content_line(is, line))
    throw io_error("field file is empty: " + path.string());
  std::istringstream header(line);
  std::string magic, hash_text;
  std::size_t ncells = 0;
  header >> magic >> hash_text >> ncells;
  if (!header || magic != "fvfield")
    throw io_error("bad field header in " + path.string());
  if (hash_text != format_hash(mesh.hash()))
    throw validation_error("field snapshot was written for a different mesh");
  if (ncells != mesh.n_cells())
    throw validation_error("field snapshot cell count mismatch");

  std::vector<double> values;
  values.reserve(ncells);
  while (detail::next_content_line(is, line)) {
    std::istringstream ls(line);
    double v;
    ls >> v;
    if (!ls) throw io_error("malformed field value line: " + line);
    values.push_back(v);
  }
  if (values.size() != ncells)
    throw io_error("field snapshot value count disagrees with header");
  return CellField(mesh, std::move(values));
}

// ---------------------------------------------------------------------------
// Space-time field store
// ---------------------------------------------------------------------------
// A directory of frame snapshots plus stfield.json holding N, dt and the
// seed/sample that drove the run.

inline void write_spacetime(const SpaceTimeField& stf, const std::filesystem::path& dir,
                            std::uint64_t seed, std::uint64_t sample_index) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory: " + dir.string());
  nlohmann::json manifest;
  manifest["n_steps"] = stf.n_steps();
  manifest["dt"] = stf.dt();
  manifest["seed"] = seed;
  manifest["sample_index"] = sample_index;
  manifest["mesh_hash"] = format_hash(stf.mesh().hash());
  std::vector<std::string> names;
  for (std::size_t n = 0; n < stf.n_frames(); ++n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06zu.txt", n);
    names.emplace_back(buf);
    write_field(stf.frame(n), dir / buf);
  }
  manifest["frames"] = names;
  auto os = detail::open_out(dir / "stfield.json");
  os << manifest.dump(2) << '\n';
}

inline SpaceTimeField read_spacetime(const std::filesystem::path& dir, const Mesh& mesh) {
  auto is = detail::open_in(dir / "stfield.json");
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad stfield.json: " + std::string(e.what()));
  }
  if (manifest.at("mesh_hash").get<std::string>() != format_hash(mesh.hash()))
    throw validation_error("space-time store was written for a different mesh");
  SpaceTimeField stf(mesh, manifest.at("n_steps").get<int>(),
                     manifest.at("dt").get<double>());
  for (const auto& name : manifest.at("frames"))
    stf.append(read_field(dir / name.get<std::string>(), mesh));
  if (!stf.complete()) throw io_error("space-time store is missing frames");
  return stf;
}

// ---------------------------------------------------------------------------
// Brownian path dumps
// ---------------------------------------------------------------------------
// Header `bw <seed> <sample> <N> <dt>`, one increment per line.

inline void write_path(const BrownianPath& path, const std::filesystem::path& file) {
  auto os = detail::open_out(file);
  os << "bw " << path.seed << ' ' << path.sample_index << ' ' << path.n_steps << ' '
     << format_real(path.dt) << '\n';
  for (double w : path.increments) os << format_real(w) << '\n';
  if (!os) throw io_error("write failed: " + file.string());
}

inline BrownianPath read_path(const std::filesystem::path& file) {
  auto is = detail::open_in(file);
  std::string line;
  if (!detail::next_content_line(is, line))
    throw io_error("path file is empty: " + file.string());
  std::istringstream header(line);
  std::string magic;
  BrownianPath path;
  header >> magic >> path.seed >> path.sample_index >> path.n_steps >> path.dt;
  if (!header || magic != "bw") throw io_error("bad path header in " + file.string());
  while (detail::next_content_line(is, line)) {
    std::istringstream ls(line);
    double v;
    ls >> v;
    if (!ls) throw io_error("malformed increment line: " + line);
    path.increments.push_back(v);
  }
  if (path.increments.size() != static_cast<std::size_t>(path.n_steps))
    throw io_error("path increment count disagrees with header");
  return path;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Minimal CSV writer; all cells are preformatted strings, rows written in
/// the order given (callers are responsible for deterministic ordering).
inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  auto os = detail::open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i)
    os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw validation_error("CSV row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
  if (!os) throw io_error("write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto os = detail::open_out(path);
  os << text;
  if (!os) throw io_error("write failed: " + path.string());
}

}  // namespace sacfv
