#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "sacfv/errors.hpp"
#include "sacfv/mesh.hpp"
#include "sacfv/model.hpp"
#include "sacfv/solver.hpp"

namespace sacfv {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------
// JSON schema (README documents it in full):
//   domain.extents    [Lx, Ly(, Lz)]        box domain; length fixes dim
//   domain.resolution [nx, ny(, nz)]        base mesh resolution
//   time.horizon      T > 0
//   time.steps        N (optional; see resolve_time_grid)
//   coupling.epsilon  eps (optional), .theta, .constant
//   model.beta/.g/.f/.u0  {name, params{...}}
//   solver.newton_tol/.newton_max_iter/.linear_tol/.linear_max_iter/.damping_min
//   noise.seed        64-bit master seed
//   ensemble.samples  sample count
//   study.levels/.kappa   convergence study shape
//   output.dir        artifact directory

struct Config {
  int dim = 2;
  std::array<double, 3> extents{1.0, 1.0, 1.0};
  std::array<int, 3> resolution{1, 1, 1};

  double horizon = 1.0;
  int steps = 0;  // 0 = derive from the coupling

  std::optional<double> epsilon;
  double theta = 1.0;
  double coupling_constant = 1.0;

  std::string beta_name = "zero";
  Params beta_params;
  std::string g_name = "zero";
  Params g_params;
  std::string f_name = "zero";
  Params f_params;
  std::string u0_name = "constant";
  Params u0_params{{"c", 0.5}};

  SolverConfig solver;
  std::uint64_t seed = 0;
  int samples = 1;
  int study_levels = 3;
  int study_kappa = 1;
  std::string output_dir = "out";

  nlohmann::json raw;  // full snapshot for manifests

  Mesh build_mesh() const {
    return build_uniform_grid(dim, std::span<const double>(extents.data(),
                                                           static_cast<std::size_t>(dim)),
                              std::span<const int>(resolution.data(),
                                                   static_cast<std::size_t>(dim)));
  }

  /// The (N, dt, eps) triple actually used: when `steps` is set, eps is
  /// derived so that dt = C eps^(2+theta) holds exactly; when only eps is
  /// given, T/(C eps^(2+theta)) must land on an integer step count.
  struct TimeGrid {
    int steps = 0;
    double dt = 0.0;
    double epsilon = 0.0;
  };

  TimeGrid resolve_time_grid() const {
    TimeGrid tg;
    if (steps > 0) {
      tg.steps = steps;
      tg.dt = horizon / steps;
      if (epsilon) {
        tg.epsilon = *epsilon;
        const double implied = coupling_constant * std::pow(*epsilon, 2.0 + theta);
        if (std::abs(implied - tg.dt) > 1e-9 * tg.dt)
          throw validation_error(
              "time.steps and coupling.epsilon are inconsistent: dt = T/N differs from "
              "C eps^(2+theta)");
      } else {
        tg.epsilon =
            std::pow(horizon / (coupling_constant * steps), 1.0 / (2.0 + theta));
      }
    } else if (epsilon) {
      tg.epsilon = *epsilon;
      tg.dt = coupling_constant * std::pow(*epsilon, 2.0 + theta);
      const double n_real = horizon / tg.dt;
      tg.steps = static_cast<int>(std::llround(n_real));
      if (tg.steps < 1 || std::abs(n_real - tg.steps) > 1e-9)
        throw validation_error(
            "coupling.epsilon does not divide the horizon into whole steps; set "
            "time.steps instead");
      tg.dt = horizon / tg.steps;
    } else {
      throw validation_error("config needs time.steps or coupling.epsilon");
    }
    if (!(tg.epsilon > 0.0 && tg.epsilon < 1.0))
      throw validation_error("resolved epsilon lies outside (0,1)");
    return tg;
  }

  ModelSpec build_model() const {
    const TimeGrid tg = resolve_time_grid();
    ModelSpec spec;
    spec.epsilon = tg.epsilon;
    spec.theta = theta;
    spec.coupling_constant = coupling_constant;
    spec.beta = make_beta(beta_name, beta_params);
    spec.g = make_g(g_name, g_params);
    spec.f = make_f(f_name, f_params);
    spec.u0 = make_u0(u0_name, u0_params);
    spec.horizon = horizon;
    return spec;
  }
};

namespace detail {

inline Params parse_params(const nlohmann::json& j) {
  Params p;
  if (!j.contains("params")) return p;
  for (const auto& [key, value] : j.at("params").items())
    p[key] = value.get<double>();
  return p;
}

template <typename T, std::size_t N>
void parse_axes(const nlohmann::json& j, std::array<T, N>& out, int& dim,
                const char* what) {
  if (!j.is_array() || (j.size() != 2 && j.size() != 3))
    throw validation_error(std::string(what) + " must be an array of 2 or 3 entries");
  if (dim == 0)
    dim = static_cast<int>(j.size());
  else if (dim != static_cast<int>(j.size()))
    throw validation_error("domain.extents and domain.resolution disagree on dimension");
  for (std::size_t a = 0; a < j.size(); ++a) out[a] = j[a].get<T>();
}

}  // namespace detail

inline Config parse_config(const nlohmann::json& j) {
  Config cfg;
  cfg.raw = j;
  int dim = 0;
  try {
    const auto& dom = j.at("domain");
    detail::parse_axes(dom.at("extents"), cfg.extents, dim, "domain.extents");
    detail::parse_axes(dom.at("resolution"), cfg.resolution, dim, "domain.resolution");
    cfg.dim = dim;

    const auto& time = j.at("time");
    cfg.horizon = time.at("horizon").get<double>();
    if (time.contains("steps")) cfg.steps = time.at("steps").get<int>();

    if (j.contains("coupling")) {
      const auto& c = j.at("coupling");
      if (c.contains("epsilon")) cfg.epsilon = c.at("epsilon").get<double>();
      if (c.contains("theta")) cfg.theta = c.at("theta").get<double>();
      if (c.contains("constant")) cfg.coupling_constant = c.at("constant").get<double>();
    }

    if (j.contains("model")) {
      const auto& m = j.at("model");
      auto read_func = [&](const char* key, std::string& name, Params& params) {
        if (!m.contains(key)) return;
        name = m.at(key).at("name").get<std::string>();
        params = detail::parse_params(m.at(key));
      };
      read_func("beta", cfg.beta_name, cfg.beta_params);
      read_func("g", cfg.g_name, cfg.g_params);
      read_func("f", cfg.f_name, cfg.f_params);
      read_func("u0", cfg.u0_name, cfg.u0_params);
    }

    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      if (s.contains("newton_tol")) cfg.solver.newton_tol = s.at("newton_tol").get<double>();
      if (s.contains("newton_max_iter"))
        cfg.solver.newton_max_iter = s.at("newton_max_iter").get<int>();
      if (s.contains("linear_tol")) cfg.solver.linear_tol = s.at("linear_tol").get<double>();
      if (s.contains("linear_max_iter"))
        cfg.solver.linear_max_iter = s.at("linear_max_iter").get<int>();
      if (s.contains("damping_min")) cfg.solver.damping_min = s.at("damping_min").get<double>();
    }

    if (j.contains("noise") && j.at("noise").contains("seed"))
      cfg.seed = j.at("noise").at("seed").get<std::uint64_t>();
    if (j.contains("ensemble") && j.at("ensemble").contains("samples"))
      cfg.samples = j.at("ensemble").at("samples").get<int>();
    if (j.contains("study")) {
      const auto& s = j.at("study");
      if (s.contains("levels")) cfg.study_levels = s.at("levels").get<int>();
      if (s.contains("kappa")) cfg.study_kappa = s.at("kappa").get<int>();
    }
    if (j.contains("output") && j.at("output").contains("dir"))
      cfg.output_dir = j.at("output").at("dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("config: ") + e.what());
  }

  if (!(cfg.horizon > 0.0)) throw validation_error("time.horizon must be positive");
  if (cfg.steps < 0) throw validation_error("time.steps must be positive when given");
  if (cfg.samples < 1) throw validation_error("ensemble.samples must be >= 1");
  if (cfg.study_levels < 2) throw validation_error("study.levels must be >= 2");
  if (cfg.study_kappa < 1) throw validation_error("study.kappa must be >= 1");
  cfg.solver.require_valid();
  return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

}  // namespace sacfv
