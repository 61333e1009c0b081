#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tlroa/errors.hpp"
#include "tlroa/integrate.hpp"
#include "tlroa/model.hpp"
#include "tlroa/network.hpp"
#include "tlroa/roa.hpp"

namespace tlroa {

inline constexpr const char* kToolkitVersion = "0.1.0";

inline std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
}

/// Trajectory CSV: `t_s, x1_rad, x2_rad_per_s, x3_rad_per_s`, with x2
/// recomputed from x3.
inline std::string trajectory_csv(const Trajectory& traj, double x2_max) {
  std::string out = "t_s, x1_rad, x2_rad_per_s, x3_rad_per_s\n";
  for (const auto& s : traj.samples) {
    out += fmt_double(s.t);
    out += ", ";
    out += fmt_double(s.state.x1);
    out += ", ";
    out += fmt_double(saturate_rate(s.state.x3, x2_max));
    out += ", ";
    out += fmt_double(s.state.x3);
    out += "\n";
  }
  return out;
}

/// Boundary CSV: `x1_rad, x3_rad_per_s` closed polyline, first row repeated
/// last.
inline std::string boundary_csv(const TlroaBoundary& b) {
  std::string out = "x1_rad, x3_rad_per_s\n";
  auto row = [&](const RomState& v) {
    out += fmt_double(v.x1);
    out += ", ";
    out += fmt_double(v.x3);
    out += "\n";
  };
  for (const auto& v : b.vertices) row(v);
  if (!b.vertices.empty()) row(b.vertices.front());
  return out;
}

/// Parses a boundary CSV back into vertices (drops the repeated last row).
inline std::vector<RomState> parse_boundary_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) ||
      detail::split_csv(line) !=
          std::vector<std::string>{"x1_rad", "x3_rad_per_s"})
    throw ValidationError("boundary CSV: expected header `x1_rad, x3_rad_per_s`");
  std::vector<RomState> vs;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split_csv(line);
    if (cols.size() != 2)
      throw ValidationError("boundary CSV:" + std::to_string(lineno) +
                            ": expected 2 columns");
    try {
      vs.push_back({std::stod(cols[0]), std::stod(cols[1])});
    } catch (const std::exception&) {
      throw ValidationError("boundary CSV:" + std::to_string(lineno) +
                            ": malformed number");
    }
  }
  if (vs.size() >= 2 && vs.front().x1 == vs.back().x1 &&
      vs.front().x3 == vs.back().x3)
    vs.pop_back();
  if (vs.size() < 3)
    throw ValidationError("boundary CSV: fewer than 3 vertices");
  return vs;
}

/// Oracle grid CSV: `x1_rad, x3_rad_per_s, converged`.
inline std::string roa_grid_csv(const RoaGrid& grid) {
  std::string out = "x1_rad, x3_rad_per_s, converged\n";
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    out += fmt_double(grid.points[i].x1);
    out += ", ";
    out += fmt_double(grid.points[i].x3);
    out += ", ";
    out += grid.converged[i] ? "1" : "0";
    out += "\n";
  }
  return out;
}

inline nlohmann::ordered_json fit_report_json(const FitResult& fit) {
  nlohmann::ordered_json j;
  j["r_lg_ohm"] = fit.r_lg;
  j["l_g_h"] = fit.l_g;
  j["f_corner_hz"] = fit.f_corner;
  j["slope_ohm_per_hz"] = fit.slope_m;
  j["window_hz"] = {fit.window_lo, fit.window_hi};
  j["residual_ohm"] = fit.residual;
  return j;
}

inline nlohmann::ordered_json boundary_sidecar_json(
    const TlroaBoundary& b, const std::string& config_hash,
    std::size_t n_seeds_requested, double seed_x1_extent) {
  nlohmann::ordered_json j;
  j["horizon_s"] = b.horizon_t;
  j["equilibrium"] = {{"x1_rad", b.equilibrium.state.x1},
                      {"x3_rad_per_s", b.equilibrium.state.x3},
                      {"branch_index", b.equilibrium.branch_index},
                      {"stability", to_string(b.equilibrium.stability)},
                      {"residual", b.equilibrium.residual_norm}};
  j["seed_settings"] = {{"n_seeds", n_seeds_requested},
                        {"x1_extent_rad", seed_x1_extent},
                        {"level_c", b.level_c},
                        {"p", {b.p.a11, b.p.a12, b.p.a22}}};
  j["refinement_stats"] = {{"n_seeds", b.stats.n_seeds},
                           {"n_vertices", b.stats.n_vertices},
                           {"inserted", b.stats.inserted},
                           {"max_depth_used", b.stats.max_depth_used},
                           {"max_gap", b.stats.max_gap},
                           {"unresolved_gaps", b.stats.unresolved_gaps}};
  j["x3_scale_rad_per_s"] = b.x3_scale;
  j["config_hash"] = config_hash;
  return j;
}

/// Run manifest: config hash, toolkit version and artifact checksums. The
/// manifest is the only output that carries timestamps.
class RunManifest {
 public:
  explicit RunManifest(std::string config_hash)
      : config_hash_(std::move(config_hash)) {}

  void add(const std::string& path, const std::string& content) {
    artifacts_.push_back({path, fnv1a64_hex(content)});
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash_;
    j["toolkit_version"] = kToolkitVersion;
    j["created_utc"] = now_utc();
    j["artifacts"] = nlohmann::ordered_json::array();
    for (const auto& [p, h] : artifacts_)
      j["artifacts"].push_back({{"path", p}, {"fnv64", h}});
    return j;
  }

 private:
  static std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&tt, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
  }

  std::string config_hash_;
  std::vector<std::pair<std::string, std::string>> artifacts_;
};

}  // namespace tlroa
