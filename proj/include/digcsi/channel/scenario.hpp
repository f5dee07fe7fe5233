#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "digcsi/errors.hpp"
#include "digcsi/numeric/rng.hpp"

namespace digcsi::channel {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kSpeedOfLight = 299'792'458.0;

/// Geometry and radio parameters of the simulated cell. The base station sits
/// at the origin; the cell spans [-cell_edge/2, cell_edge/2] on both axes.
struct ScenarioConfig {
  double cell_edge_m = 100.0;
  std::uint32_t ue_count = 100;
  double walk_box_edge_m = 6.0;
  double walk_length_m = 100.0;
  double snapshot_spacing_m = 0.01;
  std::uint32_t antennas = 32;
  std::uint32_t subcarriers = 32;
  double carrier_hz = 2.655e9;
  double bandwidth_hz = 70e6;
  std::uint32_t cluster_count = 5;
  double rician_k_db = 9.0;
  double scatterer_min_radius_m = 10.0;
  double scatterer_max_radius_m = 80.0;
  double turn_sigma_rad = 0.1;
  std::uint64_t seed = 1;

  std::size_t snapshot_count() const {
    return static_cast<std::size_t>(std::llround(walk_length_m / snapshot_spacing_m));
  }

  void validate() const {
    if (!(cell_edge_m > 0) || !(walk_box_edge_m > 0) || !(snapshot_spacing_m > 0) ||
        !(walk_length_m > 0)) {
      throw ConfigError("scenario: lengths must be positive");
    }
    if (walk_box_edge_m >= cell_edge_m) {
      throw ConfigError("scenario: walk box of edge " + std::to_string(walk_box_edge_m) +
                        " m does not fit inside a cell of edge " + std::to_string(cell_edge_m) +
                        " m");
    }
    if (snapshot_spacing_m >= walk_box_edge_m) {
      throw ConfigError("scenario: snapshot spacing must be smaller than the walk box");
    }
    if (ue_count == 0) throw ConfigError("scenario: ue_count must be positive");
    if (antennas == 0 || subcarriers == 0) throw ConfigError("scenario: empty CSI matrix");
    if (snapshot_count() == 0) throw ConfigError("scenario: walk yields no snapshots");
    if (!(carrier_hz > 0) || !(bandwidth_hz > 0)) {
      throw ConfigError("scenario: frequencies must be positive");
    }
    if (!(scatterer_min_radius_m >= 0) || scatterer_max_radius_m < scatterer_min_radius_m) {
      throw ConfigError("scenario: invalid scatterer annulus");
    }
    if (!(turn_sigma_rad >= 0)) throw ConfigError("scenario: turn_sigma_rad must be >= 0");
  }
};

struct Point {
  double x = 0;
  double y = 0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Scatterer {
  Point position;
  double phase = 0;  // fixed random phase of the bounce
};

struct UeGeometry {
  std::uint32_t ue_id = 0;
  Point center;  // centre of the walk box; also the walk's start
  std::vector<Scatterer> scatterers;
};

/// Per-UE stream seed.
inline std::uint64_t ue_seed(const ScenarioConfig& config, std::uint32_t ue_id) {
  return numeric::derive_seed(config.seed, std::uint64_t{ue_id});
}

inline UeGeometry place_ue(const ScenarioConfig& config, std::uint32_t ue_id) {
  numeric::Rng rng(numeric::derive_seed(ue_seed(config, ue_id), "place"));
  const double half = 0.5 * (config.cell_edge_m - config.walk_box_edge_m);
  UeGeometry g;
  g.ue_id = ue_id;
  g.center = {rng.uniform(-half, half), rng.uniform(-half, half)};
  const double r2lo = config.scatterer_min_radius_m * config.scatterer_min_radius_m;
  const double r2hi = config.scatterer_max_radius_m * config.scatterer_max_radius_m;
  for (std::uint32_t p = 0; p < config.cluster_count; ++p) {
    const double r = std::sqrt(rng.uniform(r2lo, r2hi));  // area-uniform in the annulus
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    g.scatterers.push_back({{r * std::cos(a), r * std::sin(a)},
                            rng.uniform(0.0, 2.0 * std::numbers::pi)});
  }
  return g;
}

/// Places every UE of the scenario. Deterministic in `config.seed`.
inline std::vector<UeGeometry> place_ues(const ScenarioConfig& config) {
  config.validate();
  std::vector<UeGeometry> out;
  out.reserve(config.ue_count);
  for (std::uint32_t id = 0; id < config.ue_count; ++id) out.push_back(place_ue(config, id));
  return out;
}

struct WalkOptions {
  std::optional<double> initial_heading;  // radians; random when unset
  std::optional<double> turn_sigma;       // overrides config.turn_sigma_rad
};

/// Random walk inside the axis-aligned box of edge `walk_box_edge_m` centred at
/// `start`. Returns the position after each of `snapshot_count()` steps; every
/// step has length exactly `snapshot_spacing_m`. The heading turns by a wrapped
/// Gaussian each step and reflects specularly off the box walls.
inline std::vector<Point> random_walk(const ScenarioConfig& config, Point start,
                                      std::uint64_t seed, const WalkOptions& options = {}) {
  numeric::Rng rng(seed);
  const double half = 0.5 * config.walk_box_edge_m;
  const double lo_x = start.x - half, hi_x = start.x + half;
  const double lo_y = start.y - half, hi_y = start.y + half;
  const double step = config.snapshot_spacing_m;
  const double sigma = options.turn_sigma.value_or(config.turn_sigma_rad);
  double heading = options.initial_heading ? *options.initial_heading
                                           : rng.uniform(0.0, 2.0 * std::numbers::pi);
  const std::size_t n = config.snapshot_count();
  std::vector<Point> path;
  path.reserve(n);
  Point p = start;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && sigma > 0) {
      heading = std::remainder(heading + sigma * rng.normal(), 2.0 * std::numbers::pi);
    }
    double dx = step * std::cos(heading), dy = step * std::sin(heading);
    if (p.x + dx < lo_x || p.x + dx > hi_x) {
      dx = -dx;
      heading = std::atan2(dy, dx);
    }
    if (p.y + dy < lo_y || p.y + dy > hi_y) {
      dy = -dy;
      heading = std::atan2(dy, dx);
    }
    p = {p.x + dx, p.y + dy};
    path.push_back(p);
  }
  return path;
}

struct ChannelSnapshot {
  ComplexMatrix matrix;  // N_f x N_t; row n holds h_n^H
  std::uint32_t ue_id = 0;
  Point position;
};

/// Subcarrier frequencies: N_f points spaced bandwidth/N_f, centred on the carrier.
inline std::vector<double> subcarrier_frequencies(const ScenarioConfig& config) {
  std::vector<double> f(config.subcarriers);
  const double spacing = config.bandwidth_hz / config.subcarriers;
  const double mid = 0.5 * (static_cast<double>(config.subcarriers) - 1.0);
  for (std::uint32_t n = 0; n < config.subcarriers; ++n) {
    f[n] = config.carrier_hz + (static_cast<double>(n) - mid) * spacing;
  }
  return f;
}

struct PathComponent {
  Complex gain;
  double sin_angle = 0;  // sine of the departure angle w.r.t. array broadside
  double delay_s = 0;
};

/// Adds g * a(phi) * exp(-j 2 pi f_n tau) into h (stored conjugated, as rows of H).
inline void accumulate_path(ComplexMatrix& h, const PathComponent& path,
                            const std::vector<double>& freqs) {
  const auto nt = static_cast<std::size_t>(h.cols());
  std::vector<Complex> steer(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    steer[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k) * path.sin_angle);
  }
  for (std::size_t n = 0; n < freqs.size(); ++n) {
    const Complex coeff =
        path.gain * std::polar(1.0, -2.0 * std::numbers::pi * freqs[n] * path.delay_s);
    for (std::size_t k = 0; k < nt; ++k) {
      h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) += std::conj(coeff * steer[k]);
    }
  }
}

/// Multipath components seen by a UE at `position`: one LOS path plus one
/// single-bounce path per scatterer. The ULA lies along the y axis at the BS,
/// so sin(phi) = y / distance.
inline std::vector<PathComponent> path_components(const UeGeometry& geometry, Point position,
                                                  const ScenarioConfig& config) {
  constexpr double kMinRange = 1.0;  // keeps 1/d finite when a UE walks over the BS
  const Point bs{0.0, 0.0};
  double los_weight = 1.0, nlos_weight = 0.0;
  if (!geometry.scatterers.empty()) {
    if (std::isinf(config.rician_k_db) && config.rician_k_db > 0) {
      los_weight = 1.0;
      nlos_weight = 0.0;
    } else {
      const double k = std::pow(10.0, config.rician_k_db / 10.0);
      los_weight = std::sqrt(k / (k + 1.0));
      nlos_weight = std::sqrt(1.0 / ((k + 1.0) * static_cast<double>(geometry.scatterers.size())));
    }
  }
  std::vector<PathComponent> paths;
  const double d_los = distance(bs, position);
  paths.push_back({Complex(los_weight / std::max(d_los, kMinRange), 0.0),
                   d_los > 0 ? position.y / d_los : 0.0, d_los / kSpeedOfLight});
  if (nlos_weight == 0.0) return paths;
  for (const Scatterer& s : geometry.scatterers) {
    const double d1 = distance(bs, s.position);
    const double d2 = distance(s.position, position);
    const double len = d1 + d2;
    paths.push_back({std::polar(nlos_weight / std::max(len, kMinRange), s.phase),
                     d1 > 0 ? s.position.y / d1 : 0.0, len / kSpeedOfLight});
  }
  return paths;
}

inline ChannelSnapshot synthesize_from_paths(const std::vector<PathComponent>& paths,
                                             const ScenarioConfig& config) {
  ChannelSnapshot snap;
  snap.matrix = ComplexMatrix::Zero(config.subcarriers, config.antennas);
  const auto freqs = subcarrier_frequencies(config);
  for (const auto& p : paths) accumulate_path(snap.matrix, p, freqs);
  return snap;
}

inline ChannelSnapshot synthesize_channel(const UeGeometry& geometry, Point position,
                                          const ScenarioConfig& config) {
  ChannelSnapshot snap = synthesize_from_paths(path_components(geometry, position, config), config);
  snap.ue_id = geometry.ue_id;
  snap.position = position;
  return snap;
}

}  // namespace digcsi::channel
