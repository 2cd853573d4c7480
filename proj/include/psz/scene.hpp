// Copyright 2026 The PSZ Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Experiment geometry: circular loudspeaker array, bright/dark zones with
// control and monitor grids, virtual-source sampling and mask patterns.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "psz/common.hpp"
#include "psz/config.hpp"
#include "psz/room_acoustics.hpp"

namespace psz {

inline constexpr std::size_t kControlSide = 12;

struct ZoneSpec {
  Point3 center;
  double width = 0.4;   // along x
  double height = 0.4;  // along y
};

/// Regular planar grid, row-major: points[ix * ny + iy].
struct PointGrid {
  std::vector<Point3> points;
  std::size_t nx = 0;
  std::size_t ny = 0;
  double spacing_x = 0.0;
  double spacing_y = 0.0;

  std::size_t size() const { return points.size(); }
  const Point3& at(std::size_t ix, std::size_t iy) const { return points[ix * ny + iy]; }
};

/// Uniform n x n grid covering the zone footprint; corners lie on the zone edges.
inline PointGrid make_grid(const ZoneSpec& zone, std::size_t n) {
  if (n == 0) throw ValidationError("grid needs at least one point per side");
  PointGrid g;
  g.nx = g.ny = n;
  g.spacing_x = n > 1 ? zone.width / static_cast<double>(n - 1) : 0.0;
  g.spacing_y = n > 1 ? zone.height / static_cast<double>(n - 1) : 0.0;
  const double x0 = n > 1 ? zone.center.x - zone.width / 2 : zone.center.x;
  const double y0 = n > 1 ? zone.center.y - zone.height / 2 : zone.center.y;
  g.points.reserve(n * n);
  for (std::size_t ix = 0; ix < n; ++ix)
    for (std::size_t iy = 0; iy < n; ++iy)
      g.points.push_back({x0 + static_cast<double>(ix) * g.spacing_x,
                          y0 + static_cast<double>(iy) * g.spacing_y, zone.center.z});
  return g;
}

struct LoudspeakerArray {
  std::vector<Point3> positions;
  Point3 center;
  double radius = 0.0;

  std::size_t size() const { return positions.size(); }
};

/// L speakers on a horizontal circle; speaker l sits at angle 2 pi l / L.
inline LoudspeakerArray make_circular_array(const Point3& center, double radius,
                                            std::size_t count) {
  if (count == 0 || !(radius > 0.0))
    throw ValidationError("loudspeaker array needs count >= 1 and radius > 0");
  LoudspeakerArray a{{}, center, radius};
  for (std::size_t l = 0; l < count; ++l) {
    const double phi = 2.0 * kPi * static_cast<double>(l) / static_cast<double>(count);
    a.positions.push_back(
        {center.x + radius * std::cos(phi), center.y + radius * std::sin(phi), center.z});
  }
  return a;
}

/// Fully resolved experiment scene.
///
/// Control receivers are ordered bright zone first, then dark zone; the same
/// holds for monitor receivers.
struct Scene {
  SceneConfig config;  // max_order and ref_speaker resolved
  RoomSpec room;
  FrequencyGrid freqs;
  LoudspeakerArray speakers;
  ZoneSpec bright;
  ZoneSpec dark;
  PointGrid control_bright;
  PointGrid control_dark;
  PointGrid monitor_bright;
  PointGrid monitor_dark;

  std::size_t ref_speaker() const { return static_cast<std::size_t>(config.ref_speaker); }
  int max_order() const { return config.max_order; }
  std::string hash() const { return config.hash(); }

  std::vector<Point3> control_points() const {
    auto pts = control_bright.points;
    pts.insert(pts.end(), control_dark.points.begin(), control_dark.points.end());
    return pts;
  }
  std::vector<Point3> monitor_points() const {
    auto pts = monitor_bright.points;
    pts.insert(pts.end(), monitor_dark.points.begin(), monitor_dark.points.end());
    return pts;
  }
};

inline Scene make_scene(const SceneConfig& cfg) {
  if (cfg.num_speakers < 1 || cfg.control_n < 1 || cfg.monitor_n < 1 || cfg.num_freqs < 1)
    throw ValidationError("scene counts must be positive");
  if (!(cfg.zone_width > 0.0 && cfg.zone_height > 0.0 && cfg.zone_gap >= 0.0 &&
        cfg.array_radius > 0.0))
    throw ValidationError("scene lengths must be positive");
  if (!(cfg.source_r_min > 0.0 && cfg.source_r_min <= cfg.source_r_max))
    throw ValidationError("virtual-source radii must satisfy 0 < r_min <= r_max");

  RoomSpec room({cfg.room_x, cfg.room_y, cfg.room_z}, cfg.rt60, cfg.speed_of_sound);
  const Point3 mid{cfg.room_x / 2, cfg.room_y / 2, cfg.plane_z};
  const double offset = cfg.zone_gap / 2 + cfg.zone_width / 2;
  ZoneSpec bright{{mid.x - offset, mid.y, cfg.plane_z}, cfg.zone_width, cfg.zone_height};
  ZoneSpec dark{{mid.x + offset, mid.y, cfg.plane_z}, cfg.zone_width, cfg.zone_height};
  auto speakers = make_circular_array(mid, cfg.array_radius,
                                      static_cast<std::size_t>(cfg.num_speakers));

  SceneConfig resolved = cfg;
  if (resolved.max_order < 0) resolved.max_order = default_max_order(room);
  if (resolved.ref_speaker < 0) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < speakers.size(); ++l)
      if (distance(speakers.positions[l], bright.center) <
          distance(speakers.positions[best], bright.center))
        best = l;
    resolved.ref_speaker = static_cast<int>(best);
  }
  if (resolved.ref_speaker >= cfg.num_speakers)
    throw ValidationError("ref_speaker out of range");

  Scene s{resolved,
          room,
          FrequencyGrid::uniform(static_cast<std::size_t>(cfg.num_freqs), cfg.f_max),
          std::move(speakers),
          bright,
          dark,
          make_grid(bright, static_cast<std::size_t>(cfg.control_n)),
          make_grid(dark, static_cast<std::size_t>(cfg.control_n)),
          make_grid(bright, static_cast<std::size_t>(cfg.monitor_n)),
          make_grid(dark, static_cast<std::size_t>(cfg.monitor_n))};

  auto check = [&](const std::vector<Point3>& pts, const char* what) {
    for (const auto& p : pts)
      if (!room.contains(p)) throw ValidationError(std::string(what) + " outside room");
  };
  check(s.speakers.positions, "loudspeaker");
  check(s.control_points(), "control grid");
  check(s.monitor_points(), "monitor grid");
  const double reach = std::min({mid.x, cfg.room_x - mid.x, mid.y, cfg.room_y - mid.y});
  if (!(cfg.source_r_max < reach)) throw ValidationError("virtual-source annulus exceeds room");
  return s;
}

// -- Mask patterns ----------------------------------------------------------

struct MaskPattern {
  std::string name;
  std::vector<std::size_t> side_indices;  // applied to both grid axes

  std::size_t point_count() const { return side_indices.size() * side_indices.size(); }
  bool selects(std::size_t ix, std::size_t iy) const {
    return std::binary_search(side_indices.begin(), side_indices.end(), ix) &&
           std::binary_search(side_indices.begin(), side_indices.end(), iy);
  }
};

namespace detail {

struct MaskDef {
  std::string_view name;
  std::size_t count;
  std::size_t interval;
};

inline constexpr std::array<MaskDef, 10> kMasks = {{
    {"Grid-12", 12, 1},
    {"Grid-6", 6, 2},
    {"Grid-4", 4, 3},
    {"Grid-3#1", 3, 4},
    {"Grid-3#2", 3, 3},
    {"Grid-3#3", 3, 2},
    {"Grid-2#1", 2, 6},
    {"Grid-2#2", 2, 4},
    {"Grid-2#3", 2, 1},
    {"Grid-1", 1, 0},
}};

}  // namespace detail

inline std::vector<std::string> mask_names() {
  std::vector<std::string> out;
  for (const auto& m : detail::kMasks) out.emplace_back(m.name);
  return out;
}

/// Centered selection on the 0..11 axis: offset = floor((11 - span) / 2).
inline MaskPattern mask_indices(std::string_view name) {
  for (const auto& m : detail::kMasks) {
    if (m.name != name) continue;
    const std::size_t span = (m.count - 1) * m.interval;
    const std::size_t offset = (kControlSide - 1 - span) / 2;
    MaskPattern p{std::string(name), {}};
    for (std::size_t i = 0; i < m.count; ++i) p.side_indices.push_back(offset + i * m.interval);
    return p;
  }
  throw ValidationError("unknown mask pattern '" + std::string(name) + "'");
}

/// Zeroes every spatial cell outside the pattern; (K, 12, 12) in and out.
inline ComplexTensor3 apply_mask(const ComplexTensor3& target, const MaskPattern& pattern) {
  if (target.rows() != kControlSide || target.cols() != kControlSide)
    throw ValidationError("apply_mask expects a (K, 12, 12) tensor");
  ComplexTensor3 out = target;
  for (std::size_t k = 0; k < out.freqs(); ++k)
    for (std::size_t ix = 0; ix < kControlSide; ++ix)
      for (std::size_t iy = 0; iy < kControlSide; ++iy)
        if (!pattern.selects(ix, iy)) out(k, ix, iy) = cdouble{0.0, 0.0};
  return out;
}

// -- Virtual sources --------------------------------------------------------

/// 53-bit uniform draw on [0, 1); identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform over the annulus area around `center`, in the plane z = center.z.
inline Point3 sample_virtual_source(std::mt19937_64& rng, double r_min, double r_max,
                                    const Point3& center) {
  const double phi = 2.0 * kPi * uniform01(rng);
  const double r = std::sqrt(r_min * r_min + uniform01(rng) * (r_max * r_max - r_min * r_min));
  return {center.x + r * std::cos(phi), center.y + r * std::sin(phi), center.z};
}

inline Point3 sample_virtual_source(std::mt19937_64& rng, const Scene& scene) {
  const Point3 mid{scene.config.room_x / 2, scene.config.room_y / 2, scene.config.plane_z};
  return sample_virtual_source(rng, scene.config.source_r_min, scene.config.source_r_max, mid);
}

}  // namespace psz
