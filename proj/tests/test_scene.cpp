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

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "psz/scene.hpp"

namespace psz {
namespace {

TEST(MakeScene, DefaultCounts) {
  const Scene s = make_scene(SceneConfig{});
  EXPECT_EQ(s.control_bright.size(), 144u);
  EXPECT_EQ(s.control_dark.size(), 144u);
  EXPECT_EQ(s.monitor_bright.size(), 289u);
  EXPECT_EQ(s.monitor_dark.size(), 289u);
  EXPECT_EQ(s.speakers.size(), 30u);
  EXPECT_EQ(s.freqs.size(), 512u);
  EXPECT_EQ(s.max_order(), 30);
}

TEST(MakeScene, GridSpacingAndSpan) {
  const Scene s = make_scene(SceneConfig{});
  EXPECT_NEAR(s.control_bright.spacing_x, 0.4 / 11.0, 1e-15);
  EXPECT_NEAR(s.control_bright.spacing_x, 0.0364, 1e-4);
  EXPECT_NEAR(s.monitor_bright.spacing_x, 0.025, 1e-15);
  const auto& g = s.control_bright;
  EXPECT_NEAR(g.at(11, 0).x - g.at(0, 0).x, 0.4, 1e-12);
  EXPECT_NEAR(g.at(0, 11).y - g.at(0, 0).y, 0.4, 1e-12);
  // Row-major: ix selects x, iy selects y.
  EXPECT_NEAR(g.points[1].y - g.points[0].y, g.spacing_y, 1e-15);
  EXPECT_EQ(g.points[1].x, g.points[0].x);
}

TEST(MakeScene, ZonesAreEdgeToEdgeOneMeterApart) {
  const Scene s = make_scene(SceneConfig{});
  EXPECT_NEAR(s.bright.center.x, 3.3, 1e-12);
  EXPECT_NEAR(s.dark.center.x, 4.7, 1e-12);
  EXPECT_NEAR((s.dark.center.x - 0.2) - (s.bright.center.x + 0.2), 1.0, 1e-12);
  EXPECT_EQ(s.bright.center.y, 4.0);
  EXPECT_EQ(s.bright.center.z, 1.5);
}

TEST(MakeScene, LoudspeakerAngularConvention) {
  const Scene s = make_scene(SceneConfig{});
  const auto& p = s.speakers.positions;
  EXPECT_NEAR(p[0].x, 4.0 + 1.68, 1e-12);
  EXPECT_NEAR(p[0].y, 4.0, 1e-12);
  EXPECT_EQ(p[0].z, 1.5);
  for (std::size_t l = 0; l < p.size(); ++l) {
    EXPECT_NEAR(distance(p[l], s.speakers.center), 1.68, 1e-12);
    const auto& q = p[(l + 1) % p.size()];
    EXPECT_NEAR(distance(p[l], q), 2 * 1.68 * std::sin(kPi / 30), 1e-12);
  }
  // Speaker 15 sits at angle pi, nearest the bright zone at x = 3.3.
  EXPECT_EQ(s.ref_speaker(), 15u);
}

TEST(MakeScene, EverythingInsideRoom) {
  const Scene s = make_scene(SceneConfig{});
  for (const auto& p : s.control_points()) EXPECT_TRUE(s.room.contains(p));
  for (const auto& p : s.monitor_points()) EXPECT_TRUE(s.room.contains(p));
  for (const auto& p : s.speakers.positions) EXPECT_TRUE(s.room.contains(p));
}

TEST(MakeScene, RejectsGeometryOutsideRoom) {
  SceneConfig cfg;
  cfg.array_radius = 4.5;
  EXPECT_THROW(make_scene(cfg), ValidationError);
  cfg = {};
  cfg.zone_gap = 7.8;
  EXPECT_THROW(make_scene(cfg), ValidationError);
  cfg = {};
  cfg.source_r_max = 4.0;
  EXPECT_THROW(make_scene(cfg), ValidationError);
  cfg = {};
  cfg.plane_z = 3.0;
  EXPECT_THROW(make_scene(cfg), ValidationError);
}

TEST(MaskIndices, AllPatterns) {
  using V = std::vector<std::size_t>;
  EXPECT_EQ(mask_indices("Grid-12").side_indices, (V{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}));
  EXPECT_EQ(mask_indices("Grid-6").side_indices, (V{0, 2, 4, 6, 8, 10}));
  EXPECT_EQ(mask_indices("Grid-4").side_indices, (V{1, 4, 7, 10}));
  EXPECT_EQ(mask_indices("Grid-3#1").side_indices, (V{1, 5, 9}));
  EXPECT_EQ(mask_indices("Grid-3#2").side_indices, (V{2, 5, 8}));
  EXPECT_EQ(mask_indices("Grid-3#3").side_indices, (V{3, 5, 7}));
  EXPECT_EQ(mask_indices("Grid-2#1").side_indices, (V{2, 8}));
  EXPECT_EQ(mask_indices("Grid-2#2").side_indices, (V{3, 7}));
  EXPECT_EQ(mask_indices("Grid-2#3").side_indices, (V{5, 6}));
  EXPECT_EQ(mask_indices("Grid-1").side_indices, (V{5}));
  EXPECT_THROW(mask_indices("Grid-5"), ValidationError);
}

TEST(MaskIndices, PointCounts) {
  const std::vector<std::size_t> want{144, 36, 16, 9, 9, 9, 4, 4, 4, 1};
  const auto names = mask_names();
  ASSERT_EQ(names.size(), want.size());
  for (std::size_t i = 0; i < names.size(); ++i)
    EXPECT_EQ(mask_indices(names[i]).point_count(), want[i]) << names[i];
}

TEST(MaskIndices, SymmetryProperties) {
  for (const auto& name : mask_names()) {
    const auto p = mask_indices(name);
    for (std::size_t i = 1; i < p.side_indices.size(); ++i)
      EXPECT_LT(p.side_indices[i - 1], p.side_indices[i]);
    // The 2-D set is a Cartesian square: invariant under transposition.
    for (std::size_t ix = 0; ix < kControlSide; ++ix)
      for (std::size_t iy = 0; iy < kControlSide; ++iy)
        EXPECT_EQ(p.selects(ix, iy), p.selects(iy, ix));
    // Mirror symmetry i -> 11 - i holds exactly when 2 * offset + span = 11.
    const std::size_t span = p.side_indices.back() - p.side_indices.front();
    bool mirrored = true;
    for (std::size_t i : p.side_indices)
      mirrored = mirrored && std::binary_search(p.side_indices.begin(), p.side_indices.end(), 11 - i);
    EXPECT_EQ(mirrored, 2 * p.side_indices.front() + span == 11) << name;
  }
}

ComplexTensor3 random_grid_tensor(std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  ComplexTensor3 t(k, 12, 12);
  for (auto& v : t.data()) v = {n(rng), n(rng)};
  return t;
}

TEST(ApplyMask, IdentityForFullGrid) {
  const auto t = random_grid_tensor(5, 1);
  EXPECT_EQ(apply_mask(t, mask_indices("Grid-12")), t);
}

TEST(ApplyMask, KeepsSelectedCellsBitIdentical) {
  const auto t = random_grid_tensor(4, 2);
  for (const auto& name : mask_names()) {
    const auto p = mask_indices(name);
    const auto m = apply_mask(t, p);
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t nonzero = 0;
      for (std::size_t ix = 0; ix < 12; ++ix)
        for (std::size_t iy = 0; iy < 12; ++iy) {
          if (p.selects(ix, iy)) {
            EXPECT_EQ(m(k, ix, iy), t(k, ix, iy));
            ++nonzero;
          } else {
            EXPECT_EQ(m(k, ix, iy), cdouble(0.0, 0.0));
          }
        }
      EXPECT_EQ(nonzero, p.point_count());
    }
    EXPECT_EQ(apply_mask(m, p), m) << "idempotence " << name;
  }
}

TEST(ApplyMask, RejectsWrongShape) {
  EXPECT_THROW(apply_mask(ComplexTensor3(2, 12, 11), mask_indices("Grid-4")), ValidationError);
}

TEST(VirtualSource, RadiiInAnnulusAndAreaUniform) {
  std::mt19937_64 rng(42);
  const Point3 c{4.0, 4.0, 1.5};
  double mean_r2 = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Point3 p = sample_virtual_source(rng, 1.7, 3.5, c);
    const double r = std::hypot(p.x - c.x, p.y - c.y);
    EXPECT_GE(r, 1.7 - 1e-12);
    EXPECT_LE(r, 3.5 + 1e-12);
    EXPECT_EQ(p.z, 1.5);
    mean_r2 += r * r / n;
  }
  // r^2 is uniform on [2.89, 12.25]: mean 7.57, standard error ~0.027.
  EXPECT_NEAR(mean_r2, 7.57, 0.1);
}

TEST(VirtualSource, DeterministicForSeed) {
  std::mt19937_64 a(7), b(7);
  const Scene s = make_scene(SceneConfig{});
  for (int i = 0; i < 100; ++i) {
    const Point3 p = sample_virtual_source(a, s);
    EXPECT_EQ(p, sample_virtual_source(b, s));
    EXPECT_TRUE(s.room.contains(p));
  }
}

TEST(SceneConfig, ParsesKeyValueFile) {
  std::istringstream in("# desk scene\nnum_freqs = 128\nrt60=0.3  # seconds\n\nzone_gap = 1.2\n");
  const auto cfg = SceneConfig::parse(in);
  EXPECT_EQ(cfg.num_freqs, 128);
  EXPECT_EQ(cfg.rt60, 0.3);
  EXPECT_EQ(cfg.zone_gap, 1.2);
  EXPECT_TRUE(cfg.has("rt60"));
  EXPECT_FALSE(cfg.has("room_x"));
}

TEST(SceneConfig, RejectsMalformedInput) {
  std::istringstream unknown("colour = red\n");
  EXPECT_THROW(SceneConfig::parse(unknown), ValidationError);
  std::istringstream bad_number("rt60 = 0.3s\n");
  EXPECT_THROW(SceneConfig::parse(bad_number), ValidationError);
  std::istringstream no_eq("rt60 0.3\n");
  EXPECT_THROW(SceneConfig::parse(no_eq), ValidationError);
  std::istringstream non_int("num_freqs = 12.5\n");
  EXPECT_THROW(SceneConfig::parse(non_int), ValidationError);
}

TEST(SceneConfig, HashTracksSceneNotSeed) {
  SceneConfig a, b;
  b.seed = 99;
  EXPECT_EQ(a.hash(), b.hash());
  b.zone_gap = 1.1;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 8u);
  // Auto and explicit max order resolve to the same scene.
  SceneConfig c;
  c.max_order = 30;
  EXPECT_EQ(make_scene(a).hash(), make_scene(c).hash());
}

}  // namespace
}  // namespace psz
