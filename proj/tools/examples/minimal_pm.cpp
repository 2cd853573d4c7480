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

// Minimal library use: one virtual source, masked pressure matching on a
// reduced scene, metrics on the monitor grid.

#include <array>
#include <cstdio>
#include <random>

#include "psz/psz.hpp"

int main() {
  psz::SceneConfig cfg;
  cfg.num_freqs = 16;
  cfg.max_order = 6;
  const auto scene = psz::make_scene(cfg);

  const auto h_ctrl = psz::simulate_atf(scene.room, scene.speakers.positions,
                                        scene.control_points(), scene.freqs, scene.max_order());
  const auto h_mon = psz::simulate_atf(scene.room, scene.speakers.positions,
                                       scene.monitor_points(), scene.freqs, scene.max_order());

  std::mt19937_64 rng(1);
  const std::array<psz::Point3, 1> src{psz::sample_virtual_source(rng, scene)};
  const auto g_ctrl = psz::simulate_atf(scene.room, src, scene.control_bright.points, scene.freqs,
                                        scene.max_order());
  const auto g_mon = psz::simulate_atf(scene.room, src, scene.monitor_bright.points, scene.freqs,
                                       scene.max_order());

  const auto kf = static_cast<Eigen::Index>(scene.freqs.size());
  psz::TargetAtf target{psz::SpectralMatrix(kf, 144)};
  psz::SpectralMatrix monitor_target(kf, 289);
  for (Eigen::Index k = 0; k < kf; ++k) {
    for (Eigen::Index m = 0; m < 144; ++m) target.bright(k, m) = g_ctrl.data(k, m, 0);
    for (Eigen::Index m = 0; m < 289; ++m) monitor_target(k, m) = g_mon.data(k, m, 0);
  }

  std::printf("%-9s %8s %8s %8s %8s\n", "mask", "RE_B", "RE_D", "AC", "bAE");
  for (const auto& name : psz::mask_names()) {
    const auto a = psz::solve_masked_pm(h_ctrl, target, psz::mask_indices(name), 1e-2);
    const auto r = psz::evaluate_prefilters(h_mon, monitor_target, a, scene.ref_speaker());
    std::printf("%-9s %8.2f %8.2f %8.2f %8.2f\n", name.c_str(), r.b_re_b, r.b_re_d, r.b_ac, r.b_ae);
  }
}
