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

// Reproduction metrics: relative energy error (RE), acoustic contrast (AC)
// and array effort (AE). All ratios are formed from mean energies; the
// broadband variants sum numerator and denominator energies over frequency
// before taking the ratio.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psz/common.hpp"

namespace psz {

inline constexpr double kClampDb = 300.0;

enum class Zone { bright, dark };

/// Numerator and denominator energies of one metric at one frequency.
struct EnergyRatio {
  double num = 0.0;
  double den = 0.0;

  EnergyRatio& operator+=(const EnergyRatio& o) {
    num += o.num;
    den += o.den;
    return *this;
  }
};

inline double mean_energy(std::span<const cdouble> v) {
  if (v.empty()) throw ValidationError("mean energy of an empty vector");
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return s / static_cast<double>(v.size());
}

/// 10 log10(num / den) clamped to [-300, 300] dB when either side is zero.
inline double ratio_db(const EnergyRatio& e) {
  if (e.num == 0.0 && e.den == 0.0) return 0.0;
  if (e.num == 0.0) return -kClampDb;
  if (e.den == 0.0) return kClampDb;
  return std::clamp(10.0 * std::log10(e.num / e.den), -kClampDb, kClampDb);
}

inline bool is_clamped(double db) { return std::abs(db) >= kClampDb; }

/// RE energies. The reference is always the bright-zone target, also for
/// the dark zone, whose own target is zero.
inline EnergyRatio re_energies(std::span<const cdouble> reproduced,
                               std::span<const cdouble> bright_target, Zone zone) {
  EnergyRatio e;
  e.den = mean_energy(bright_target);
  if (e.den == 0.0) throw NumericalError("RE reference energy is zero");
  if (zone == Zone::bright) {
    if (reproduced.size() != bright_target.size())
      throw ValidationError("RE: reproduced and target sizes differ");
    double s = 0.0;
    for (std::size_t m = 0; m < reproduced.size(); ++m)
      s += std::norm(reproduced[m] - bright_target[m]);
    e.num = s / static_cast<double>(reproduced.size());
  } else {
    e.num = mean_energy(reproduced);
  }
  return e;
}

inline double relative_energy_error(std::span<const cdouble> reproduced,
                                    std::span<const cdouble> bright_target, Zone zone) {
  return ratio_db(re_energies(reproduced, bright_target, zone));
}

inline EnergyRatio ac_energies(std::span<const cdouble> bright, std::span<const cdouble> dark) {
  return {mean_energy(bright), mean_energy(dark)};
}

inline double acoustic_contrast(std::span<const cdouble> bright, std::span<const cdouble> dark) {
  return ratio_db(ac_energies(bright, dark));
}

/// AE energies: sum_l |a_l|^2 against the effort |a_ref|^2 a single
/// reference speaker needs to render the same bright-zone mean energy,
/// |a_ref|^2 = mean |g_B|^2 / mean |H_{m,ref}|^2.
///
/// `h_bright` is the bright-zone transfer matrix (M_B x L), `g_bright` the
/// pressure actually reproduced there.
template <typename MatrixH>
EnergyRatio ae_energies(std::span<const cdouble> a, const MatrixH& h_bright,
                        std::span<const cdouble> g_bright, std::size_t ref) {
  if (static_cast<std::size_t>(h_bright.cols()) != a.size() || ref >= a.size())
    throw ValidationError("AE: speaker count mismatch");
  if (static_cast<std::size_t>(h_bright.rows()) != g_bright.size())
    throw ValidationError("AE: bright-zone point count mismatch");
  double col = 0.0;
  for (Eigen::Index m = 0; m < h_bright.rows(); ++m) col += std::norm(h_bright(m, ref));
  col /= static_cast<double>(h_bright.rows());
  if (col == 0.0) throw NumericalError("AE: reference speaker is silent in the bright zone");
  const double gb = mean_energy(g_bright);
  if (gb == 0.0) throw NumericalError("AE: zero bright-zone reproduction energy");
  double effort = 0.0;
  for (const auto& x : a) effort += std::norm(x);
  return {effort, gb / col};
}

template <typename MatrixH>
double array_effort(std::span<const cdouble> a, const MatrixH& h_bright,
                    std::span<const cdouble> g_bright, std::size_t ref) {
  return ratio_db(ae_energies(a, h_bright, g_bright, ref));
}

/// Per-frequency and broadband metrics of one pre-filter set.
struct MetricsReport {
  std::vector<double> re_b, re_d, ac, ae;  // dB per frequency
  double b_re_b = 0.0, b_re_d = 0.0, b_ac = 0.0, b_ae = 0.0;

  // metadata
  std::string method;
  std::string mask;
  double lambda = 0.0;
  long long sample = -1;
  std::uint64_t seed = 0;
  std::string config_hash;

  /// Any per-frequency or broadband value hit the +-300 dB clamp.
  bool clamped() const {
    auto any = [](const std::vector<double>& v) {
      for (double x : v)
        if (is_clamped(x)) return true;
      return false;
    };
    return any(re_b) || any(re_d) || any(ac) || any(ae) || is_clamped(b_re_b) ||
           is_clamped(b_re_d) || is_clamped(b_ac) || is_clamped(b_ae);
  }
};

}  // namespace psz
