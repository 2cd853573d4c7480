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

// Frequency-domain acoustic transfer functions of a rectangular room.
//
// Transfer functions are assembled directly in the frequency domain by
// summing free-field Green's functions over the image sources of a shoebox
// room (Allen & Berkley image expansion). No time-domain impulse response
// is synthesized, so there is no sampling rate and no truncation window.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "psz/common.hpp"

namespace psz {

/// Rectangular room with uniform wall absorption derived from RT60.
///
/// rt60 == 0 denotes an anechoic room (reflection coefficient 0).
class RoomSpec {
 public:
  RoomSpec(std::array<double, 3> dims, double rt60, double speed_of_sound = 343.0)
      : dims_(dims), rt60_(rt60), c_(speed_of_sound) {
    for (double d : dims_)
      if (!(d > 0.0) || !std::isfinite(d))
        throw ValidationError("room dimensions must be positive and finite");
    if (!(rt60_ >= 0.0) || !std::isfinite(rt60_))
      throw ValidationError("rt60 must be finite and non-negative");
    if (!(c_ > 0.0) || !std::isfinite(c_))
      throw ValidationError("speed of sound must be positive");
  }

  const std::array<double, 3>& dims() const { return dims_; }
  double rt60() const { return rt60_; }
  double speed_of_sound() const { return c_; }
  double volume() const { return dims_[0] * dims_[1] * dims_[2]; }
  double surface() const {
    return 2.0 * (dims_[0] * dims_[1] + dims_[0] * dims_[2] + dims_[1] * dims_[2]);
  }
  Point3 center() const { return {dims_[0] / 2, dims_[1] / 2, dims_[2] / 2}; }

  /// Strictly inside the open box (0, Lx) x (0, Ly) x (0, Lz).
  bool contains(const Point3& p) const {
    return p.x > 0.0 && p.x < dims_[0] && p.y > 0.0 && p.y < dims_[1] &&
           p.z > 0.0 && p.z < dims_[2];
  }

 private:
  std::array<double, 3> dims_;
  double rt60_;
  double c_;
};

/// Pressure reflection coefficient shared by all six walls.
///
/// Sabine: alpha = 0.1611 V / (S RT60), beta = sqrt(1 - alpha).
inline double rt60_to_reflection(const RoomSpec& room) {
  if (room.rt60() == 0.0) return 0.0;
  const double alpha = 0.1611 * room.volume() / (room.surface() * room.rt60());
  if (alpha >= 1.0)
    throw ValidationError("rt60 " + std::to_string(room.rt60()) +
                          " s too short for this room (Sabine absorption >= 1)");
  return std::sqrt(1.0 - alpha);
}

/// Total reflection-count cap for which the latest image arrival exceeds RT60.
inline int default_max_order(const RoomSpec& room) {
  if (room.rt60() == 0.0) return 0;
  const auto& d = room.dims();
  const double min_dim = std::min({d[0], d[1], d[2]});
  return static_cast<int>(std::ceil(room.speed_of_sound() * room.rt60() / min_dim)) + 1;
}

/// exp(-j 2 pi f d / c) / (4 pi d).
///
/// The phase is evaluated as (-2 pi f) * (d / c), the same grouping the
/// image summation uses, so anechoic transfer functions match bit for bit.
inline cdouble green_free_field(const Point3& src, const Point3& rcv, double f, double c) {
  const double d = distance(src, rcv);
  if (d == 0.0) throw NumericalError("Green's function singular: source equals receiver");
  return std::polar(1.0 / (4.0 * kPi * d), -2.0 * kPi * f * (d / c));
}

struct ImageSource {
  Point3 position;
  double amplitude = 1.0;
  int order = 0;  // total number of wall reflections
};

namespace detail {

struct AxisImage {
  double coord;
  int reflections;
};

// Images along one axis: coord = (1 - 2q) s + 2 m L, with |m - q| + |m|
// reflections. Sorted by reflection count, then by coordinate.
inline std::vector<AxisImage> axis_images(double s, double len, int max_order) {
  std::vector<AxisImage> out;
  const int m_max = max_order / 2 + 1;
  for (int m = -m_max; m <= m_max; ++m) {
    for (int q = 0; q <= 1; ++q) {
      const int n = std::abs(m - q) + std::abs(m);
      if (n > max_order) continue;
      out.push_back({(1 - 2 * q) * s + 2.0 * m * len, n});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const AxisImage& a, const AxisImage& b) {
    return a.reflections != b.reflections ? a.reflections < b.reflections
                                          : a.coord < b.coord;
  });
  return out;
}

}  // namespace detail

/// Image expansion of `src` up to `max_order` total reflections, with an
/// explicit reflection coefficient. The first entry is always (src, 1.0).
inline std::vector<ImageSource> image_sources(const std::array<double, 3>& dims,
                                              double beta, const Point3& src,
                                              int max_order) {
  if (max_order < 0) throw ValidationError("max_order must be non-negative");
  if (!(beta >= 0.0 && beta < 1.0))
    throw ValidationError("reflection coefficient must lie in [0, 1)");
  const auto ix = detail::axis_images(src.x, dims[0], max_order);
  const auto iy = detail::axis_images(src.y, dims[1], max_order);
  const auto iz = detail::axis_images(src.z, dims[2], max_order);

  std::vector<ImageSource> out;
  for (const auto& ax : ix)
    for (const auto& ay : iy) {
      if (ax.reflections + ay.reflections > max_order) break;
      for (const auto& az : iz) {
        const int n = ax.reflections + ay.reflections + az.reflections;
        if (n > max_order) break;
        out.push_back({{ax.coord, ay.coord, az.coord}, std::pow(beta, n), n});
      }
    }
  std::stable_sort(out.begin(), out.end(), [](const ImageSource& a, const ImageSource& b) {
    return a.order < b.order;
  });
  return out;
}

inline std::vector<ImageSource> image_sources(const RoomSpec& room, const Point3& src,
                                              int max_order) {
  if (!room.contains(src)) throw ValidationError("image source origin outside room");
  return image_sources(room.dims(), rt60_to_reflection(room), src, max_order);
}

/// Acoustic transfer functions H(k, m, l): frequency x receiver x source.
struct AtfTensor {
  ComplexTensor3 data;
  FrequencyGrid freq_grid;

  std::size_t receivers() const { return data.rows(); }
  std::size_t sources() const { return data.cols(); }
  std::size_t freqs() const { return data.freqs(); }
};

namespace detail {

// Terms below this count are summed with exact phasors per bin; larger sets
// use a block-reseeded rotation recurrence on uniform grids.
inline constexpr std::size_t kExactTermLimit = 32;
inline constexpr std::size_t kReseedBlock = 128;

inline bool is_uniform(const FrequencyGrid& fg, double* f0, double* step) {
  const std::size_t k = fg.size();
  if (k < 2) return false;
  *f0 = fg[0];
  *step = (fg[k - 1] - fg[0]) / static_cast<double>(k - 1);
  const double tol = 1e-9 * std::max(1.0, fg[k - 1]);
  for (std::size_t i = 0; i < k; ++i)
    if (std::abs(fg[i] - (*f0 + static_cast<double>(i) * *step)) > tol) return false;
  return true;
}

// Sums gain_i * exp(-j 2 pi f tau_i) over terms for every frequency and
// writes bin k to out[k * stride]. Summation order is fixed per entry.
class PhasorAccumulator {
 public:
  explicit PhasorAccumulator(const FrequencyGrid& fg) : fg_(fg) {
    uniform_ = is_uniform(fg, &f0_, &step_);
  }

  void accumulate(std::span<const double> gain, std::span<const double> tau,
                  cdouble* out, std::size_t stride) {
    const std::size_t n = gain.size();
    const std::size_t kbins = fg_.size();
    if (!uniform_ || n <= kExactTermLimit) {
      for (std::size_t k = 0; k < kbins; ++k) {
        const double w = -2.0 * kPi * fg_[k];
        cdouble acc{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) acc += std::polar(gain[i], w * tau[i]);
        out[k * stride] = acc;
      }
      return;
    }

    constexpr std::size_t kLanes = 4;
    constexpr std::size_t kChunk = 256;  // images per L1-resident tile
    acc_r_.assign(kbins, 0.0);
    acc_i_.assign(kbins, 0.0);
    for (auto* a : {&wr_, &wi_, &zr_, &zi_}) a->resize(kChunk);

    for (std::size_t c0 = 0; c0 < n; c0 += kChunk) {
      const std::size_t cn = std::min(kChunk, n - c0);
      const std::size_t padded = (cn + kLanes - 1) / kLanes * kLanes;
      for (std::size_t i = 0; i < padded; ++i) {
        if (i < cn) {
          const cdouble z = std::polar(1.0, -2.0 * kPi * step_ * tau[c0 + i]);
          zr_[i] = z.real();
          zi_[i] = z.imag();
        } else {
          zr_[i] = 1.0;
          zi_[i] = 0.0;
        }
      }
      for (std::size_t start = 0; start < kbins; start += kReseedBlock) {
        const double w0 = -2.0 * kPi * (f0_ + static_cast<double>(start) * step_);
        for (std::size_t i = 0; i < padded; ++i) {
          if (i >= cn) {
            wr_[i] = wi_[i] = 0.0;
          } else if (w0 == 0.0) {
            wr_[i] = gain[c0 + i];
            wi_[i] = 0.0;
          } else {
            const cdouble p = std::polar(gain[c0 + i], w0 * tau[c0 + i]);
            wr_[i] = p.real();
            wi_[i] = p.imag();
          }
        }
        const std::size_t stop = std::min(kbins, start + kReseedBlock);
        double* __restrict wr = wr_.data();
        double* __restrict wi = wi_.data();
        const double* __restrict zr = zr_.data();
        const double* __restrict zi = zi_.data();
        for (std::size_t k = start; k < stop; ++k) {
          double sr = 0.0;
          double si = 0.0;
#pragma omp simd reduction(+ : sr, si)
          for (std::size_t i = 0; i < padded; ++i) {
            const double r = wr[i];
            const double m = wi[i];
            sr += r;
            si += m;
            wr[i] = r * zr[i] - m * zi[i];
            wi[i] = r * zi[i] + m * zr[i];
          }
          acc_r_[k] += sr;
          acc_i_[k] += si;
        }
      }
    }
    for (std::size_t k = 0; k < kbins; ++k) out[k * stride] = {acc_r_[k], acc_i_[k]};
  }

 private:
  const FrequencyGrid& fg_;
  bool uniform_ = false;
  double f0_ = 0.0;
  double step_ = 0.0;
  std::vector<double> wr_, wi_, zr_, zi_;
  std::vector<double> acc_r_, acc_i_;
};

}  // namespace detail

/// H^{m,l}(f) = sum over images of amplitude * G(image, receiver, f).
///
/// Receivers are partitioned across `threads` workers; every entry is
/// computed by one worker with a fixed summation order, so the result does
/// not depend on the thread count.
inline AtfTensor simulate_atf(const RoomSpec& room, std::span<const Point3> sources,
                              std::span<const Point3> receivers,
                              const FrequencyGrid& freqs, int max_order,
                              unsigned threads = 1) {
  for (const auto& p : sources)
    if (!room.contains(p)) throw ValidationError("source outside room");
  for (const auto& p : receivers)
    if (!room.contains(p)) throw ValidationError("receiver outside room");

  const std::size_t nl = sources.size();
  const std::size_t nm = receivers.size();
  AtfTensor out{ComplexTensor3(freqs.size(), nm, nl), freqs};
  if (nl == 0 || nm == 0) return out;

  const double beta = rt60_to_reflection(room);
  const double c = room.speed_of_sound();

  std::vector<std::vector<ImageSource>> images;
  images.reserve(nl);
  for (const auto& s : sources) {
    auto imgs = image_sources(room.dims(), beta, s, max_order);
    std::erase_if(imgs, [](const ImageSource& im) { return im.amplitude == 0.0; });
    images.push_back(std::move(imgs));
  }

  const std::size_t stride = nm * nl;
  auto worker = [&](std::size_t m_begin, std::size_t m_end) {
    detail::PhasorAccumulator acc(freqs);
    std::vector<double> gain, tau;
    for (std::size_t m = m_begin; m < m_end; ++m) {
      for (std::size_t l = 0; l < nl; ++l) {
        const auto& imgs = images[l];
        gain.resize(imgs.size());
        tau.resize(imgs.size());
        for (std::size_t i = 0; i < imgs.size(); ++i) {
          const double d = distance(imgs[i].position, receivers[m]);
          if (d == 0.0)
            throw NumericalError("receiver " + std::to_string(m) +
                                 " coincides with an image of source " + std::to_string(l));
          gain[i] = imgs[i].amplitude / (4.0 * kPi * d);
          tau[i] = d / c;
        }
        acc.accumulate(gain, tau, &out.data(0, m, l), stride);
      }
    }
  };

  const std::size_t nthreads = std::clamp<std::size_t>(threads, 1, nm);
  if (nthreads == 1) {
    worker(0, nm);
  } else {
    std::vector<std::exception_ptr> errors(nthreads);
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < nthreads; ++t) {
        const std::size_t b = nm * t / nthreads;
        const std::size_t e = nm * (t + 1) / nthreads;
        pool.emplace_back([&, t, b, e] {
          try {
            worker(b, e);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

inline AtfTensor simulate_atf(const RoomSpec& room, std::span<const Point3> sources,
                              std::span<const Point3> receivers,
                              const FrequencyGrid& freqs) {
  return simulate_atf(room, sources, receivers, freqs, default_max_order(room));
}

}  // namespace psz
