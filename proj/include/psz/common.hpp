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

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace psz {

using cdouble = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Error hierarchy. The CLI maps each family onto a frozen exit code:
// UsageError -> 2, ValidationError -> 3, NumericalError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

inline double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Ordered list of analysis frequencies in Hz.
///
/// Frequencies are strictly ascending and lie in [0, 2000]. The default
/// grid is 512 uniformly spaced bins including DC: f_k = k * 2000 / 511.
class FrequencyGrid {
 public:
  static constexpr double kMaxHz = 2000.0;
  static constexpr std::size_t kDefaultBins = 512;

  FrequencyGrid() : FrequencyGrid(uniform(kDefaultBins)) {}

  explicit FrequencyGrid(std::vector<double> freqs) : freqs_(std::move(freqs)) {
    if (freqs_.empty()) throw ValidationError("frequency grid is empty");
    for (std::size_t k = 0; k < freqs_.size(); ++k) {
      const double f = freqs_[k];
      if (!std::isfinite(f) || f < 0.0 || f > kMaxHz)
        throw ValidationError("frequency " + std::to_string(f) +
                              " Hz outside [0, 2000]");
      if (k > 0 && !(f > freqs_[k - 1]))
        throw ValidationError("frequency grid not strictly ascending");
    }
  }

  /// `bins` uniformly spaced frequencies on [0, max_hz], DC included.
  static FrequencyGrid uniform(std::size_t bins, double max_hz = kMaxHz) {
    if (bins == 0) throw ValidationError("frequency grid needs at least one bin");
    std::vector<double> f(bins, 0.0);
    if (bins > 1) {
      const double step = max_hz / static_cast<double>(bins - 1);
      for (std::size_t k = 0; k < bins; ++k) f[k] = static_cast<double>(k) * step;
      f.back() = max_hz;
    }
    return FrequencyGrid(std::move(f));
  }

  std::size_t size() const { return freqs_.size(); }
  double operator[](std::size_t k) const { return freqs_[k]; }
  const std::vector<double>& values() const { return freqs_; }

  friend bool operator==(const FrequencyGrid&, const FrequencyGrid&) = default;

 private:
  std::vector<double> freqs_;
};

/// Dense complex tensor of shape (K, rows, cols), frequency slowest,
/// row-major within each frequency slice.
class ComplexTensor3 {
 public:
  ComplexTensor3() = default;
  ComplexTensor3(std::size_t k, std::size_t rows, std::size_t cols)
      : shape_{k, rows, cols}, data_(k * rows * cols) {}

  std::size_t freqs() const { return shape_[0]; }
  std::size_t rows() const { return shape_[1]; }
  std::size_t cols() const { return shape_[2]; }
  const std::array<std::size_t, 3>& shape() const { return shape_; }

  cdouble& operator()(std::size_t k, std::size_t r, std::size_t c) {
    return data_[(k * shape_[1] + r) * shape_[2] + c];
  }
  const cdouble& operator()(std::size_t k, std::size_t r, std::size_t c) const {
    return data_[(k * shape_[1] + r) * shape_[2] + c];
  }

  cdouble* slice(std::size_t k) { return data_.data() + k * shape_[1] * shape_[2]; }
  const cdouble* slice(std::size_t k) const {
    return data_.data() + k * shape_[1] * shape_[2];
  }

  std::vector<cdouble>& data() { return data_; }
  const std::vector<cdouble>& data() const { return data_; }

  bool all_finite() const {
    for (const auto& v : data_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

  friend bool operator==(const ComplexTensor3&, const ComplexTensor3&) = default;

 private:
  std::array<std::size_t, 3> shape_{0, 0, 0};
  std::vector<cdouble> data_;
};

}  // namespace psz
