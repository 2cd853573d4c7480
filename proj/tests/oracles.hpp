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

// Independent reference implementations used only by the tests. None of
// these call into the library code paths they are compared against.

#include <cmath>
#include <complex>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

namespace psz::oracle {

using cd = std::complex<double>;

/// Dense real matrix, row-major.
struct RealMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;
  RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

/// Gaussian elimination with partial pivoting on a square system.
inline std::vector<double> gauss_solve(RealMatrix a, std::vector<double> b) {
  const std::size_t n = a.rows;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (a(piv, col) == 0.0) throw std::runtime_error("singular system");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

/// Regularized LS through the real-augmented normal equations:
/// A = [Re H, -Im H; Im H, Re H] (2M x 2L), (A^T A + lambda I) x = A^T [Re g; Im g].
inline std::vector<cd> pm_real_augmented(const std::vector<std::vector<cd>>& h,
                                         const std::vector<cd>& g, double lambda) {
  const std::size_t m = h.size(), l = h.front().size();
  RealMatrix a(2 * m, 2 * l);
  std::vector<double> rhs(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      a(i, j) = h[i][j].real();
      a(i, j + l) = -h[i][j].imag();
      a(i + m, j) = h[i][j].imag();
      a(i + m, j + l) = h[i][j].real();
    }
    rhs[i] = g[i].real();
    rhs[i + m] = g[i].imag();
  }
  RealMatrix n(2 * l, 2 * l);
  std::vector<double> atb(2 * l, 0.0);
  for (std::size_t p = 0; p < 2 * l; ++p) {
    for (std::size_t q = 0; q < 2 * l; ++q) {
      double s = 0.0;
      for (std::size_t r = 0; r < 2 * m; ++r) s += a(r, p) * a(r, q);
      n(p, q) = s + (p == q ? lambda : 0.0);
    }
    for (std::size_t r = 0; r < 2 * m; ++r) atb[p] += a(r, p) * rhs[r];
  }
  const auto x = gauss_solve(n, atb);
  std::vector<cd> out(l);
  for (std::size_t j = 0; j < l; ++j) out[j] = {x[j], x[j + l]};
  return out;
}

/// Scalar image-source sum for one source/receiver pair. Images are
/// enumerated over a generous index box and filtered by reflection count;
/// each term uses std::exp on the complex phase directly.
inline cd ism_scalar(const double dims[3], double beta, const double src[3], const double rcv[3],
                     double f, double c, int max_order) {
  const double pi = std::acos(-1.0);
  cd sum{0.0, 0.0};
  const int r = max_order + 1;
  for (int mx = -r; mx <= r; ++mx)
    for (int qx = 0; qx <= 1; ++qx)
      for (int my = -r; my <= r; ++my)
        for (int qy = 0; qy <= 1; ++qy)
          for (int mz = -r; mz <= r; ++mz)
            for (int qz = 0; qz <= 1; ++qz) {
              const int n = std::abs(mx - qx) + std::abs(mx) + std::abs(my - qy) + std::abs(my) +
                            std::abs(mz - qz) + std::abs(mz);
              if (n > max_order) continue;
              const double ix = (qx ? -src[0] : src[0]) + 2.0 * mx * dims[0];
              const double iy = (qy ? -src[1] : src[1]) + 2.0 * my * dims[1];
              const double iz = (qz ? -src[2] : src[2]) + 2.0 * mz * dims[2];
              const double d = std::sqrt((ix - rcv[0]) * (ix - rcv[0]) +
                                         (iy - rcv[1]) * (iy - rcv[1]) +
                                         (iz - rcv[2]) * (iz - rcv[2]));
              const double amp = n == 0 ? 1.0 : std::pow(beta, n);
              sum += amp * std::exp(cd(0.0, -2.0 * pi * f * d / c)) / (4.0 * pi * d);
            }
  return sum;
}

/// Mean-energy ratio in dB by plain loops.
inline double ratio_db_loop(const std::vector<cd>& num, const std::vector<cd>& den) {
  double a = 0.0, b = 0.0;
  for (const auto& x : num) a += std::real(x * std::conj(x));
  for (const auto& x : den) b += std::real(x * std::conj(x));
  a /= static_cast<double>(num.size());
  b /= static_cast<double>(den.size());
  return 10.0 * std::log10(a / b);
}

inline double re_bright_loop(const std::vector<cd>& g, const std::vector<cd>& t) {
  std::vector<cd> e(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) e[i] = g[i] - t[i];
  return ratio_db_loop(e, t);
}

/// AE by loops: h is M_B x L (row-major nested), a has L entries.
inline double ae_loop(const std::vector<std::vector<cd>>& h, const std::vector<cd>& a,
                      std::size_t ref) {
  const std::size_t m = h.size(), l = a.size();
  double gb = 0.0, col = 0.0, eff = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    cd g{0.0, 0.0};
    for (std::size_t j = 0; j < l; ++j) g += h[i][j] * a[j];
    gb += std::norm(g);
    col += std::norm(h[i][ref]);
  }
  for (const auto& x : a) eff += std::norm(x);
  const double aref2 = (gb / static_cast<double>(m)) / (col / static_cast<double>(m));
  return 10.0 * std::log10(eff / aref2);
}

inline cd random_cd(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {n(rng), n(rng)};
}

}  // namespace psz::oracle
