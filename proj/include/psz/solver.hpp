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

// Pressure matching: per-frequency Tikhonov-regularized least squares from
// target transfer functions to loudspeaker pre-filters, and the global
// regularization search that matches a broadband array-effort target.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "psz/common.hpp"
#include "psz/metrics.hpp"
#include "psz/room_acoustics.hpp"
#include "psz/scene.hpp"

namespace psz {

/// K x n table of complex spectra; row k holds one frequency.
using SpectralMatrix = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Frequency slice H(k) of an ATF tensor as an M x L matrix view.
inline Eigen::Map<const SpectralMatrix> atf_slice(const AtfTensor& h, std::size_t k) {
  return {h.data.slice(k), static_cast<Eigen::Index>(h.receivers()),
          static_cast<Eigen::Index>(h.sources())};
}

/// Loudspeaker pre-filters A^l(k), shape (K, L), plus provenance.
struct PreFilterSet {
  SpectralMatrix data;
  FrequencyGrid freq_grid;
  std::string method;
  std::string mask;
  double lambda = 0.0;
  long long sample = -1;

  std::size_t freqs() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t speakers() const { return static_cast<std::size_t>(data.cols()); }
};

/// Bright-zone target on the control grid, shape (K, M_B). The dark-zone
/// target is identically zero and not stored.
struct TargetAtf {
  SpectralMatrix bright;
};

/// g(k) = H(k) a(k), shape (K, M).
inline SpectralMatrix reproduce_atf(const AtfTensor& h, const PreFilterSet& a) {
  if (h.sources() != a.speakers())
    throw ValidationError("reproduce_atf: " + std::to_string(h.sources()) +
                          " sources vs " + std::to_string(a.speakers()) + " pre-filters");
  if (h.freqs() != a.freqs() || !(h.freq_grid == a.freq_grid))
    throw ValidationError("reproduce_atf: frequency grids differ");
  SpectralMatrix g(static_cast<Eigen::Index>(h.freqs()),
                   static_cast<Eigen::Index>(h.receivers()));
  for (std::size_t k = 0; k < h.freqs(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    g.row(kk).transpose() = atf_slice(h, k) * a.data.row(kk).transpose();
  }
  return g;
}

struct PmOptions {
  /// With lambda = 0 and rank-deficient H: throw instead of returning the
  /// minimum-norm solution.
  bool reject_rank_deficient = false;
  /// Keep every dark-zone control point (zero target) when masking.
  bool keep_dark_zone = true;
};

/// Factorization of one regularized system, reusable across right-hand
/// sides. Solves min ||H a - g||^2 + lambda ||a||^2 through a complete
/// orthogonal decomposition of the stacked matrix [H; sqrt(lambda) I].
class PressureMatcher {
 public:
  PressureMatcher(const Eigen::Ref<const Eigen::MatrixXcd>& h, double lambda,
                  const PmOptions& opt = {})
      : rows_(h.rows()), cols_(h.cols()) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw ValidationError("regularization must be finite and non-negative");
    if (rows_ < 1 || cols_ < 1) throw ValidationError("pressure matching needs M, L >= 1");
    Eigen::MatrixXcd aug = Eigen::MatrixXcd::Zero(rows_ + cols_, cols_);
    aug.topRows(rows_) = h;
    aug.bottomRows(cols_).diagonal().setConstant(std::sqrt(lambda));
    cod_.compute(aug);
    if (cod_.rank() < cols_ && opt.reject_rank_deficient)
      throw NumericalError("pressure matching system is rank deficient (rank " +
                           std::to_string(cod_.rank()) + " < " + std::to_string(cols_) +
                           ") at lambda = 0");
  }

  Eigen::Index rank() const { return cod_.rank(); }

  /// Columns of `g` are independent targets (M x N); returns L x N.
  Eigen::MatrixXcd solve(const Eigen::Ref<const Eigen::MatrixXcd>& g) const {
    if (g.rows() != rows_) throw ValidationError("pressure matching: target length mismatch");
    Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(rows_ + cols_, g.cols());
    rhs.topRows(rows_) = g;
    return cod_.solve(rhs);
  }

 private:
  Eigen::Index rows_;
  Eigen::Index cols_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod_;
};

/// a = (H^H H + lambda I)^{-1} H^H g.
inline Eigen::VectorXcd pressure_match(const Eigen::Ref<const Eigen::MatrixXcd>& h,
                                       const Eigen::Ref<const Eigen::VectorXcd>& target,
                                       double lambda, const PmOptions& opt = {}) {
  return PressureMatcher(h, lambda, opt).solve(target);
}

/// Control rows used by masked pressure matching: the pattern's bright-zone
/// cells, followed by every dark-zone row when `keep_dark_zone` is set.
inline std::vector<std::size_t> masked_rows(const MaskPattern& pattern, std::size_t control_rows,
                                            bool keep_dark_zone) {
  constexpr std::size_t bright = kControlSide * kControlSide;
  if (control_rows < bright)
    throw ValidationError("control ATFs have fewer rows than a 12 x 12 bright grid");
  std::vector<std::size_t> rows;
  for (std::size_t ix : pattern.side_indices)
    for (std::size_t iy : pattern.side_indices) {
      if (ix >= kControlSide || iy >= kControlSide)
        throw ValidationError("mask index outside the 12 x 12 control grid");
      rows.push_back(ix * kControlSide + iy);
    }
  if (keep_dark_zone)
    for (std::size_t r = bright; r < control_rows; ++r) rows.push_back(r);
  if (rows.empty()) throw ValidationError("mask selects no control points");
  return rows;
}

/// Masked pressure matching for a batch of targets sharing one system.
inline std::vector<PreFilterSet> solve_masked_pm(const AtfTensor& h_ctrl,
                                                 const std::vector<TargetAtf>& targets,
                                                 const MaskPattern& pattern, double lambda,
                                                 const PmOptions& opt = {}) {
  constexpr std::size_t bright = kControlSide * kControlSide;
  const auto rows = masked_rows(pattern, h_ctrl.receivers(), opt.keep_dark_zone);
  const auto kf = static_cast<Eigen::Index>(h_ctrl.freqs());
  const auto nl = static_cast<Eigen::Index>(h_ctrl.sources());
  const auto nrows = static_cast<Eigen::Index>(rows.size());
  const auto ns = static_cast<Eigen::Index>(targets.size());
  for (const auto& t : targets)
    if (t.bright.rows() != kf || static_cast<std::size_t>(t.bright.cols()) != bright)
      throw ValidationError("target must have shape (K, 144)");

  std::vector<PreFilterSet> out(targets.size());
  for (auto& p : out) {
    p.data = SpectralMatrix(kf, nl);
    p.freq_grid = h_ctrl.freq_grid;
    p.method = "pm";
    p.mask = pattern.name;
    p.lambda = lambda;
  }

  Eigen::MatrixXcd hsel(nrows, nl);
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(nrows, ns);
  for (Eigen::Index k = 0; k < kf; ++k) {
    const auto hk = atf_slice(h_ctrl, static_cast<std::size_t>(k));
    for (Eigen::Index r = 0; r < nrows; ++r) {
      const auto src = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
      hsel.row(r) = hk.row(src);
      for (Eigen::Index s = 0; s < ns; ++s)
        g(r, s) = src < static_cast<Eigen::Index>(bright)
                      ? targets[static_cast<std::size_t>(s)].bright(k, src)
                      : cdouble{0.0, 0.0};
    }
    const Eigen::MatrixXcd a = PressureMatcher(hsel, lambda, opt).solve(g);
    for (Eigen::Index s = 0; s < ns; ++s)
      out[static_cast<std::size_t>(s)].data.row(k) = a.col(s).transpose();
  }
  return out;
}

inline PreFilterSet solve_masked_pm(const AtfTensor& h_ctrl, const TargetAtf& target,
                                    const MaskPattern& pattern, double lambda,
                                    const PmOptions& opt = {}) {
  return solve_masked_pm(h_ctrl, std::vector<TargetAtf>{target}, pattern, lambda, opt).front();
}

/// Broadband array effort of one pre-filter set on the bright-zone monitor
/// rows (the first `monitor_bright` rows of `h_mon`).
inline EnergyRatio broadband_ae_energies(const AtfTensor& h_mon, std::size_t monitor_bright,
                                         const PreFilterSet& a, std::size_t ref) {
  if (h_mon.sources() != a.speakers() || h_mon.freqs() != a.freqs())
    throw ValidationError("array effort: pre-filter shape does not match monitor ATFs");
  const auto mb = static_cast<Eigen::Index>(monitor_bright);
  EnergyRatio total;
  Eigen::VectorXcd gb(mb);
  for (std::size_t k = 0; k < h_mon.freqs(); ++k) {
    const auto hb = atf_slice(h_mon, k).topRows(mb);
    const auto kk = static_cast<Eigen::Index>(k);
    gb = hb * a.data.row(kk).transpose();
    const Eigen::VectorXcd ak = a.data.row(kk).transpose();
    total += ae_energies(std::span<const cdouble>(ak.data(), static_cast<std::size_t>(ak.size())),
                         hb, std::span<const cdouble>(gb.data(), monitor_bright), ref);
  }
  return total;
}

struct TuneOptions {
  double lambda_min = 1e-8;
  double lambda_max = 1e2;
  int max_iterations = 100;
  std::size_t ref_speaker = 0;
  std::size_t monitor_bright = 0;  // 0: first half of the monitor rows
  PmOptions pm;
};

struct TuneResult {
  double lambda = 0.0;
  double b_ae = 0.0;  // mean broadband AE at lambda, dB
  int iterations = 0;
};

/// Mean over the test set of the per-sample broadband AE (dB) of masked PM.
inline double mean_broadband_ae(const AtfTensor& h_ctrl, const AtfTensor& h_mon,
                                const std::vector<TargetAtf>& test_set,
                                const MaskPattern& pattern, double lambda,
                                const TuneOptions& opt) {
  if (test_set.empty()) throw ValidationError("empty test set");
  const std::size_t mb = opt.monitor_bright ? opt.monitor_bright : h_mon.receivers() / 2;
  const auto filters = solve_masked_pm(h_ctrl, test_set, pattern, lambda, opt.pm);
  double sum = 0.0;
  for (const auto& a : filters) sum += ratio_db(broadband_ae_energies(h_mon, mb, a, opt.ref_speaker));
  return sum / static_cast<double>(filters.size());
}

/// Bisection on log10(lambda) for the lambda whose mean broadband AE lies
/// within `tol_db` of `target_db`. The bracket must straddle the target.
inline TuneResult tune_regularization(const AtfTensor& h_ctrl, const AtfTensor& h_mon,
                                      const std::vector<TargetAtf>& test_set,
                                      const MaskPattern& pattern, double target_db,
                                      double tol_db, const TuneOptions& opt = {}) {
  if (!(opt.lambda_min > 0.0 && opt.lambda_min < opt.lambda_max) || !(tol_db > 0.0))
    throw ValidationError("tune: need 0 < lambda_min < lambda_max and tol > 0");
  auto eval = [&](double log_lambda) {
    return mean_broadband_ae(h_ctrl, h_mon, test_set, pattern, std::pow(10.0, log_lambda), opt);
  };
  double lo = std::log10(opt.lambda_min);
  double hi = std::log10(opt.lambda_max);
  const double ae_lo = eval(lo);
  const double ae_hi = eval(hi);
  TuneResult r;
  r.iterations = 2;
  if (std::abs(ae_lo - target_db) <= tol_db) return {opt.lambda_min, ae_lo, r.iterations};
  if (std::abs(ae_hi - target_db) <= tol_db) return {opt.lambda_max, ae_hi, r.iterations};
  if ((ae_lo - target_db) * (ae_hi - target_db) > 0.0)
    throw NumericalError("tune: target bAE " + std::to_string(target_db) +
                         " dB outside achievable range [" +
                         std::to_string(std::min(ae_lo, ae_hi)) + ", " +
                         std::to_string(std::max(ae_lo, ae_hi)) + "] dB");
  const bool lo_above = ae_lo > target_db;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double ae = eval(mid);
    ++r.iterations;
    if (std::abs(ae - target_db) <= tol_db) {
      r.lambda = std::pow(10.0, mid);
      r.b_ae = ae;
      return r;
    }
    if ((ae > target_db) == lo_above)
      lo = mid;
    else
      hi = mid;
  }
  throw NumericalError("tune: bisection did not reach the bAE tolerance");
}

}  // namespace psz
