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

#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "psz/metrics.hpp"
#include "psz/solver.hpp"

namespace psz {

/// Metrics of pre-filters `a` on the monitor grid. Rows [0, monitor_bright)
/// of `h_mon` are the bright zone, the remaining rows the dark zone.
/// `monitor_target` is the bright-zone target, shape (K, monitor_bright).
inline MetricsReport evaluate_prefilters(const AtfTensor& h_mon, const SpectralMatrix& monitor_target,
                                         const PreFilterSet& a, std::size_t ref_speaker,
                                         std::size_t monitor_bright = 0) {
  const std::size_t mb = monitor_bright ? monitor_bright : h_mon.receivers() / 2;
  if (mb == 0 || mb >= h_mon.receivers())
    throw ValidationError("monitor grid needs bright and dark rows");
  if (static_cast<std::size_t>(monitor_target.cols()) != mb ||
      static_cast<std::size_t>(monitor_target.rows()) != h_mon.freqs())
    throw ValidationError("monitor target shape does not match the monitor ATFs");
  const SpectralMatrix g = reproduce_atf(h_mon, a);
  const std::size_t md = h_mon.receivers() - mb;

  MetricsReport r;
  r.method = a.method;
  r.mask = a.mask;
  r.lambda = a.lambda;
  r.sample = a.sample;
  EnergyRatio re_b, re_d, ac, ae;
  for (std::size_t k = 0; k < h_mon.freqs(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const cdouble* row = g.row(kk).data();
    std::span<const cdouble> gb(row, mb);
    std::span<const cdouble> gd(row + mb, md);
    std::span<const cdouble> tb(monitor_target.row(kk).data(), mb);
    const Eigen::VectorXcd ak = a.data.row(kk).transpose();
    std::span<const cdouble> av(ak.data(), static_cast<std::size_t>(ak.size()));

    const auto e_re_b = re_energies(gb, tb, Zone::bright);
    const auto e_re_d = re_energies(gd, tb, Zone::dark);
    const auto e_ac = ac_energies(gb, gd);
    const auto e_ae = ae_energies(av, atf_slice(h_mon, k).topRows(static_cast<Eigen::Index>(mb)),
                                  gb, ref_speaker);
    r.re_b.push_back(ratio_db(e_re_b));
    r.re_d.push_back(ratio_db(e_re_d));
    r.ac.push_back(ratio_db(e_ac));
    r.ae.push_back(ratio_db(e_ae));
    re_b += e_re_b;
    re_d += e_re_d;
    ac += e_ac;
    ae += e_ae;
  }
  r.b_re_b = ratio_db(re_b);
  r.b_re_d = ratio_db(re_d);
  r.b_ac = ratio_db(ac);
  r.b_ae = ratio_db(ae);
  return r;
}

// -- Serialization ----------------------------------------------------------

inline std::string format_fixed(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

/// Frozen per-frequency CSV columns; one broadband row (bin "broadband")
/// follows the K frequency rows of each report.
inline constexpr const char* kMetricsCsvHeader =
    "method,mask,sample,bin,freq_hz,re_b_db,re_d_db,ac_db,ae_db,clamped";

inline void write_metrics_csv_rows(std::ostream& os, const MetricsReport& r,
                                   const FrequencyGrid& freqs) {
  const std::string prefix = r.method + "," + r.mask + "," + std::to_string(r.sample) + ",";
  for (std::size_t k = 0; k < r.re_b.size(); ++k) {
    const bool c = is_clamped(r.re_b[k]) || is_clamped(r.re_d[k]) || is_clamped(r.ac[k]) ||
                   is_clamped(r.ae[k]);
    os << prefix << k << ',' << format_fixed(freqs[k]) << ',' << format_fixed(r.re_b[k]) << ','
       << format_fixed(r.re_d[k]) << ',' << format_fixed(r.ac[k]) << ','
       << format_fixed(r.ae[k]) << ',' << (c ? 1 : 0) << '\n';
  }
  const bool c = is_clamped(r.b_re_b) || is_clamped(r.b_re_d) || is_clamped(r.b_ac) ||
                 is_clamped(r.b_ae);
  os << prefix << "broadband,," << format_fixed(r.b_re_b) << ',' << format_fixed(r.b_re_d) << ','
     << format_fixed(r.b_ac) << ',' << format_fixed(r.b_ae) << ',' << (c ? 1 : 0) << '\n';
}

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  return {{"method", r.method},
          {"mask", r.mask},
          {"lambda", r.lambda},
          {"sample", r.sample},
          {"seed", r.seed},
          {"config_hash", r.config_hash},
          {"clamped", r.clamped()},
          {"broadband",
           {{"re_b_db", r.b_re_b}, {"re_d_db", r.b_re_d}, {"ac_db", r.b_ac}, {"ae_db", r.b_ae}}},
          {"per_frequency",
           {{"re_b_db", r.re_b}, {"re_d_db", r.re_d}, {"ac_db", r.ac}, {"ae_db", r.ae}}}};
}

/// Mean over samples of the broadband metrics, per (method, mask).
struct SummaryRow {
  std::string method;
  std::string mask;
  double lambda = 0.0;
  std::size_t samples = 0;
  double re_b = 0.0, re_d = 0.0, ac = 0.0, b_ae = 0.0;
};

inline std::vector<SummaryRow> summarize(const std::vector<MetricsReport>& reports) {
  std::vector<SummaryRow> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& r : reports) {
    auto key = std::make_pair(r.method, r.mask);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      rows.push_back({r.method, r.mask, r.lambda});
    }
    auto& row = rows[it->second];
    ++row.samples;
    row.re_b += r.b_re_b;
    row.re_d += r.b_re_d;
    row.ac += r.b_ac;
    row.b_ae += r.b_ae;
  }
  for (auto& row : rows) {
    const double n = static_cast<double>(row.samples);
    row.re_b /= n;
    row.re_d /= n;
    row.ac /= n;
    row.b_ae /= n;
  }
  return rows;
}

inline constexpr const char* kSummaryCsvHeader =
    "method,mask,lambda,samples,re_b_db,re_d_db,ac_db,b_ae_db";

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << kSummaryCsvHeader << '\n';
  char lam[48];
  for (const auto& r : rows) {
    std::snprintf(lam, sizeof(lam), "%.9g", r.lambda);
    os << r.method << ',' << r.mask << ',' << lam << ',' << r.samples << ','
       << format_fixed(r.re_b) << ',' << format_fixed(r.re_d) << ',' << format_fixed(r.ac) << ','
       << format_fixed(r.b_ae) << '\n';
  }
}

inline nlohmann::ordered_json to_json(const SummaryRow& r) {
  return {{"method", r.method}, {"mask", r.mask},     {"lambda", r.lambda},
          {"samples", r.samples}, {"re_b_db", r.re_b}, {"re_d_db", r.re_d},
          {"ac_db", r.ac},        {"b_ae_db", r.b_ae}};
}

}  // namespace psz
