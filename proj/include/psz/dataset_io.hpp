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

// PSZD tensor files and dataset manifests.
//
// A PSZD file is little-endian:
//
//   char[4]  magic "PSZD"
//   u32      schema version (1)
//   u32      number of dimensions n
//   u64[n]   dimensions, slowest first
//   f32[2*prod(dims)]  interleaved (real, imag), row-major
//
// Datasets are directories holding one PSZD file per tensor and a JSON
// manifest (manifest.json) with counts, frequencies, splits and CRC-32
// checksums of every file.

#include <boost/crc.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "psz/room_acoustics.hpp"
#include "psz/scene.hpp"
#include "psz/solver.hpp"

namespace psz {

static_assert(std::endian::native == std::endian::little, "PSZD I/O assumes a little-endian host");

class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class VersionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class SizeMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class ChecksumError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

inline constexpr char kPszdMagic[4] = {'P', 'S', 'Z', 'D'};
inline constexpr std::uint32_t kPszdVersion = 1;
inline constexpr std::uint32_t kManifestVersion = 1;

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct RawTensor {
  std::vector<std::uint64_t> dims;
  std::vector<cdouble> values;  // float32-rounded on disk
};

inline std::string crc32_hex(const std::string& bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(crc.checksum()));
  return buf;
}

inline std::string encode_pszd(const std::vector<std::uint64_t>& dims,
                               std::span<const cdouble> values) {
  std::uint64_t count = 1;
  for (auto d : dims) count *= d;
  if (count != values.size()) throw DimensionError("PSZD: value count does not match dims");
  std::string out;
  out.reserve(12 + 8 * dims.size() + 8 * values.size());
  auto put = [&](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
  put(kPszdMagic, 4);
  const std::uint32_t ver = kPszdVersion;
  const auto nd = static_cast<std::uint32_t>(dims.size());
  put(&ver, 4);
  put(&nd, 4);
  for (auto d : dims) put(&d, 8);
  for (const auto& v : values) {
    const float re = static_cast<float>(v.real());
    const float im = static_cast<float>(v.imag());
    put(&re, 4);
    put(&im, 4);
  }
  return out;
}

inline RawTensor decode_pszd(const std::string& bytes, const std::string& name) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kPszdMagic, 4) != 0)
    throw FormatError(name + ": not a PSZD file (bad magic)");
  std::uint32_t ver = 0, nd = 0;
  std::memcpy(&ver, bytes.data() + 4, 4);
  std::memcpy(&nd, bytes.data() + 8, 4);
  if (ver != kPszdVersion)
    throw VersionError(name + ": PSZD version " + std::to_string(ver) + ", expected " +
                       std::to_string(kPszdVersion));
  const std::size_t header = 12 + 8 * static_cast<std::size_t>(nd);
  if (bytes.size() < header) throw SizeMismatchError(name + ": truncated PSZD header");
  RawTensor t;
  t.dims.resize(nd);
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < nd; ++i) {
    std::memcpy(&t.dims[i], bytes.data() + 12 + 8 * i, 8);
    count *= t.dims[i];
  }
  if (bytes.size() != header + 8 * count)
    throw SizeMismatchError(name + ": payload holds " + std::to_string(bytes.size() - header) +
                            " bytes, dims require " + std::to_string(8 * count));
  t.values.resize(count);
  const char* p = bytes.data() + header;
  for (std::uint64_t i = 0; i < count; ++i, p += 8) {
    float re = 0.0f, im = 0.0f;
    std::memcpy(&re, p, 4);
    std::memcpy(&im, p + 4, 4);
    t.values[i] = {re, im};
  }
  return t;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

/// Writes a tensor and returns its manifest entry (path relative to `root`).
inline json write_tensor(const fs::path& root, const std::string& rel,
                         const std::vector<std::uint64_t>& dims, std::span<const cdouble> values) {
  const std::string bytes = encode_pszd(dims, values);
  write_file(root / rel, bytes);
  return {{"path", rel}, {"dims", dims}, {"bytes", bytes.size()}, {"crc32", crc32_hex(bytes)}};
}

/// Reads a tensor named by a manifest entry, checking size, checksum and dims.
inline RawTensor read_tensor(const fs::path& root, const json& entry) {
  const std::string rel = entry.at("path").get<std::string>();
  const fs::path path = root / rel;
  if (!fs::exists(path)) throw ValidationError("missing file '" + path.string() + "'");
  const std::string bytes = read_file(path);
  if (bytes.size() != entry.at("bytes").get<std::size_t>())
    throw SizeMismatchError(rel + ": size " + std::to_string(bytes.size()) + " bytes, manifest says " +
                            std::to_string(entry.at("bytes").get<std::size_t>()));
  if (crc32_hex(bytes) != entry.at("crc32").get<std::string>())
    throw ChecksumError(rel + ": checksum mismatch");
  RawTensor t = decode_pszd(bytes, rel);
  if (t.dims != entry.at("dims").get<std::vector<std::uint64_t>>())
    throw DimensionError(rel + ": dims differ from manifest");
  return t;
}

// -- Pre-filter files -------------------------------------------------------

/// Writes pre-filters to `path` (PSZD, dims [K, L]) and metadata to `path`.json.
inline void write_prefilters(const fs::path& path, const PreFilterSet& a,
                             const std::string& config_hash = "") {
  std::vector<cdouble> flat(a.freqs() * a.speakers());
  for (std::size_t k = 0; k < a.freqs(); ++k)
    for (std::size_t l = 0; l < a.speakers(); ++l)
      flat[k * a.speakers() + l] =
          a.data(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
  const std::string bytes = encode_pszd({a.freqs(), a.speakers()}, flat);
  write_file(path, bytes);
  json meta = {{"format", "PSZD"},
               {"kind", "prefilters"},
               {"method", a.method},
               {"mask", a.mask},
               {"lambda", a.lambda},
               {"sample", a.sample},
               {"config_hash", config_hash},
               {"dims", {a.freqs(), a.speakers()}},
               {"crc32", crc32_hex(bytes)},
               {"freqs_hz", a.freq_grid.values()}};
  write_file(path.string() + ".json", meta.dump(2) + "\n");
}

struct PrefilterFile {
  PreFilterSet filters;
  std::string config_hash;
};

/// Reads a pre-filter file and its sidecar. `expected_speakers` > 0 rejects
/// files built for a different array.
inline PrefilterFile read_prefilters(const fs::path& path, std::size_t expected_speakers = 0) {
  const std::string bytes = read_file(path);
  const RawTensor t = decode_pszd(bytes, path.filename().string());
  if (t.dims.size() != 2) throw DimensionError(path.string() + ": pre-filters must be 2-D (K, L)");
  if (expected_speakers && t.dims[1] != expected_speakers)
    throw DimensionError(path.string() + ": " + std::to_string(t.dims[1]) +
                         " loudspeakers, scene has " + std::to_string(expected_speakers));
  const fs::path side = path.string() + ".json";
  json meta = json::object();
  if (fs::exists(side)) {
    try {
      meta = json::parse(read_file(side));
    } catch (const json::exception& e) {
      throw FormatError(side.string() + ": " + e.what());
    }
    if (meta.contains("crc32") && meta["crc32"].get<std::string>() != crc32_hex(bytes))
      throw ChecksumError(path.string() + ": checksum mismatch");
  }
  PrefilterFile out;
  const auto kf = static_cast<Eigen::Index>(t.dims[0]);
  const auto nl = static_cast<Eigen::Index>(t.dims[1]);
  out.filters.data = SpectralMatrix(kf, nl);
  for (Eigen::Index k = 0; k < kf; ++k)
    for (Eigen::Index l = 0; l < nl; ++l)
      out.filters.data(k, l) = t.values[static_cast<std::size_t>(k * nl + l)];
  if (meta.contains("freqs_hz"))
    out.filters.freq_grid = FrequencyGrid(meta["freqs_hz"].get<std::vector<double>>());
  else
    out.filters.freq_grid = FrequencyGrid::uniform(static_cast<std::size_t>(kf));
  if (out.filters.freq_grid.size() != t.dims[0])
    throw DimensionError(path.string() + ": sidecar frequency count differs from K");
  out.filters.method = meta.value("method", std::string("external"));
  out.filters.mask = meta.value("mask", std::string());
  out.filters.lambda = meta.value("lambda", 0.0);
  out.filters.sample = meta.value("sample", -1LL);
  out.config_hash = meta.value("config_hash", std::string());
  return out;
}

// -- Datasets ---------------------------------------------------------------

struct SampleRecord {
  Point3 source;
  ComplexTensor3 control_target;    // (K, 12, 12) bright-zone control grid
  ComplexTensor3 monitor_target;    // (K, 17, 17) bright-zone monitor grid

  TargetAtf control_as_target() const {
    TargetAtf t{SpectralMatrix(static_cast<Eigen::Index>(control_target.freqs()),
                               static_cast<Eigen::Index>(control_target.rows() *
                                                         control_target.cols()))};
    std::copy(control_target.data().begin(), control_target.data().end(), t.bright.data());
    return t;
  }
  SpectralMatrix monitor_as_matrix() const {
    SpectralMatrix m(static_cast<Eigen::Index>(monitor_target.freqs()),
                     static_cast<Eigen::Index>(monitor_target.rows() * monitor_target.cols()));
    std::copy(monitor_target.data().begin(), monitor_target.data().end(), m.data());
    return m;
  }
};

struct SplitRatios {
  double train = 0.90;
  double val = 0.05;
  double test = 0.05;
};

/// Deterministic train/val/test assignment: a seeded shuffle, then test and
/// val take round(N * ratio) entries each.
inline std::vector<std::string> assign_splits(std::size_t n, const SplitRatios& r,
                                              std::uint64_t seed) {
  if (r.train < 0 || r.val < 0 || r.test < 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
    throw ValidationError("split ratios must be non-negative and sum to 1");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed ^ 0x5053'5a44'5350'4c54ULL);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * r.test));
  const auto n_val =
      std::min(n - n_test, static_cast<std::size_t>(std::llround(static_cast<double>(n) * r.val)));
  std::vector<std::string> split(n, "train");
  for (std::size_t i = 0; i < n_test; ++i) split[perm[i]] = "test";
  for (std::size_t i = n_test; i < n_test + n_val; ++i) split[perm[i]] = "val";
  return split;
}

inline json point_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

struct GenerateOptions {
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
  SplitRatios splits;
  unsigned threads = 1;
};

/// Simulates the local-room ATFs once and one record per virtual source,
/// writing everything under `dir`. Returns the manifest.
inline json generate_dataset(const Scene& scene, const fs::path& dir, const GenerateOptions& opt) {
  if (opt.samples < 1) throw ValidationError("dataset needs at least one sample");
  const auto ctrl_pts = scene.control_points();
  const auto mon_pts = scene.monitor_points();
  const std::uint64_t kf = scene.freqs.size();
  const std::uint64_t nl = scene.speakers.size();
  const std::uint64_t nc = scene.control_bright.nx;
  const std::uint64_t nm = scene.monitor_bright.nx;
  if (nc != kControlSide) throw ValidationError("datasets require a 12 x 12 control grid");

  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "PSZD";
  manifest["schema_version"] = kManifestVersion;
  manifest["config_hash"] = scene.hash();
  manifest["config"] = scene.config.canonical();
  manifest["seed"] = opt.seed;
  manifest["counts"] = {{"samples", opt.samples},
                        {"freqs", kf},
                        {"speakers", nl},
                        {"control_grid", {nc, nc}},
                        {"monitor_grid", {nm, nm}},
                        {"control_rows", ctrl_pts.size()},
                        {"monitor_rows", mon_pts.size()}};
  manifest["freqs_hz"] = scene.freqs.values();
  manifest["max_order"] = scene.max_order();
  manifest["ref_speaker"] = scene.ref_speaker();
  manifest["geometry"] = {{"bright_center", point_json(scene.bright.center)},
                          {"dark_center", point_json(scene.dark.center)},
                          {"zone_gap", "edge-to-edge"},
                          {"receiver_order", "bright zone rows first, then dark zone"}};
  manifest["split_ratios"] = {opt.splits.train, opt.splits.val, opt.splits.test};

  const auto h_ctrl = simulate_atf(scene.room, scene.speakers.positions, ctrl_pts, scene.freqs,
                                   scene.max_order(), opt.threads);
  const auto h_mon = simulate_atf(scene.room, scene.speakers.positions, mon_pts, scene.freqs,
                                  scene.max_order(), opt.threads);
  manifest["tensors"]["h_ctrl"] =
      write_tensor(dir, "h_ctrl.pszd", {kf, ctrl_pts.size(), nl}, h_ctrl.data.data());
  manifest["tensors"]["h_mon"] =
      write_tensor(dir, "h_mon.pszd", {kf, mon_pts.size(), nl}, h_mon.data.data());

  const auto split = assign_splits(opt.samples, opt.splits, opt.seed);
  json splits = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  for (std::size_t i = 0; i < opt.samples; ++i) splits[split[i]].push_back(i);
  manifest["splits"] = splits;

  // Control and monitor receivers share one simulation per virtual source.
  std::vector<Point3> receivers = scene.control_bright.points;
  receivers.insert(receivers.end(), scene.monitor_bright.points.begin(),
                   scene.monitor_bright.points.end());
  const std::size_t ncb = scene.control_bright.size();
  const std::size_t nmb = scene.monitor_bright.size();

  std::mt19937_64 rng(opt.seed);
  json samples = json::array();
  std::vector<cdouble> ctrl(kf * ncb), mon(kf * nmb);
  for (std::size_t i = 0; i < opt.samples; ++i) {
    const Point3 src = sample_virtual_source(rng, scene);
    const std::array<Point3, 1> srcs{src};
    const auto h = simulate_atf(scene.room, srcs, receivers, scene.freqs, scene.max_order(),
                                opt.threads);
    for (std::size_t k = 0; k < kf; ++k) {
      for (std::size_t m = 0; m < ncb; ++m) ctrl[k * ncb + m] = h.data(k, m, 0);
      for (std::size_t m = 0; m < nmb; ++m) mon[k * nmb + m] = h.data(k, ncb + m, 0);
    }
    char name[64];
    std::snprintf(name, sizeof(name), "%06zu", i);
    samples.push_back(
        {{"index", i},
         {"source", point_json(src)},
         {"split", split[i]},
         {"control", write_tensor(dir, std::string("samples/control_") + name + ".pszd",
                                  {kf, nc, nc}, ctrl)},
         {"monitor", write_tensor(dir, std::string("samples/monitor_") + name + ".pszd",
                                  {kf, nm, nm}, mon)}});
  }
  manifest["samples"] = samples;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

/// Read-only handle on a dataset directory. Opening parses the manifest and
/// checks that every referenced file has its recorded size; tensors are read
/// (and checksummed) on access.
class Dataset {
 public:
  static Dataset open(const fs::path& dir) {
    Dataset d;
    d.root_ = dir;
    const fs::path mpath = dir / "manifest.json";
    if (!fs::exists(mpath)) throw ValidationError("no manifest.json in '" + dir.string() + "'");
    try {
      d.manifest_ = json::parse(read_file(mpath));
    } catch (const json::exception& e) {
      throw FormatError("manifest.json: " + std::string(e.what()));
    }
    const auto& m = d.manifest_;
    if (m.value("format", std::string()) != "PSZD") throw FormatError("manifest.json: format is not PSZD");
    if (m.value("schema_version", 0u) != kManifestVersion)
      throw VersionError("manifest.json: schema version " +
                         std::to_string(m.value("schema_version", 0u)) + ", expected " +
                         std::to_string(kManifestVersion));
    try {
      d.freqs_ = FrequencyGrid(m.at("freqs_hz").get<std::vector<double>>());
      const auto& c = m.at("counts");
      if (c.at("samples").get<std::size_t>() != m.at("samples").size())
        throw SizeMismatchError("manifest.json: sample count differs from sample list");
      if (c.at("freqs").get<std::size_t>() != d.freqs_.size())
        throw SizeMismatchError("manifest.json: frequency count differs from freqs_hz");
      auto check_size = [&](const json& e) {
        const fs::path p = dir / e.at("path").get<std::string>();
        if (!fs::exists(p)) throw ValidationError("missing file '" + p.string() + "'");
        const auto want = e.at("bytes").get<std::uintmax_t>();
        if (fs::file_size(p) != want)
          throw SizeMismatchError(e.at("path").get<std::string>() + ": size " +
                                  std::to_string(fs::file_size(p)) + " bytes, manifest says " +
                                  std::to_string(want));
      };
      check_size(m.at("tensors").at("h_ctrl"));
      check_size(m.at("tensors").at("h_mon"));
      for (const auto& s : m.at("samples")) {
        check_size(s.at("control"));
        check_size(s.at("monitor"));
      }
    } catch (const json::exception& e) {
      throw FormatError("manifest.json: " + std::string(e.what()));
    }
    return d;
  }

  const json& manifest() const { return manifest_; }
  const FrequencyGrid& freqs() const { return freqs_; }
  std::string config_hash() const { return manifest_.at("config_hash").get<std::string>(); }
  std::size_t size() const { return manifest_.at("samples").size(); }
  std::size_t speakers() const { return manifest_.at("counts").at("speakers").get<std::size_t>(); }
  std::size_t ref_speaker() const { return manifest_.at("ref_speaker").get<std::size_t>(); }
  std::uint64_t seed() const { return manifest_.at("seed").get<std::uint64_t>(); }

  /// Sample indices of one split ("train", "val", "test"), or all for "all".
  std::vector<std::size_t> split(const std::string& name) const {
    if (name == "all") {
      std::vector<std::size_t> all(size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      return all;
    }
    if (!manifest_.at("splits").contains(name))
      throw ValidationError("unknown split '" + name + "'");
    return manifest_.at("splits").at(name).get<std::vector<std::size_t>>();
  }

  AtfTensor h_ctrl() const { return load_atf("h_ctrl"); }
  AtfTensor h_mon() const { return load_atf("h_mon"); }

  SampleRecord sample(std::size_t i) const {
    if (i >= size()) throw ValidationError("sample index " + std::to_string(i) + " out of range");
    const auto& s = manifest_.at("samples").at(i);
    const auto src = s.at("source").get<std::vector<double>>();
    SampleRecord r;
    r.source = {src.at(0), src.at(1), src.at(2)};
    r.control_target = to_tensor3(read_tensor(root_, s.at("control")));
    r.monitor_target = to_tensor3(read_tensor(root_, s.at("monitor")));
    if (r.control_target.freqs() != freqs_.size() || r.monitor_target.freqs() != freqs_.size())
      throw DimensionError("sample " + std::to_string(i) + ": frequency count mismatch");
    return r;
  }

  /// Reads every tensor, verifying checksums and shapes.
  void validate() const {
    (void)h_ctrl();
    (void)h_mon();
    for (std::size_t i = 0; i < size(); ++i) (void)sample(i);
  }

 private:
  static ComplexTensor3 to_tensor3(const RawTensor& t) {
    if (t.dims.size() != 3) throw DimensionError("expected a 3-D tensor");
    ComplexTensor3 out(t.dims[0], t.dims[1], t.dims[2]);
    out.data() = t.values;
    return out;
  }

  AtfTensor load_atf(const std::string& key) const {
    AtfTensor h{to_tensor3(read_tensor(root_, manifest_.at("tensors").at(key))), freqs_};
    if (h.freqs() != freqs_.size() || h.sources() != speakers())
      throw DimensionError(key + ": shape inconsistent with manifest counts");
    return h;
  }

  fs::path root_;
  json manifest_;
  FrequencyGrid freqs_;
};

}  // namespace psz
