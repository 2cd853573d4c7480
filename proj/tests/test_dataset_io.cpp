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
#include <set>

#include "oracles.hpp"
#include "psz/dataset_io.hpp"

namespace psz {
namespace {

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / "psz_tests" /
               (std::string(info->test_suite_name()) + "_" + info->name() + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Scene tiny_scene() {
  SceneConfig cfg;
  cfg.num_freqs = 4;
  cfg.max_order = 2;
  cfg.num_speakers = 8;
  return make_scene(cfg);
}

GenerateOptions tiny_options() {
  GenerateOptions g;
  g.samples = 20;
  g.seed = 5;
  return g;
}

TEST(Pszd, RoundTripPreservesFloat32Values) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint64_t> dims;
    std::uint64_t n = 1;
    for (std::size_t d = 0; d < 1 + trial % 4; ++d) {
      dims.push_back(1 + rng() % 5);
      n *= dims.back();
    }
    std::vector<cdouble> v(n);
    for (auto& x : v) x = oracle::random_cd(rng) * 1e3;
    const auto t = decode_pszd(encode_pszd(dims, v), "x");
    EXPECT_EQ(t.dims, dims);
    ASSERT_EQ(t.values.size(), v.size());
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(t.values[i].real(), static_cast<double>(static_cast<float>(v[i].real())));
      EXPECT_EQ(t.values[i].imag(), static_cast<double>(static_cast<float>(v[i].imag())));
    }
  }
}

TEST(Pszd, HeaderLayout) {
  const auto bytes = encode_pszd({2, 3}, std::vector<cdouble>(6));
  ASSERT_EQ(bytes.size(), 4u + 4u + 4u + 16u + 48u);
  EXPECT_EQ(bytes.substr(0, 4), "PSZD");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 2);
  EXPECT_EQ(bytes[20], 3);
}

TEST(Pszd, RejectsCorruptInput) {
  const auto good = encode_pszd({2, 2}, std::vector<cdouble>(4, cdouble{1.0, 2.0}));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_pszd(bad_magic, "x"), FormatError);
  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(decode_pszd(bad_version, "x"), VersionError);
  EXPECT_THROW(decode_pszd(good.substr(0, good.size() - 1), "x"), SizeMismatchError);
  EXPECT_THROW(decode_pszd(good.substr(0, 10), "x"), ValidationError);
  EXPECT_THROW(encode_pszd({2, 3}, std::vector<cdouble>(4)), DimensionError);
}

TEST(Crc32, KnownValue) { EXPECT_EQ(crc32_hex("123456789"), "cbf43926"); }

TEST(Prefilters, RoundTripWithMetadata) {
  const auto dir = scratch("pf");
  std::mt19937_64 rng(32);
  PreFilterSet a{SpectralMatrix(5, 3), FrequencyGrid::uniform(5), "neural", "Grid-2#1", 0.0, 42};
  for (Eigen::Index k = 0; k < 5; ++k)
    for (Eigen::Index l = 0; l < 3; ++l) a.data(k, l) = oracle::random_cd(rng);
  write_prefilters(dir / "a.pszd", a, "deadbeef");
  const auto r = read_prefilters(dir / "a.pszd", 3);
  EXPECT_EQ(r.config_hash, "deadbeef");
  EXPECT_EQ(r.filters.method, "neural");
  EXPECT_EQ(r.filters.mask, "Grid-2#1");
  EXPECT_EQ(r.filters.sample, 42);
  EXPECT_TRUE(r.filters.freq_grid == a.freq_grid);
  EXPECT_TRUE(r.filters.data.isApprox(a.data, 1e-6));
  EXPECT_THROW(read_prefilters(dir / "a.pszd", 30), DimensionError);

  auto bytes = read_file(dir / "a.pszd");
  bytes[bytes.size() - 1] ^= 0x40;
  write_file(dir / "a.pszd", bytes);
  EXPECT_THROW(read_prefilters(dir / "a.pszd"), ChecksumError);
}

TEST(Prefilters, BareFileWithoutSidecar) {
  const auto dir = scratch("bare");
  write_file(dir / "b.pszd", encode_pszd({4, 2}, std::vector<cdouble>(8, cdouble{0.5, 0.0})));
  const auto r = read_prefilters(dir / "b.pszd", 2);
  EXPECT_EQ(r.filters.method, "external");
  EXPECT_EQ(r.filters.sample, -1);
  EXPECT_EQ(r.filters.freqs(), 4u);
}

TEST(Splits, DisjointCoveringAndSeeded) {
  const auto s = assign_splits(200, SplitRatios{}, 3);
  std::map<std::string, int> count;
  for (const auto& x : s) ++count[x];
  EXPECT_EQ(count["test"], 10);
  EXPECT_EQ(count["val"], 10);
  EXPECT_EQ(count["train"], 180);
  EXPECT_EQ(s, assign_splits(200, SplitRatios{}, 3));
  EXPECT_NE(s, assign_splits(200, SplitRatios{}, 4));
  EXPECT_THROW(assign_splits(10, SplitRatios{0.5, 0.5, 0.5}, 0), ValidationError);
}

struct TinyDataset : ::testing::Test {
  static inline fs::path dir;
  static inline json manifest;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / "psz_tests" / "tiny_dataset";
    fs::remove_all(dir);
    manifest = generate_dataset(tiny_scene(), dir, tiny_options());
  }
};

TEST_F(TinyDataset, RegenerationIsByteIdentical) {
  const auto other = scratch("regen");
  auto opt = tiny_options();
  opt.threads = 3;
  generate_dataset(tiny_scene(), other, opt);
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir);
    EXPECT_EQ(read_file(e.path()), read_file(other / rel)) << rel;
  }
}

TEST_F(TinyDataset, ManifestContents) {
  const auto ds = Dataset::open(dir);
  EXPECT_EQ(ds.size(), 20u);
  EXPECT_EQ(ds.speakers(), 8u);
  EXPECT_EQ(ds.freqs().size(), 4u);
  EXPECT_EQ(ds.config_hash(), tiny_scene().hash());
  EXPECT_EQ(ds.seed(), 5u);
  EXPECT_EQ(manifest["counts"]["control_rows"], 288);
  EXPECT_EQ(manifest["counts"]["monitor_rows"], 578);
  EXPECT_EQ(manifest["max_order"], 2);
  std::set<std::size_t> seen;
  for (const char* s : {"train", "val", "test"})
    for (auto i : ds.split(s)) EXPECT_TRUE(seen.insert(i).second);
  EXPECT_EQ(seen.size(), 20u);
  EXPECT_EQ(ds.split("test").size(), 1u);
  EXPECT_EQ(ds.split("all").size(), 20u);
  EXPECT_THROW(ds.split("bogus"), ValidationError);
  EXPECT_NO_THROW(ds.validate());
}

TEST_F(TinyDataset, TensorsMatchDirectSimulation) {
  const auto scene = tiny_scene();
  const auto ds = Dataset::open(dir);
  const auto h = ds.h_ctrl();
  const auto direct = simulate_atf(scene.room, scene.speakers.positions, scene.control_points(),
                                   scene.freqs, 2);
  ASSERT_EQ(h.data.data().size(), direct.data.data().size());
  for (std::size_t i = 0; i < h.data.data().size(); ++i) {
    const auto& d = direct.data.data()[i];
    EXPECT_EQ(h.data.data()[i].real(), static_cast<double>(static_cast<float>(d.real())));
    EXPECT_EQ(h.data.data()[i].imag(), static_cast<double>(static_cast<float>(d.imag())));
  }

  const auto rec = ds.sample(3);
  const std::array<Point3, 1> src{rec.source};
  const auto g = simulate_atf(scene.room, src, scene.control_bright.points, scene.freqs, 2);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t m = 0; m < 144; ++m) {
      const auto d = g.data(k, m, 0);
      EXPECT_EQ(rec.control_target(k, m / 12, m % 12).real(),
                static_cast<double>(static_cast<float>(d.real())));
      EXPECT_EQ(rec.control_target(k, m / 12, m % 12).imag(),
                static_cast<double>(static_cast<float>(d.imag())));
    }
  EXPECT_EQ(rec.monitor_target.rows(), 17u);
  const auto t = rec.control_as_target();
  EXPECT_EQ(t.bright(1, 13), rec.control_target(1, 1, 1));
}

TEST_F(TinyDataset, DetectsTamperedFiles) {
  const auto copy = scratch("tamper");
  fs::copy(dir, copy, fs::copy_options::recursive);
  {
    auto bytes = read_file(copy / "samples/control_000004.pszd");
    bytes[bytes.size() - 3] ^= 0x11;
    write_file(copy / "samples/control_000004.pszd", bytes);
  }
  const auto ds = Dataset::open(copy);
  EXPECT_THROW(ds.sample(4), ChecksumError);
  EXPECT_THROW(ds.validate(), ChecksumError);

  {
    auto bytes = read_file(copy / "samples/monitor_000002.pszd");
    write_file(copy / "samples/monitor_000002.pszd", bytes + "xx");
  }
  try {
    Dataset::open(copy);
    FAIL() << "expected SizeMismatchError";
  } catch (const SizeMismatchError& e) {
    EXPECT_NE(std::string(e.what()).find("monitor_000002"), std::string::npos);
  }
}

TEST_F(TinyDataset, ManifestVersionAndFormatChecked) {
  const auto copy = scratch("ver");
  fs::copy(dir, copy, fs::copy_options::recursive);
  auto m = json::parse(read_file(copy / "manifest.json"));
  m["schema_version"] = 99;
  write_file(copy / "manifest.json", m.dump());
  EXPECT_THROW(Dataset::open(copy), VersionError);
  write_file(copy / "manifest.json", "{not json");
  EXPECT_THROW(Dataset::open(copy), FormatError);
  fs::remove(copy / "manifest.json");
  EXPECT_THROW(Dataset::open(copy), ValidationError);
}

}  // namespace
}  // namespace psz
