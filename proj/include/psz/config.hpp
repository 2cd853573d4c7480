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

#include <boost/crc.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "psz/common.hpp"

namespace psz {

/// Resolved scene configuration.
///
/// Read from a plain `key = value` file; `#` starts a comment. Unknown keys
/// are rejected. Keys left out keep the defaults below, which reproduce the
/// full-scale experiment geometry.
struct SceneConfig {
  double room_x = 8.0;
  double room_y = 8.0;
  double room_z = 3.0;
  double rt60 = 0.25;
  double speed_of_sound = 343.0;
  int max_order = -1;  // -1: derive from RT60

  int num_speakers = 30;
  double array_radius = 1.68;

  double zone_width = 0.4;
  double zone_height = 0.4;
  double zone_gap = 1.0;  // edge-to-edge
  int control_n = 12;
  int monitor_n = 17;
  double plane_z = 1.5;

  int num_freqs = 512;
  double f_max = 2000.0;

  double source_r_min = 1.7;
  double source_r_max = 3.5;
  int ref_speaker = -1;  // -1: speaker nearest the bright-zone center

  std::uint64_t seed = 0;

  /// Keys explicitly present in the parsed file.
  std::set<std::string> explicit_keys;

  bool has(const std::string& key) const { return explicit_keys.count(key) != 0; }

  /// Sets one key from its textual value.
  void set(const std::string& key, const std::string& value) {
    auto as_double = [&] {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != value.size()) throw ValidationError("config: bad number for " + key + ": " + value);
      return v;
    };
    auto as_int = [&] {
      const double v = as_double();
      if (v != static_cast<double>(static_cast<long long>(v)))
        throw ValidationError("config: " + key + " must be an integer");
      return static_cast<long long>(v);
    };
    // clang-format off
    if (key == "room_x") room_x = as_double();
    else if (key == "room_y") room_y = as_double();
    else if (key == "room_z") room_z = as_double();
    else if (key == "rt60") rt60 = as_double();
    else if (key == "speed_of_sound") speed_of_sound = as_double();
    else if (key == "max_order") max_order = static_cast<int>(as_int());
    else if (key == "num_speakers") num_speakers = static_cast<int>(as_int());
    else if (key == "array_radius") array_radius = as_double();
    else if (key == "zone_width") zone_width = as_double();
    else if (key == "zone_height") zone_height = as_double();
    else if (key == "zone_gap") zone_gap = as_double();
    else if (key == "control_n") control_n = static_cast<int>(as_int());
    else if (key == "monitor_n") monitor_n = static_cast<int>(as_int());
    else if (key == "plane_z") plane_z = as_double();
    else if (key == "num_freqs") num_freqs = static_cast<int>(as_int());
    else if (key == "f_max") f_max = as_double();
    else if (key == "source_r_min") source_r_min = as_double();
    else if (key == "source_r_max") source_r_max = as_double();
    else if (key == "ref_speaker") ref_speaker = static_cast<int>(as_int());
    else if (key == "seed") seed = static_cast<std::uint64_t>(as_int());
    else throw ValidationError("config: unknown key '" + key + "'");
    // clang-format on
    explicit_keys.insert(key);
  }

  static SceneConfig parse(std::istream& in) {
    SceneConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static SceneConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    return parse(in);
  }

  /// Canonical `key=value` listing of every scene key (seed excluded: it
  /// selects samples, not the scene).
  std::map<std::string, std::string> canonical() const {
    auto num = [](double v) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      return std::string(buf);
    };
    return {
        {"room_x", num(room_x)},
        {"room_y", num(room_y)},
        {"room_z", num(room_z)},
        {"rt60", num(rt60)},
        {"speed_of_sound", num(speed_of_sound)},
        {"max_order", std::to_string(max_order)},
        {"num_speakers", std::to_string(num_speakers)},
        {"array_radius", num(array_radius)},
        {"zone_width", num(zone_width)},
        {"zone_height", num(zone_height)},
        {"zone_gap", num(zone_gap)},
        {"control_n", std::to_string(control_n)},
        {"monitor_n", std::to_string(monitor_n)},
        {"plane_z", num(plane_z)},
        {"num_freqs", std::to_string(num_freqs)},
        {"f_max", num(f_max)},
        {"source_r_min", num(source_r_min)},
        {"source_r_max", num(source_r_max)},
        {"ref_speaker", std::to_string(ref_speaker)},
    };
  }

  std::string canonical_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : canonical()) os << k << '=' << v << '\n';
    return os.str();
  }

  /// CRC-32 of the canonical listing, as 8 lowercase hex digits.
  std::string hash() const {
    const std::string text = canonical_text();
    boost::crc_32_type crc;
    crc.process_bytes(text.data(), text.size());
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(crc.checksum()));
    return buf;
  }
};

}  // namespace psz
