// Copyright 2026 The gripforce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gripforce/dataset.hpp"
#include "gripforce/numerics.hpp"

namespace gripforce::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
      path_ = base / ("gripforce_test_" + std::to_string(rd()));
      if (std::filesystem::create_directory(path_)) return;
    }
    throw std::runtime_error("could not create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
}

/// Record on the 120 Hz grid with the given per-sample grips; wrench is a
/// smooth deterministic pattern so no channel is constant.
inline HandoverRecord make_record(std::int64_t pair, std::int64_t handover, double t0_ms,
                                  const Vector& giver, const Vector& taker) {
  HandoverRecord r;
  r.pair_id = pair;
  r.handover_id = handover;
  for (std::size_t k = 0; k < giver.size(); ++k) {
    const double t = t0_ms + static_cast<double>(k) * 1000.0 / 120.0;
    r.t_ms.push_back(t);
    const double u = static_cast<double>(k);
    r.wrench.push_back({std::sin(0.1 * u), std::cos(0.07 * u), 0.01 * u, 0.001 * std::sin(u),
                        0.002 * std::cos(0.3 * u), 0.0005 * u});
  }
  r.grip_giver = giver;
  r.grip_taker = taker;
  return r;
}

/// Linear grip exchange crossing at `cross` (first index with giver <= taker).
inline HandoverRecord crossing_record(std::size_t n, std::size_t cross, double t0_ms = 0.0,
                                      std::int64_t pair = 1, std::int64_t handover = 1) {
  Vector g(n), tk(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double d = static_cast<double>(cross) - static_cast<double>(k) - 0.5;
    g[k] = 5.0 + 0.01 * d;
    tk[k] = 5.0 - 0.01 * d;
  }
  return make_record(pair, handover, t0_ms, g, tk);
}

}  // namespace gripforce::testing
