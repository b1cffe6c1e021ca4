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

// Handover recordings: CSV ingestion, alignment at the grip intersection,
// window sampling of (wrench history, grip forecast) pairs, pair-disjoint
// splits and z-score normalisation.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gripforce/error.hpp"
#include "gripforce/numerics.hpp"

namespace gripforce {

inline constexpr double kRateHz = 120.0;
inline constexpr double kPeriodMs = 1000.0 / kRateHz;
inline constexpr std::size_t kHorizon = 70;
inline constexpr std::size_t kWrenchChannels = 6;

/// Number of grid samples spanned by `ms` milliseconds at 120 Hz.
inline long ms_to_steps(double ms) { return std::lround(ms * kRateHz / 1000.0); }

struct WrenchSample {
  double fx = 0, fy = 0, fz = 0;  // N
  double tx = 0, ty = 0, tz = 0;  // N m

  std::array<double, kWrenchChannels> channels() const { return {fx, fy, fz, tx, ty, tz}; }
  static WrenchSample from_channels(std::span<const double> c) {
    return {c[0], c[1], c[2], c[3], c[4], c[5]};
  }
  bool finite() const {
    auto c = channels();
    return all_finite(c);
  }
  bool operator==(const WrenchSample&) const = default;
};

inline constexpr std::array<std::string_view, kWrenchChannels> kWrenchChannelNames = {
    "fx_N", "fy_N", "fz_N", "tx_Nm", "ty_Nm", "tz_Nm"};

struct HandoverRecord {
  std::int64_t pair_id = 0;
  std::int64_t handover_id = 0;
  double rate_hz = kRateHz;
  Vector t_ms;
  std::vector<WrenchSample> wrench;
  Vector grip_giver;
  Vector grip_taker;
  bool aligned = false;  // t_ms == 0 at the grip intersection

  std::size_t size() const { return t_ms.size(); }
  bool operator==(const HandoverRecord&) const = default;
};

/// One (X, Y) pair. X is the wrench over [t_o, t_e] (both ends on the grid),
/// Y the giver grip on the 70 samples following t_e, i.e. (t_e, t_f].
struct TrainingSample {
  std::int64_t pair_id = 0;
  std::int64_t handover_id = 0;
  double t_o_ms = 0;
  double t_e_ms = 0;
  double t_f_ms = 0;
  Vector x_t_ms;
  std::vector<WrenchSample> x;
  Vector y_t_ms;
  Vector y;
};

struct Interval {
  double lo = 0;
  double hi = 0;
};

/// Grid of window end points t_e and start points t_o (ms, relative to the
/// aligned t = 0). Each grid runs from the top of its range downward by its
/// stride. The t_o stride of 247.5 ms puts five points on [-1250, -260]
/// including both ends.
struct SamplingPolicy {
  Interval t_e_range{-250.0, 0.0};
  Interval t_o_range{-1250.0, -260.0};
  double t_e_stride_ms = 50.0;
  double t_o_stride_ms = 247.5;

  void validate() const {
    detail::require(t_e_range.lo <= t_e_range.hi, "SamplingPolicy: empty t_e range");
    detail::require(t_o_range.lo <= t_o_range.hi, "SamplingPolicy: empty t_o range");
    detail::require(t_e_stride_ms > 0 && t_o_stride_ms > 0,
                    "SamplingPolicy: strides must be positive");
    detail::require(t_o_range.hi < t_e_range.lo,
                    "SamplingPolicy: t_o range must lie before t_e range");
  }

  static Vector grid(const Interval& r, double stride) {
    Vector g;
    for (long k = 0;; ++k) {
      const double v = r.hi - static_cast<double>(k) * stride;
      if (v < r.lo - 1e-9) break;
      g.push_back(v);
    }
    return g;
  }
  Vector t_e_grid() const { return grid(t_e_range, t_e_stride_ms); }
  Vector t_o_grid() const { return grid(t_o_range, t_o_stride_ms); }
};

/// Per-channel z-score statistics: six wrench channels plus giver grip.
struct NormStats {
  std::array<double, kWrenchChannels> wrench_mean{};
  std::array<double, kWrenchChannels> wrench_std{1, 1, 1, 1, 1, 1};
  double grip_mean = 0.0;
  double grip_std = 1.0;

  bool operator==(const NormStats&) const = default;
};

/// Model-ready sample: x is T x 6, y has 70 entries, both z-scored.
struct NormalizedSample {
  Matrix x;
  Vector y;
};

// ---------------------------------------------------------------------------
// CSV

namespace csv {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty();
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
  s = trim(s);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && !s.empty();
}

}  // namespace csv

inline constexpr std::array<std::string_view, 11> kRecordingColumns = {
    "pair_id", "handover_id", "t_ms",  "fx_N",         "fy_N",        "fz_N",
    "tx_Nm",   "ty_Nm",       "tz_Nm", "grip_giver_N", "grip_taker_N"};

inline void write_recordings(std::ostream& os, std::span<const HandoverRecord> records) {
  for (std::size_t i = 0; i < kRecordingColumns.size(); ++i)
    os << (i ? "," : "") << kRecordingColumns[i];
  os << '\n';
  using csv::format_double;
  for (const auto& r : records) {
    for (std::size_t k = 0; k < r.size(); ++k) {
      const auto& w = r.wrench[k];
      os << r.pair_id << ',' << r.handover_id << ',' << format_double(r.t_ms[k]) << ','
         << format_double(w.fx) << ',' << format_double(w.fy) << ',' << format_double(w.fz)
         << ',' << format_double(w.tx) << ',' << format_double(w.ty) << ','
         << format_double(w.tz) << ',' << format_double(r.grip_giver[k]) << ','
         << format_double(r.grip_taker[k]) << '\n';
    }
  }
}

inline void write_recordings(const std::string& path, std::span<const HandoverRecord> records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot open '" + path + "' for writing");
  write_recordings(os, records);
  if (!os) throw LoadError("write to '" + path + "' failed");
}

/// Parses recording CSV. Records come back sorted by (pair_id, handover_id),
/// samples in file order, which must be strictly increasing in time at
/// 120 Hz (spacing within 1% of 1000/120 ms).
inline std::vector<HandoverRecord> load_recordings(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw LoadError("row 1: missing header");
  std::array<std::size_t, kRecordingColumns.size()> col{};
  {
    auto names = csv::split(csv::trim(line));
    for (std::size_t c = 0; c < kRecordingColumns.size(); ++c) {
      auto it = std::find_if(names.begin(), names.end(), [&](std::string_view n) {
        return csv::trim(n) == kRecordingColumns[c];
      });
      if (it == names.end())
        throw LoadError("row 1: missing column '" + std::string(kRecordingColumns[c]) + "'");
      col[c] = static_cast<std::size_t>(it - names.begin());
    }
  }
  const std::size_t min_fields = *std::max_element(col.begin(), col.end()) + 1;

  std::map<std::pair<std::int64_t, std::int64_t>, HandoverRecord> groups;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    auto trimmed = csv::trim(line);
    if (trimmed.empty()) continue;
    auto fields = csv::split(trimmed);
    auto where = [&](std::size_t c) {
      return "row " + std::to_string(row) + " field '" + std::string(kRecordingColumns[c]) + "'";
    };
    if (fields.size() < min_fields)
      throw LoadError("row " + std::to_string(row) + ": expected " +
                      std::to_string(kRecordingColumns.size()) + " fields, got " +
                      std::to_string(fields.size()));
    std::int64_t pair = 0, handover = 0;
    if (!csv::parse_int(fields[col[0]], pair)) throw LoadError(where(0) + ": not an integer");
    if (!csv::parse_int(fields[col[1]], handover)) throw LoadError(where(1) + ": not an integer");
    std::array<double, 9> v{};
    for (std::size_t c = 2; c < kRecordingColumns.size(); ++c) {
      if (!csv::parse_double(fields[col[c]], v[c - 2]))
        throw LoadError(where(c) + ": not a number");
      if (!std::isfinite(v[c - 2])) throw LoadError(where(c) + ": non-finite value");
    }
    auto& rec = groups[{pair, handover}];
    if (rec.t_ms.empty()) {
      rec.pair_id = pair;
      rec.handover_id = handover;
    } else {
      const double dt = v[0] - rec.t_ms.back();
      if (!(dt > 0)) throw LoadError(where(2) + ": timestamps not strictly increasing");
      if (std::abs(dt - kPeriodMs) > 0.01 * kPeriodMs)
        throw LoadError(where(2) + ": spacing " + csv::format_double(dt) +
                        " ms is not 120 Hz");
    }
    rec.t_ms.push_back(v[0]);
    rec.wrench.push_back({v[1], v[2], v[3], v[4], v[5], v[6]});
    rec.grip_giver.push_back(v[7]);
    rec.grip_taker.push_back(v[8]);
  }

  std::vector<HandoverRecord> out;
  out.reserve(groups.size());
  for (auto& [key, rec] : groups) out.push_back(std::move(rec));
  return out;
}

inline std::vector<HandoverRecord> load_recordings(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open '" + path + "'");
  return load_recordings(is);
}

// ---------------------------------------------------------------------------
// Alignment

/// Indices k where the sign class of (giver - taker) flips between k-1 and k,
/// "positive" meaning strictly > 0.
inline std::vector<std::size_t> grip_sign_changes(const HandoverRecord& r) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k < r.size(); ++k) {
    const bool prev = r.grip_giver[k - 1] - r.grip_taker[k - 1] > 0;
    const bool cur = r.grip_giver[k] - r.grip_taker[k] > 0;
    if (prev != cur) out.push_back(k);
  }
  return out;
}

/// Shifts time so that t = 0 falls on the first sample at or after the single
/// downward crossing of giver grip through taker grip.
inline HandoverRecord align_handover(HandoverRecord record) {
  const auto changes = grip_sign_changes(record);
  const std::string id =
      "pair " + std::to_string(record.pair_id) + " handover " + std::to_string(record.handover_id);
  if (changes.empty()) throw AlignmentError(id + ": giver and taker grip never cross");
  if (changes.size() > 1) {
    std::string list;
    for (auto k : changes) list += (list.empty() ? "" : ",") + std::to_string(k);
    throw AlignmentError(id + ": multiple grip crossings at indices " + list);
  }
  const std::size_t k = changes.front();
  if (!(record.grip_giver[k - 1] - record.grip_taker[k - 1] > 0))
    throw AlignmentError(id + ": the only grip crossing at index " + std::to_string(k) +
                         " is upward (taker above giver before it)");
  const double shift = record.t_ms[k];
  for (auto& t : record.t_ms) t -= shift;
  record.aligned = true;
  return record;
}

/// Index of t = 0 in an aligned record.
inline std::size_t zero_index(const HandoverRecord& r) {
  detail::require(r.aligned, "record is not aligned");
  for (std::size_t k = 0; k < r.size(); ++k)
    if (r.t_ms[k] == 0.0) return k;
  throw ContractViolation("aligned record has no sample at t = 0");
}

// ---------------------------------------------------------------------------
// Window sampling

/// All grid samples whose windows fit inside the record. Output order:
/// t_e descending, then t_o descending.
inline std::vector<TrainingSample> extract_samples(const HandoverRecord& record,
                                                   const SamplingPolicy& policy = {}) {
  if (!record.aligned) throw ContractViolation("extract_samples: record is not aligned");
  policy.validate();
  const auto k0 = static_cast<long>(zero_index(record));
  const auto n = static_cast<long>(record.size());
  const auto horizon = static_cast<long>(kHorizon);

  std::vector<TrainingSample> out;
  for (double t_e : policy.t_e_grid()) {
    for (double t_o : policy.t_o_grid()) {
      const long i_e = k0 + ms_to_steps(t_e);
      const long i_o = i_e - ms_to_steps(t_e - t_o);
      if (i_o < 0 || i_e + horizon > n - 1) continue;
      TrainingSample s;
      s.pair_id = record.pair_id;
      s.handover_id = record.handover_id;
      s.t_o_ms = t_o;
      s.t_e_ms = t_e;
      s.t_f_ms = t_e + static_cast<double>(kHorizon) * kPeriodMs;
      for (long i = i_o; i <= i_e; ++i) {
        s.x_t_ms.push_back(record.t_ms[static_cast<std::size_t>(i)]);
        s.x.push_back(record.wrench[static_cast<std::size_t>(i)]);
      }
      for (long i = i_e + 1; i <= i_e + horizon; ++i) {
        s.y_t_ms.push_back(record.t_ms[static_cast<std::size_t>(i)]);
        s.y.push_back(record.grip_giver[static_cast<std::size_t>(i)]);
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

using PairSplit = std::pair<std::vector<HandoverRecord>, std::vector<HandoverRecord>>;

/// Partitions records into (train, test) by pair id, preserving order.
inline PairSplit split_by_pair(std::span<const HandoverRecord> records,
                               const std::set<std::int64_t>& test_pair_ids) {
  std::set<std::int64_t> present;
  for (const auto& r : records) present.insert(r.pair_id);
  for (auto id : test_pair_ids)
    if (!present.count(id))
      throw ContractViolation("split_by_pair: unknown test pair id " + std::to_string(id));
  PairSplit out;
  for (const auto& r : records)
    (test_pair_ids.count(r.pair_id) ? out.second : out.first).push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// Normalisation

inline NormStats fit_norm_stats(std::span<const TrainingSample> train) {
  if (train.empty()) throw ContractViolation("fit_norm_stats: empty training set");
  NormStats st;
  std::array<double, kWrenchChannels> sum{}, sq{};
  std::size_t nx = 0, ny = 0;
  double gsum = 0, gsq = 0;
  for (const auto& s : train) {
    for (const auto& w : s.x) {
      auto c = w.channels();
      for (std::size_t j = 0; j < kWrenchChannels; ++j) sum[j] += c[j];
    }
    nx += s.x.size();
    for (double v : s.y) gsum += v;
    ny += s.y.size();
  }
  for (std::size_t j = 0; j < kWrenchChannels; ++j) st.wrench_mean[j] = sum[j] / double(nx);
  st.grip_mean = gsum / double(ny);
  for (const auto& s : train) {
    for (const auto& w : s.x) {
      auto c = w.channels();
      for (std::size_t j = 0; j < kWrenchChannels; ++j) {
        const double d = c[j] - st.wrench_mean[j];
        sq[j] += d * d;
      }
    }
    for (double v : s.y) gsq += (v - st.grip_mean) * (v - st.grip_mean);
  }
  auto check = [](double sd, double mean, std::string_view name) {
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw StatsError("channel '" + std::string(name) + "' has zero variance");
  };
  for (std::size_t j = 0; j < kWrenchChannels; ++j) {
    st.wrench_std[j] = std::sqrt(sq[j] / double(nx));
    check(st.wrench_std[j], st.wrench_mean[j], kWrenchChannelNames[j]);
  }
  st.grip_std = std::sqrt(gsq / double(ny));
  check(st.grip_std, st.grip_mean, "grip_giver_N");
  return st;
}

inline Matrix normalize_wrench(std::span<const WrenchSample> x, const NormStats& st) {
  Matrix m(x.size(), kWrenchChannels);
  for (std::size_t t = 0; t < x.size(); ++t) {
    auto c = x[t].channels();
    for (std::size_t j = 0; j < kWrenchChannels; ++j)
      m(t, j) = (c[j] - st.wrench_mean[j]) / st.wrench_std[j];
  }
  return m;
}

inline std::vector<WrenchSample> denormalize_wrench(const Matrix& m, const NormStats& st) {
  std::vector<WrenchSample> out(m.rows());
  for (std::size_t t = 0; t < m.rows(); ++t) {
    std::array<double, kWrenchChannels> c{};
    for (std::size_t j = 0; j < kWrenchChannels; ++j)
      c[j] = m(t, j) * st.wrench_std[j] + st.wrench_mean[j];
    out[t] = WrenchSample::from_channels(c);
  }
  return out;
}

inline double normalize_grip(double v, const NormStats& st) {
  return (v - st.grip_mean) / st.grip_std;
}
inline double denormalize_grip(double v, const NormStats& st) {
  return v * st.grip_std + st.grip_mean;
}

inline NormalizedSample apply_norm(const TrainingSample& s, const NormStats& st) {
  NormalizedSample n{normalize_wrench(s.x, st), Vector(s.y.size())};
  for (std::size_t k = 0; k < s.y.size(); ++k) n.y[k] = normalize_grip(s.y[k], st);
  return n;
}

inline std::vector<NormalizedSample> apply_norm(std::span<const TrainingSample> samples,
                                                const NormStats& st) {
  std::vector<NormalizedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(apply_norm(s, st));
  return out;
}

}  // namespace gripforce
