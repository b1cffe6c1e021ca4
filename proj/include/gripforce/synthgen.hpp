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

// Synthetic handover recordings with planted ground truth.
//
// With s(t) = sigmoid((t - m) / w):
//   giver grip  = hold * (1 - s)            taker grip = peak * s
//   fz          = load * s                  (load share carried by the taker)
//   fx          = kPullGain  * load * 4 s (1 - s)
//   fy          = kSideGain  * load * s
//   tx          = kRollGain  * load * s
//   ty          = kPitchGain * load * 4 s (1 - s)
//   tz          = kSqueezeGain * giver grip
// plus white noise on every channel and AR(1) noise (rho = kNoiseRho) on the
// five non-vertical wrench channels. Time stamps carry a random clock offset,
// so records come out unaligned.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gripforce/dataset.hpp"
#include "gripforce/error.hpp"
#include "gripforce/numerics.hpp"

namespace gripforce {

inline constexpr double kPullGain = 0.15;
inline constexpr double kSideGain = 0.05;
inline constexpr double kRollGain = 0.02;    // m
inline constexpr double kPitchGain = -0.01;  // m
inline constexpr double kSqueezeGain = 0.002;  // m
inline constexpr double kNoiseRho = 0.9;
inline constexpr double kMaxClockOffsetMs = 10000.0;

/// Concrete parameters of one synthetic handover (times in ms, forces in N).
struct SynthParams {
  double t_start_ms = -1500.0;
  double t_end_ms = 800.0;
  double giver_hold_N = 10.0;
  double taker_peak_N = 10.0;
  double transfer_midpoint_ms = 0.0;
  double transfer_width_ms = 150.0;
  double load_N = 4.0;
  double force_noise_std = 0.05;
  double torque_noise_std = 0.005;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(transfer_width_ms > 0)) throw GenerationError("transfer_width_ms must be > 0");
    if (!(giver_hold_N > 0 && taker_peak_N > 0 && load_N > 0))
      throw GenerationError("forces must be > 0");
    if (!(force_noise_std >= 0 && torque_noise_std >= 0))
      throw GenerationError("noise std must be >= 0");
    if (t_start_ms - transfer_midpoint_ms > -1300.0 || t_end_ms - transfer_midpoint_ms < 600.0)
      throw GenerationError("duration must cover [-1300, +600] ms around the transfer midpoint");
  }
};

/// Ranges for drawing SynthParams in generate_dataset.
struct SynthRanges {
  Interval giver_hold_N{8.0, 15.0};
  Interval taker_peak_N{8.0, 15.0};
  Interval transfer_width_ms{120.0, 160.0};
  Interval load_N{3.0, 6.0};
  double jitter = 0.1;  // relative per-handover spread around the pair's style
  double force_noise_std = 0.05;
  double torque_noise_std = 0.005;
};

inline std::size_t synth_sample_count(const SynthParams& p) {
  return static_cast<std::size_t>(std::floor((p.t_end_ms - p.t_start_ms) / kPeriodMs + 1e-9)) + 1;
}

inline double synth_time(const SynthParams& p, std::size_t k) {
  return p.t_start_ms + static_cast<double>(k) * 1000.0 / kRateHz;
}

inline double noiseless_giver(const SynthParams& p, double t) {
  return p.giver_hold_N * (1.0 / (1.0 + std::exp((t - p.transfer_midpoint_ms) / p.transfer_width_ms)));
}

inline double noiseless_taker(const SynthParams& p, double t) {
  return p.taker_peak_N * (1.0 / (1.0 + std::exp(-(t - p.transfer_midpoint_ms) / p.transfer_width_ms)));
}

/// Index of the first sample at or after the noiseless grip crossing.
inline std::size_t planted_crossing_index(const SynthParams& p) {
  const std::size_t n = synth_sample_count(p);
  for (std::size_t k = 1; k < n; ++k) {
    const double t = synth_time(p, k);
    if (noiseless_giver(p, t) - noiseless_taker(p, t) <= 0.0) return k;
  }
  throw GenerationError("grip curves do not cross inside the recording");
}

inline HandoverRecord generate_handover(const SynthParams& p, std::int64_t pair_id,
                                        std::int64_t handover_id) {
  p.validate();
  Rng rng(p.seed);
  const double clock_offset = rng.uniform(0.0, kMaxClockOffsetMs);
  const std::size_t n = synth_sample_count(p);

  HandoverRecord r;
  r.pair_id = pair_id;
  r.handover_id = handover_id;
  r.t_ms.resize(n);
  r.wrench.resize(n);
  r.grip_giver.resize(n);
  r.grip_taker.resize(n);

  const double innov = std::sqrt(1.0 - kNoiseRho * kNoiseRho);
  std::array<double, kWrenchChannels> ar{};
  std::array<double, kWrenchChannels> ar_std{p.force_noise_std, p.force_noise_std, 0.0,
                                             p.torque_noise_std, p.torque_noise_std,
                                             p.torque_noise_std};
  for (std::size_t j = 0; j < kWrenchChannels; ++j) ar[j] = ar_std[j] * rng.standard_normal();

  for (std::size_t k = 0; k < n; ++k) {
    const double t = synth_time(p, k);
    const double s = 1.0 / (1.0 + std::exp(-(t - p.transfer_midpoint_ms) / p.transfer_width_ms));
    const double bump = 4.0 * s * (1.0 - s);
    const double giver = noiseless_giver(p, t);
    const double taker = noiseless_taker(p, t);

    if (k > 0)
      for (std::size_t j = 0; j < kWrenchChannels; ++j)
        ar[j] = kNoiseRho * ar[j] + innov * ar_std[j] * rng.standard_normal();

    std::array<double, kWrenchChannels> clean{kPullGain * p.load_N * bump,
                                              kSideGain * p.load_N * s,
                                              p.load_N * s,
                                              kRollGain * p.load_N * s,
                                              kPitchGain * p.load_N * bump,
                                              kSqueezeGain * giver};
    std::array<double, kWrenchChannels> w{};
    for (std::size_t j = 0; j < kWrenchChannels; ++j) {
      const double white = j < 3 ? p.force_noise_std : p.torque_noise_std;
      w[j] = clean[j] + ar[j] + white * rng.standard_normal();
    }
    r.wrench[k] = WrenchSample::from_channels(w);
    r.grip_giver[k] = giver + p.force_noise_std * rng.standard_normal();
    r.grip_taker[k] = taker + p.force_noise_std * rng.standard_normal();
    r.t_ms[k] = clock_offset + t;
  }
  return r;
}

/// n_pairs x per_pair records. Each pair draws a style (hold, peak, width,
/// load) from `ranges`; each handover jitters it and gets its own noise seed.
inline std::vector<HandoverRecord> generate_dataset(std::size_t n_pairs, std::size_t per_pair,
                                                    std::uint64_t seed,
                                                    const SynthRanges& ranges = {}) {
  detail::require(n_pairs >= 1 && per_pair >= 1, "generate_dataset: counts must be >= 1");
  std::vector<HandoverRecord> out;
  out.reserve(n_pairs * per_pair);
  for (std::size_t pair = 1; pair <= n_pairs; ++pair) {
    Rng style(derive_seed(seed, pair));
    const double hold = style.uniform(ranges.giver_hold_N.lo, ranges.giver_hold_N.hi);
    const double peak = style.uniform(ranges.taker_peak_N.lo, ranges.taker_peak_N.hi);
    const double width = style.uniform(ranges.transfer_width_ms.lo, ranges.transfer_width_ms.hi);
    const double load = style.uniform(ranges.load_N.lo, ranges.load_N.hi);
    auto jitter = [&](double center, const Interval& r) {
      const double v = center * (1.0 + ranges.jitter * style.uniform(-1.0, 1.0));
      return std::clamp(v, r.lo, r.hi);
    };
    for (std::size_t h = 1; h <= per_pair; ++h) {
      SynthParams p;
      p.giver_hold_N = jitter(hold, ranges.giver_hold_N);
      p.taker_peak_N = jitter(peak, ranges.taker_peak_N);
      p.transfer_width_ms = jitter(width, ranges.transfer_width_ms);
      p.load_N = jitter(load, ranges.load_N);
      p.force_noise_std = ranges.force_noise_std;
      p.torque_noise_std = ranges.torque_noise_std;
      p.seed = style.next();
      out.push_back(generate_handover(p, static_cast<std::int64_t>(pair),
                                      static_cast<std::int64_t>(h)));
    }
  }
  return out;
}

}  // namespace gripforce
