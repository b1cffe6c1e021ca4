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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion ids (e.g. "C1 C3") to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gripforce/cli.hpp"
#include "gripforce/gripforce.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace gripforce;

namespace {

// Fixed seeds for the end-to-end run.
constexpr std::uint64_t kDatasetSeed = 20240917;
const std::set<std::int64_t> kHeldOutPairs = {12, 13};

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.standard_normal();
  return m;
}

// --- C1 --------------------------------------------------------------------

Outcome gradient_check() {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    Rng rng(derive_seed(1001, draw));
    const ModelParams p = init_params(rng.next(), 8);
    const Matrix x = random_matrix(rng, 12, kWrenchChannels);
    Vector y(kHorizon);
    for (double& v : y) v = rng.standard_normal();
    const auto lg = backward(x, y, p);
    const auto r = oracle::finite_difference_check(x, y, p, lg.grads, 1e-5);
    checked += r.checked;
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      where = fmt("draw %d %s", static_cast<int>(draw), r.worst_tensor.c_str());
    }
  }
  return {worst <= 1e-4,
          fmt("max rel err %.3e over %zu entries (worst: %s)", worst, checked, where.c_str())};
}

// --- C2 --------------------------------------------------------------------

Outcome adam_closed_form() {
  // theta = 0.5, g = 0.2, one step from zero moments.
  //   m = 0.1 * 0.2 = 0.02, v = 0.001 * 0.04 = 4e-5
  //   m_hat = 0.02 / 0.1 = 0.2, v_hat = 4e-5 / 0.001 = 0.04
  //   theta' = 0.5 - 5e-4 * 0.2 / (0.2 + 1e-8)
  const double expected = 0.5 - 5e-4 * 0.2 / (0.2 + 1e-8);
  ModelParams p = init_params(0, 1);
  for_each_tensor(p, [](const std::string&, auto, std::span<double> d) {
    std::fill(d.begin(), d.end(), 0.5);
  });
  Gradients g = zeros_like(p);
  for_each_tensor(g, [](const std::string&, auto, std::span<double> d) {
    std::fill(d.begin(), d.end(), 0.2);
  });
  AdamState state = AdamState::for_params(p);
  adam_step(p, g, state, TrainConfig{});
  double worst = 0.0;
  for_each_tensor(p, [&](const std::string&, auto, std::span<const double> d) {
    for (double v : d) worst = std::max(worst, std::abs(v - expected));
  });
  return {worst <= 1e-12, fmt("theta' = %.17g, |err| %.2e", expected, worst)};
}

// --- C3 --------------------------------------------------------------------

Outcome protocol_constants() {
  const SamplingPolicy policy;
  Rng rng(303);
  std::size_t windows = 0, truncated = 0;
  std::string failure;
  auto fail = [&](const std::string& why) {
    if (failure.empty()) failure = why;
  };
  const auto te_grid = policy.t_e_grid();
  const auto to_grid = policy.t_o_grid();
  for (double t : te_grid)
    if (t < -250.0 || t > 0.0) fail(fmt("t_e grid point %g outside [-250, 0]", t));
  for (double t : to_grid)
    if (t < -1250.0 || t > -260.0) fail(fmt("t_o grid point %g outside [-1250, -260]", t));

  for (int rec = 0; rec < 100; ++rec) {
    SynthParams sp;
    sp.giver_hold_N = rng.uniform(8, 15);
    sp.taker_peak_N = rng.uniform(8, 15);
    sp.transfer_width_ms = rng.uniform(120, 160);
    sp.load_N = rng.uniform(3, 6);
    sp.t_start_ms = -rng.uniform(1300, 1700);
    sp.t_end_ms = rng.uniform(600, 900);
    sp.seed = rng.next();
    HandoverRecord r = align_handover(generate_handover(sp, 1 + rec / 10, 1 + rec % 10));
    if (rec % 2 == 1) {
      // Crop the record so some windows no longer fit.
      const std::size_t k0 = zero_index(r);
      const std::size_t lo = k0 - static_cast<std::size_t>(rng.uniform(30, k0));
      const std::size_t hi = std::min(r.size(), k0 + 60 + rng.below(40));
      HandoverRecord c = r;
      auto crop = [&](auto& v) { v = std::decay_t<decltype(v)>(v.begin() + lo, v.begin() + hi); };
      crop(c.t_ms);
      crop(c.wrench);
      crop(c.grip_giver);
      crop(c.grip_taker);
      r = c;
      ++truncated;
    }
    const auto samples = extract_samples(r, policy);
    const auto expect = oracle::enumerate_window_times(r.t_ms.front(), r.t_ms.back(), policy);
    std::vector<oracle::WindowTimes> got;
    for (const auto& s : samples) got.push_back({s.t_e_ms, s.t_o_ms});
    auto less = [](const oracle::WindowTimes& a, const oracle::WindowTimes& b) {
      return std::pair(a.t_e_ms, a.t_o_ms) < std::pair(b.t_e_ms, b.t_o_ms);
    };
    auto sorted_expect = expect;
    std::sort(got.begin(), got.end(), less);
    std::sort(sorted_expect.begin(), sorted_expect.end(), less);
    if (got != sorted_expect)
      fail(fmt("record %d: %zu windows, brute force lists %zu", rec, got.size(), expect.size()));

    for (const auto& s : samples) {
      ++windows;
      if (s.y.size() != 70 || s.y_t_ms.size() != 70) fail(fmt("record %d: Y length %zu", rec, s.y.size()));
      const double period = 1000.0 / 120.0;
      const auto ie = static_cast<std::size_t>(std::lround((s.t_e_ms - r.t_ms.front()) / period));
      const auto steps = static_cast<std::size_t>(std::lround((s.t_e_ms - s.t_o_ms) * 0.12));
      if (s.x.size() != steps + 1) fail(fmt("record %d: X length %zu", rec, s.x.size()));
      for (std::size_t k = 0; k < s.x.size(); ++k)
        if (!(s.x[k] == r.wrench[ie - steps + k])) fail(fmt("record %d: X not contiguous", rec));
      for (std::size_t k = 0; k < s.y.size(); ++k)
        if (s.y[k] != r.grip_giver[ie + 1 + k] || s.y_t_ms[k] != r.t_ms[ie + 1 + k])
          fail(fmt("record %d: Y does not start right after t_e", rec));
      if (std::abs(s.x_t_ms.back() - s.t_e_ms) > period / 2)
        fail(fmt("record %d: X does not end at t_e", rec));
    }
  }
  return {failure.empty(), failure.empty() ? fmt("%zu windows on 100 records (%zu cropped), "
                                                 "t_e grid %zu pts, t_o grid %zu pts",
                                                 windows, truncated, te_grid.size(),
                                                 to_grid.size())
                                           : failure};
}

// --- C4 --------------------------------------------------------------------

Outcome overfit() {
  std::vector<TrainingSample> raw;
  for (const auto& r : generate_dataset(2, 1, 44)) {
    auto s = extract_samples(align_handover(r));
    raw.insert(raw.end(), s.begin(), s.end());
  }
  // 20 samples spread over the window grid, so lengths vary.
  std::vector<TrainingSample> picked;
  for (std::size_t i = 0; i < 20; ++i) picked.push_back(raw[i * raw.size() / 20]);
  const NormStats st = fit_norm_stats(picked);
  const auto samples = apply_norm(picked, st);
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.seed = 4;
  const auto r = train(samples, {}, cfg, st);
  const double final_mse = r.history.train_mse.back();
  return {final_mse <= 1e-3, fmt("train MSE %.3e after %zu epochs (%llu Adam steps)", final_mse,
                                 cfg.epochs, static_cast<unsigned long long>(r.steps))};
}

// --- C5 --------------------------------------------------------------------

Outcome generalization() {
  const auto records = generate_dataset(13, 10, kDatasetSeed);
  const auto data = cli::prepare_samples(records, kHeldOutPairs);
  const NormStats st = fit_norm_stats(data.train);
  const auto train_n = apply_norm(data.train, st);
  const auto test_n = apply_norm(data.test, st);
  const TrainConfig cfg;  // lr 5e-4, batch 30, 100 epochs, 2x40, seed 0
  const auto r = train(train_n, test_n, cfg, st);

  Vector mean_traj(kHorizon, 0.0);
  for (const auto& s : train_n)
    for (std::size_t k = 0; k < kHorizon; ++k) mean_traj[k] += s.y[k];
  for (double& v : mean_traj) v /= static_cast<double>(train_n.size());
  double baseline = 0.0;
  for (const auto& s : test_n) baseline += mse(mean_traj, s.y);
  baseline /= static_cast<double>(test_n.size());

  const Metrics m = evaluate(r.params, data.test);
  std::size_t at_zero = 0, near_zero = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    if (data.test[i].t_e_ms != 0.0) continue;
    ++at_zero;
    const double v = std::abs(m.per_sample[i].predicted_N.back());
    worst = std::max(worst, v);
    if (v <= 0.5) ++near_zero;
  }
  const double ratio = m.mse_norm / baseline;
  const double frac = at_zero ? static_cast<double>(near_zero) / static_cast<double>(at_zero) : 0;
  const bool pass = ratio < 0.5 && frac >= 0.9;
  return {pass, fmt("(a) test MSE %.4f / baseline %.4f = %.3f (< 0.5); "
                    "(b) %zu/%zu t_e=0 final steps within 0.5 N (%.0f%%, worst %.3f N); "
                    "%zu train / %zu test samples",
                    m.mse_norm, baseline, ratio, near_zero, at_zero, 100.0 * frac, worst,
                    data.train.size(), data.test.size())};
}

// --- C6 --------------------------------------------------------------------

int run_cli(std::vector<std::string> args, const std::string& in_text, std::string* out_text) {
  args.insert(args.begin(), "gripforce");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(in_text);
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::fprintf(stderr, "gripforce exited %d: %s", code, err.str().c_str());
  return code;
}

Outcome determinism() {
  testing::TempDir dir;
  const std::string data = dir.file("data.csv");
  if (run_cli({"synth", "--pairs", "4", "--per-pair", "2", "--seed", "6", "--out", data}, "",
              nullptr) != 0)
    return {false, "synth failed"};
  testing::write_file(dir.file("cfg.json"), R"({"epochs": 3, "seed": 11})");
  for (const char* run : {"a", "b"}) {
    const std::string d = std::string(run);
    if (run_cli({"train", "--data", data, "--test-pairs", "4", "--config", dir.file("cfg.json"),
                 "--out", dir.file(d + "_model.json"), "--history", dir.file(d + "_hist.csv"),
                 "--quiet"},
                "", nullptr) != 0)
      return {false, "train failed"};
  }
  const auto ma = testing::read_file(dir.file("a_model.json"));
  const auto mb = testing::read_file(dir.file("b_model.json"));
  const auto ha = testing::read_file(dir.file("a_hist.csv"));
  const auto hb = testing::read_file(dir.file("b_hist.csv"));
  const bool pass = !ma.empty() && ma == mb && !ha.empty() && ha == hb;
  return {pass, fmt("checkpoints %zu bytes %s, histories %zu bytes %s", ma.size(),
                    ma == mb ? "identical" : "DIFFER", ha.size(), ha == hb ? "identical" : "DIFFER")};
}

// --- C7 --------------------------------------------------------------------

Outcome stream_equivalence() {
  testing::TempDir dir;
  const std::string data = dir.file("data.csv");
  const std::string model = dir.file("model.json");
  testing::write_file(dir.file("cfg.json"), R"({"epochs": 1, "seed": 2})");
  if (run_cli({"synth", "--pairs", "2", "--per-pair", "1", "--seed", "8", "--out", data}, "",
              nullptr) != 0 ||
      run_cli({"train", "--data", data, "--config", dir.file("cfg.json"), "--out", model,
               "--quiet"},
              "", nullptr) != 0)
    return {false, "setup failed"};

  const HandoverRecord rec = load_recordings(data).at(1);
  const std::string header = "t_ms,fx_N,fy_N,fz_N,tx_Nm,ty_Nm,tz_Nm\n";
  std::vector<std::string> lines;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    std::string l = csv::format_double(rec.t_ms[k]);
    for (double v : rec.wrench[k].channels()) l += "," + csv::format_double(v);
    lines.push_back(l + "\n");
  }
  std::string ticks = header;
  for (const auto& l : lines) ticks += l;

  const double window_ms = 260.0;
  const std::size_t steps = cli::window_steps_for(window_ms);
  std::string streamed;
  if (run_cli({"stream", "--model", model, "--window-ms", "260"}, ticks, &streamed) != 0)
    return {false, "stream failed"};
  std::istringstream ss(streamed);
  std::string row;
  std::size_t compared = 0, mismatched = 0;
  for (std::size_t end = steps; end <= rec.size(); ++end) {
    if (!std::getline(ss, row)) return {false, fmt("stream stopped after %zu rows", compared)};
    std::string window = header;
    for (std::size_t k = end - steps; k < end; ++k) window += lines[k];
    testing::write_file(dir.file("window.csv"), window);
    std::string predicted;
    if (run_cli({"predict", "--model", model, "--input", dir.file("window.csv")}, "",
                &predicted) != 0)
      return {false, "predict failed"};
    // predict: "t_ms,grip_N" then 70 rows; stream: "t,g1,...,g70".
    std::istringstream ps(predicted);
    std::string line, expect = csv::format_double(rec.t_ms[end - 1]);
    std::getline(ps, line);
    while (std::getline(ps, line)) expect += "," + line.substr(line.find(',') + 1);
    ++compared;
    if (row != expect) ++mismatched;
  }
  if (std::getline(ss, row)) return {false, "stream produced extra rows"};
  return {mismatched == 0 && compared > 0,
          fmt("%zu sliding windows of %zu ticks, %zu mismatches", compared, steps, mismatched)};
}

// --- C8 --------------------------------------------------------------------

Outcome split_hygiene() {
  const auto records = generate_dataset(13, 2, 808);
  Rng rng(88);
  std::size_t trials = 0;
  std::string failure;
  for (; trials < 100; ++trials) {
    std::set<std::int64_t> test;
    for (std::int64_t p = 1; p <= 13; ++p)
      if (rng.uniform() < 0.3) test.insert(p);
    if (test.size() == 13) test.erase(test.begin());

    const auto [train_recs, test_recs] = split_by_pair(records, test);
    std::set<std::int64_t> a, b;
    for (const auto& r : train_recs) a.insert(r.pair_id);
    for (const auto& r : test_recs) b.insert(r.pair_id);
    for (auto id : a)
      if (b.count(id)) failure = fmt("pair %lld on both sides", static_cast<long long>(id));
    if (a.size() + b.size() != 13) failure = "split lost a pair";

    // Replace every held-out record with unrelated data: train-side
    // statistics must not move.
    auto altered = records;
    const auto other = generate_dataset(13, 2, 9000 + trials);
    for (std::size_t i = 0; i < altered.size(); ++i)
      if (test.count(altered[i].pair_id)) {
        altered[i] = other[i];
        for (auto& w : altered[i].wrench) w.fz *= 3.0;
      }
    const auto d1 = cli::prepare_samples(records, test);
    const auto d2 = cli::prepare_samples(altered, test);
    if (!(fit_norm_stats(d1.train) == fit_norm_stats(d2.train)))
      failure = fmt("trial %zu: norm stats changed with the test side", trials);
    if (!failure.empty()) break;
  }
  return {failure.empty(),
          failure.empty() ? fmt("%zu random pair assignments", trials) : failure};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"C1", "gradient correctness (FD, 20 draws, H=8, T=12)", 60, gradient_check},
      {"C2", "Adam closed form", 0, adam_closed_form},
      {"C3", "protocol constants on 100 synthetic records", 10, protocol_constants},
      {"C4", "overfit 20 samples in 500 epochs", 300, overfit},
      {"C5", "held-out pairs beat mean trajectory; forces fall to zero", 1800, generalization},
      {"C6", "determinism of train", 0, determinism},
      {"C7", "stream equals predict on sliding windows", 0, stream_equivalence},
      {"C8", "split hygiene", 0, split_hygiene},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  for (const auto& id : only)
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.id == id; })) {
      std::fprintf(stderr, "unknown criterion '%s'\n", id.c_str());
      return 2;
    }
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over runtime budget %.0f s", c.budget_s);
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id.c_str(),
                c.name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
