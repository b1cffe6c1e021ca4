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

// Command-line front end: synth, train, eval, predict, stream.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 internal invariant failure.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gripforce/checkpoint.hpp"
#include "gripforce/dataset.hpp"
#include "gripforce/error.hpp"
#include "gripforce/lstm.hpp"
#include "gripforce/optim.hpp"
#include "gripforce/synthgen.hpp"

namespace gripforce::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses "12,13" into {12, 13}. Empty string gives an empty set.
inline std::set<std::int64_t> parse_pair_list(const std::string& text) {
  std::set<std::int64_t> out;
  if (csv::trim(text).empty()) return out;
  for (auto field : csv::split(text)) {
    std::int64_t v = 0;
    if (!csv::parse_int(field, v))
      throw UsageError("--test-pairs: '" + std::string(field) + "' is not an integer pair id");
    out.insert(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared pipeline

struct PreparedData {
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> test;
};

/// Align every record, split by pair and cut windows from both sides.
inline PreparedData prepare_samples(const std::vector<HandoverRecord>& records,
                                    const std::set<std::int64_t>& test_pairs,
                                    const SamplingPolicy& policy = {}) {
  std::set<std::int64_t> present;
  for (const auto& r : records) present.insert(r.pair_id);
  for (auto id : test_pairs)
    if (!present.count(id)) throw DataError("test pair id " + std::to_string(id) + " not in data");
  std::vector<HandoverRecord> aligned;
  aligned.reserve(records.size());
  for (const auto& r : records) aligned.push_back(align_handover(r));
  auto [train_recs, test_recs] = split_by_pair(aligned, test_pairs);
  PreparedData d;
  for (const auto& r : train_recs) {
    auto s = extract_samples(r, policy);
    d.train.insert(d.train.end(), std::make_move_iterator(s.begin()),
                   std::make_move_iterator(s.end()));
  }
  for (const auto& r : test_recs) {
    auto s = extract_samples(r, policy);
    d.test.insert(d.test.end(), std::make_move_iterator(s.begin()),
                  std::make_move_iterator(s.end()));
  }
  return d;
}

/// Wrench window CSV: header with t_ms and the six wrench columns.
struct WrenchWindow {
  Vector t_ms;
  std::vector<WrenchSample> wrench;
};

inline WrenchWindow load_wrench_window(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("wrench input is empty");
  const auto names = csv::split(csv::trim(line));
  std::array<std::size_t, 7> col{};
  for (std::size_t c = 0; c < 7; ++c) {
    const std::string_view want = c == 0 ? std::string_view("t_ms") : kWrenchChannelNames[c - 1];
    auto it = std::find_if(names.begin(), names.end(),
                           [&](std::string_view n) { return csv::trim(n) == want; });
    if (it == names.end())
      throw DataError("wrench input: missing column '" + std::string(want) + "'");
    col[c] = static_cast<std::size_t>(it - names.begin());
  }
  WrenchWindow w;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(csv::trim(line));
    std::array<double, 7> v{};
    for (std::size_t c = 0; c < 7; ++c) {
      if (col[c] >= f.size() || !csv::parse_double(f[col[c]], v[c]) || !std::isfinite(v[c]))
        throw DataError("wrench input row " + std::to_string(row) + ": bad or non-finite value");
    }
    if (!w.t_ms.empty() && !(v[0] > w.t_ms.back()))
      throw DataError("wrench input row " + std::to_string(row) + ": timestamps not increasing");
    w.t_ms.push_back(v[0]);
    w.wrench.push_back({v[1], v[2], v[3], v[4], v[5], v[6]});
  }
  if (w.wrench.empty()) throw DataError("wrench input has no samples");
  return w;
}

inline void write_forecast_row(std::ostream& os, double t_ms, std::span<const double> values) {
  os << csv::format_double(t_ms);
  for (double v : values) os << ',' << csv::format_double(v);
  os << '\n';
}

/// Streaming forecaster: keeps the last `window_steps` ticks and forecasts
/// once the window is full.
class StreamForecaster {
 public:
  StreamForecaster(const ModelParams& params, std::size_t window_steps)
      : params_(params), window_steps_(window_steps) {}

  /// Returns true if a forecast was produced for this tick.
  bool push(double t_ms, const WrenchSample& w, Vector& forecast) {
    if (last_t_ && !(t_ms > *last_t_))
      throw DataError("stream: timestamp " + csv::format_double(t_ms) +
                      " does not increase (previous " + csv::format_double(*last_t_) + ")");
    last_t_ = t_ms;
    window_.push_back(w);
    if (window_.size() > window_steps_) window_.erase(window_.begin());
    if (window_.size() < window_steps_) return false;
    forecast = predict_grip(window_, params_);
    return true;
  }

 private:
  const ModelParams& params_;
  std::size_t window_steps_;
  std::vector<WrenchSample> window_;
  std::optional<double> last_t_;
};

inline std::size_t window_steps_for(double window_ms) {
  return static_cast<std::size_t>(ms_to_steps(window_ms)) + 1;
}

// ---------------------------------------------------------------------------
// Commands

struct SynthArgs {
  std::size_t pairs = 13;
  std::size_t per_pair = 10;
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.pairs < 1 || a.per_pair < 1) throw UsageError("--pairs and --per-pair must be >= 1");
  const auto records = generate_dataset(a.pairs, a.per_pair, a.seed);
  write_recordings(a.out, records);
  out << "wrote " << records.size() << " handovers to " << a.out << '\n';
  return kOk;
}

struct TrainArgs {
  std::string data;
  std::string test_pairs;
  std::string config;
  std::string out;
  std::string history;  // default: loss_history.csv next to `out`
  bool quiet = false;
};

inline std::string default_sibling(const std::string& path, const std::string& name) {
  const auto parent = std::filesystem::path(path).parent_path();
  return (parent / name).string();
}

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto test_pairs = parse_pair_list(a.test_pairs);
  const TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_config(a.config);
  const auto records = load_recordings(a.data);
  const auto data = prepare_samples(records, test_pairs);
  if (data.train.empty()) throw DataError("no training samples after splitting");
  const NormStats stats = fit_norm_stats(data.train);
  const auto train_n = apply_norm(data.train, stats);
  const auto test_n = apply_norm(data.test, stats);
  if (!a.quiet)
    err << "train samples " << train_n.size() << ", test samples " << test_n.size() << '\n';
  const TrainResult r = train(train_n, test_n, cfg, stats, [&](std::size_t e, double tr, double te) {
    if (!a.quiet)
      err << "epoch " << e + 1 << "/" << cfg.epochs << " train_mse " << tr << " test_mse " << te
          << '\n';
  });
  save_checkpoint(a.out, r.params, cfg);
  const std::string history = a.history.empty() ? default_sibling(a.out, "loss_history.csv")
                                                : a.history;
  std::ofstream hs(history, std::ios::binary);
  if (!hs) throw DataError("cannot open '" + history + "' for writing");
  hs << "epoch,train_mse,test_mse\n";
  for (std::size_t e = 0; e < r.history.train_mse.size(); ++e)
    hs << e + 1 << ',' << csv::format_double(r.history.train_mse[e]) << ','
       << csv::format_double(r.history.test_mse[e]) << '\n';
  out << "wrote " << a.out << " and " << history << '\n';
  return kOk;
}

struct EvalArgs {
  std::string model;
  std::string data;
  std::string test_pairs;
  std::string metrics;     // default: metrics.json next to the model
  std::string comparison;  // default: comparison.csv next to the model
};

inline nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["mse_norm"] = m.mse_norm;
  j["mse_N2"] = m.mse_N2;
  j["final_step_mae_N"] = m.final_step_mae_N;
  j["n_samples"] = m.n_samples;
  return j;
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto test_pairs = parse_pair_list(a.test_pairs);
  const Checkpoint ck = load_checkpoint(a.model);
  const auto records = load_recordings(a.data);
  const auto data = prepare_samples(records, test_pairs);
  const auto& samples = test_pairs.empty() ? data.train : data.test;
  if (samples.empty()) throw DataError("no samples to evaluate");
  const Metrics m = evaluate(ck.params, samples, ck.config.threads);

  const std::string metrics_path =
      a.metrics.empty() ? default_sibling(a.model, "metrics.json") : a.metrics;
  const std::string comparison_path =
      a.comparison.empty() ? default_sibling(a.model, "comparison.csv") : a.comparison;
  {
    std::ofstream ms(metrics_path, std::ios::binary);
    if (!ms) throw DataError("cannot open '" + metrics_path + "' for writing");
    ms << metrics_json(m).dump(2) << '\n';
  }
  std::ofstream cs(comparison_path, std::ios::binary);
  if (!cs) throw DataError("cannot open '" + comparison_path + "' for writing");
  cs << "sample_id,step,t_ms,predicted_N,actual_N\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& r = m.per_sample[i];
    for (std::size_t k = 0; k < kHorizon; ++k)
      cs << i << ',' << k << ',' << csv::format_double(samples[i].y_t_ms[k]) << ','
         << csv::format_double(r.predicted_N[k]) << ',' << csv::format_double(r.actual_N[k])
         << '\n';
  }
  out << metrics_json(m).dump() << '\n';
  return kOk;
}

struct PredictArgs {
  std::string model;
  std::string input;
  std::string out;  // empty or "-" for standard output
};

inline int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.model);
  std::ifstream is(a.input, std::ios::binary);
  if (!is) throw DataError("cannot open '" + a.input + "'");
  const WrenchWindow w = load_wrench_window(is);
  const Vector y = predict_grip(w.wrench, ck.params);

  std::ofstream file;
  std::ostream* os = &out;
  if (!a.out.empty() && a.out != "-") {
    file.open(a.out, std::ios::binary);
    if (!file) throw DataError("cannot open '" + a.out + "' for writing");
    os = &file;
  }
  *os << "t_ms,grip_N\n";
  const double t_e = w.t_ms.back();
  for (std::size_t k = 0; k < kHorizon; ++k)
    *os << csv::format_double(t_e + static_cast<double>(k + 1) * kPeriodMs) << ','
        << csv::format_double(y[k]) << '\n';
  return kOk;
}

struct StreamArgs {
  std::string model;
  double window_ms = 260.0;
};

/// Reads "t_ms,fx,fy,fz,tx,ty,tz" lines from `in`; after the window fills,
/// writes "t_ms,g_1,...,g_70" per tick. A leading header line is skipped.
inline int cmd_stream(const StreamArgs& a, std::istream& in, std::ostream& out,
                      std::ostream& err) {
  if (!(a.window_ms >= 10.0 && a.window_ms <= 1250.0))
    throw UsageError("--window-ms must lie in [10, 1250]");
  const Checkpoint ck = load_checkpoint(a.model);
  StreamForecaster fc(ck.params, window_steps_for(a.window_ms));
  std::string line;
  std::size_t row = 0;
  Vector forecast;
  while (std::getline(in, line)) {
    ++row;
    const auto text = csv::trim(line);
    if (text.empty()) continue;
    if (row == 1 && text.starts_with("t_ms")) continue;
    const auto f = csv::split(text);
    std::array<double, 7> v{};
    bool ok = f.size() == 7;
    for (std::size_t c = 0; ok && c < 7; ++c)
      ok = csv::parse_double(f[c], v[c]) && std::isfinite(v[c]);
    if (!ok) {
      err << "stream: line " << row << ": malformed tick skipped\n";
      continue;
    }
    if (fc.push(v[0], {v[1], v[2], v[3], v[4], v[5], v[6]}, forecast)) {
      write_forecast_row(out, v[0], forecast);
      out.flush();
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::istream& in, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Grip-force forecasting from interaction wrench for handovers", "gripforce"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic handover dataset CSV");
  s->add_option("--pairs", synth.pairs, "Participant pairs")->required();
  s->add_option("--per-pair", synth.per_pair, "Handovers per pair")->required();
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--out", synth.out, "Output CSV")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the forecaster and write a checkpoint");
  t->add_option("--data", tr.data, "Recording CSV")->required();
  t->add_option("--test-pairs", tr.test_pairs, "Comma-separated held-out pair ids");
  t->add_option("--config", tr.config, "JSON overriding training hyperparameters");
  t->add_option("--out", tr.out, "Checkpoint JSON")->required();
  t->add_option("--history", tr.history, "Loss history CSV (default: next to --out)");
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on held-out pairs");
  e->add_option("--model", ev.model, "Checkpoint JSON")->required();
  e->add_option("--data", ev.data, "Recording CSV")->required();
  e->add_option("--test-pairs", ev.test_pairs, "Pairs to evaluate (default: all)");
  e->add_option("--metrics", ev.metrics, "Metrics JSON (default: next to --model)");
  e->add_option("--comparison", ev.comparison, "Comparison CSV (default: next to --model)");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Forecast 70 grip-force steps from a wrench window");
  p->add_option("--model", pr.model, "Checkpoint JSON")->required();
  p->add_option("--input", pr.input, "Wrench window CSV")->required();
  p->add_option("--out", pr.out, "Forecast CSV (default: stdout)");

  StreamArgs st;
  auto* sm = app.add_subcommand("stream", "Forecast continuously from ticks on stdin");
  sm->add_option("--model", st.model, "Checkpoint JSON")->required();
  sm->add_option("--window-ms", st.window_ms, "Sliding window length in ms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "gripforce: " << ex.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) return cmd_train(tr, out, err);
    if (e->parsed()) return cmd_eval(ev, out);
    if (p->parsed()) return cmd_predict(pr, out);
    if (sm->parsed()) return cmd_stream(st, in, out, err);
  } catch (const UsageError& ex) {
    err << "gripforce: " << ex.what() << '\n';
    return kUsage;
  } catch (const DataError& ex) {
    err << "gripforce: " << ex.what() << '\n';
    return kData;
  } catch (const std::exception& ex) {
    err << "gripforce: internal error: " << ex.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace gripforce::cli
