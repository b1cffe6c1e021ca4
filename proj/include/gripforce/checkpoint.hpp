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

// Checkpoint and config JSON.
//
// Checkpoint layout (format_version 1):
//   {
//     "format_version": 1, "layers": 2, "hidden": H, "input_channels": 6,
//     "horizon": 70, "gate_order": "ifgo",
//     "tensors": { "<name>": {"shape": [rows, cols] | [len], "data": [...]}, ... },
//     "norm": {"wrench_mean": [6], "wrench_std": [6], "grip_mean": x, "grip_std": x},
//     "train_config": { TrainConfig fields }
//   }
// Tensor names: layer{1,2}.{w_ih,w_hh,b}, head.w, head.b. Matrices are
// row-major; gate blocks inside w_ih, w_hh and b follow gate_order.

#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "gripforce/error.hpp"
#include "gripforce/lstm.hpp"
#include "gripforce/optim.hpp"

namespace gripforce {

inline constexpr int kCheckpointVersion = 1;

using ordered_json = nlohmann::ordered_json;

inline ordered_json config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["seed"] = c.seed;
  j["clip_threshold"] = c.clip_threshold ? ordered_json(*c.clip_threshold) : ordered_json(nullptr);
  j["hidden"] = c.hidden;
  j["layers"] = 2;
  return j;
}

/// Overrides `base` with the keys present in `j`. Unknown keys are rejected.
/// "threads" is accepted here but never echoed into checkpoints.
inline TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  if (!j.is_object()) throw DataError("config: expected a JSON object");
  static const std::set<std::string> known = {
      "learning_rate", "batch_size", "epochs", "adam_beta1", "adam_beta2", "adam_eps",
      "seed",          "clip_threshold", "hidden", "layers", "threads"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) throw DataError("config: unknown key '" + key + "'");
      if (key == "learning_rate") base.learning_rate = value.get<double>();
      else if (key == "batch_size") base.batch_size = value.get<std::size_t>();
      else if (key == "epochs") base.epochs = value.get<std::size_t>();
      else if (key == "adam_beta1") base.adam_beta1 = value.get<double>();
      else if (key == "adam_beta2") base.adam_beta2 = value.get<double>();
      else if (key == "adam_eps") base.adam_eps = value.get<double>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "clip_threshold")
        base.clip_threshold = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      else if (key == "hidden") base.hidden = value.get<std::size_t>();
      else if (key == "threads") base.threads = value.get<std::size_t>();
      else if (key == "layers" && value.get<int>() != 2)
        throw DataError("config: only 2-layer models are supported");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  try {
    base.validate();
  } catch (const ContractViolation& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return base;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config '" + path + "'");
  try {
    return config_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("config '" + path + "': " + e.what());
  }
}

inline ordered_json checkpoint_to_json(const ModelParams& p, const TrainConfig& cfg) {
  ordered_json j;
  j["format_version"] = kCheckpointVersion;
  j["layers"] = 2;
  j["hidden"] = p.hidden();
  j["input_channels"] = p.input_size();
  j["horizon"] = kHorizon;
  j["gate_order"] = kGateOrder;
  ordered_json tensors = ordered_json::object();
  for_each_tensor(p, [&](const std::string& name, const std::vector<std::size_t>& shape,
                         std::span<const double> data) {
    tensors[name] = {{"shape", shape}, {"data", std::vector<double>(data.begin(), data.end())}};
  });
  j["tensors"] = std::move(tensors);
  j["norm"] = {{"wrench_mean", p.norm.wrench_mean},
               {"wrench_std", p.norm.wrench_std},
               {"grip_mean", p.norm.grip_mean},
               {"grip_std", p.norm.grip_std}};
  j["train_config"] = config_to_json(cfg);
  return j;
}

struct Checkpoint {
  ModelParams params;
  TrainConfig config;
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint format_version " + std::to_string(version) +
                            " (expected " + std::to_string(kCheckpointVersion) + ")");
    if (j.at("gate_order").get<std::string>() != kGateOrder)
      throw CheckpointError("unsupported gate_order '" + j.at("gate_order").get<std::string>() +
                            "'");
    if (j.at("horizon").get<std::size_t>() != kHorizon)
      throw CheckpointError("checkpoint horizon must be 70");
    if (j.at("layers").get<int>() != 2) throw CheckpointError("checkpoint must have 2 layers");
    const auto hidden = j.at("hidden").get<std::size_t>();
    const auto input = j.at("input_channels").get<std::size_t>();
    if (hidden < 1 || input != kWrenchChannels)
      throw CheckpointError("checkpoint has invalid hidden/input sizes");

    Checkpoint c;
    c.params = init_params(0, hidden, input);
    const auto& tensors = j.at("tensors");
    for_each_tensor(c.params, [&](const std::string& name, const std::vector<std::size_t>& shape,
                                  std::span<double> data) {
      if (!tensors.contains(name)) throw CheckpointError("checkpoint is missing tensor " + name);
      const auto& t = tensors.at(name);
      if (t.at("shape").get<std::vector<std::size_t>>() != shape)
        throw CheckpointError("tensor " + name + " has an unexpected shape");
      const auto values = t.at("data").get<std::vector<double>>();
      if (values.size() != data.size())
        throw CheckpointError("tensor " + name + ": data length does not match shape");
      std::copy(values.begin(), values.end(), data.begin());
      if (!all_finite(data)) throw CheckpointError("tensor " + name + " has non-finite values");
    });
    const auto& n = j.at("norm");
    c.params.norm.wrench_mean = n.at("wrench_mean").get<std::array<double, kWrenchChannels>>();
    c.params.norm.wrench_std = n.at("wrench_std").get<std::array<double, kWrenchChannels>>();
    c.params.norm.grip_mean = n.at("grip_mean").get<double>();
    c.params.norm.grip_std = n.at("grip_std").get<double>();
    for (double s : c.params.norm.wrench_std)
      if (!(s > 0)) throw CheckpointError("checkpoint norm std must be > 0");
    if (!(c.params.norm.grip_std > 0)) throw CheckpointError("checkpoint norm std must be > 0");
    if (j.contains("train_config")) {
      try {
        c.config = config_from_json(j.at("train_config"));
      } catch (const DataError& e) {
        throw CheckpointError(e.what());
      }
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const ModelParams& p, const TrainConfig& cfg) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << checkpoint_to_json(p, cfg).dump(1) << '\n';
  if (!os) throw DataError("write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace gripforce
