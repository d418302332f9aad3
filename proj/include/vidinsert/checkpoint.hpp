// Copyright 2026 The vidinsert Authors
// SPDX-License-Identifier: Apache-2.0
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

// Checkpoint directory: one VLT1 file per parameter, stored as a
// (1, 1, rows, cols) tensor, plus index.json:
//
//   {"format": "vidinsert-checkpoint-v1",
//    "model": {"layers": 2, "heads": 4, ...},
//    "layer_order": ["in_proj", "time_proj", "layers.0.attn_norm", ...],
//    "tensors": [{"name": "in_proj", "file": "in_proj.vlt", "shape": [12, 32]}, ...]}

#ifndef VIDINSERT_CHECKPOINT_HPP_
#define VIDINSERT_CHECKPOINT_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "vidinsert/error.hpp"
#include "vidinsert/guidance.hpp"
#include "vidinsert/model.hpp"
#include "vidinsert/tensor_io.hpp"

namespace vidinsert {

inline constexpr const char* kCheckpointFormat = "vidinsert-checkpoint-v1";

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"layers", c.layers},           {"heads", c.heads},
          {"d_model", c.d_model},         {"ffn_mult", c.ffn_mult},
          {"text_tokens", c.text_tokens}, {"channels", c.channels}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j,
                                          ModelConfig base = {}) {
  detail::reject_unknown_keys(
      j, {"layers", "heads", "d_model", "ffn_mult", "text_tokens", "channels"},
      "model");
  detail::read_key(j, "layers", base.layers);
  detail::read_key(j, "heads", base.heads);
  detail::read_key(j, "d_model", base.d_model);
  detail::read_key(j, "ffn_mult", base.ffn_mult);
  detail::read_key(j, "text_tokens", base.text_tokens);
  detail::read_key(j, "channels", base.channels);
  base.validate();
  return base;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline void save_checkpoint(const std::filesystem::path& dir,
                            const Weights<float>& w) {
  std::filesystem::create_directories(dir);
  nlohmann::json index;
  index["format"] = kCheckpointFormat;
  index["model"] = to_json(w.config);
  index["layer_order"] = nlohmann::json::array();
  index["tensors"] = nlohmann::json::array();
  for_each_param(w, [&](const std::string& name, const Matrix<float>& m) {
    const std::string file = name + ".vlt";
    write_tensor(dir / file,
                 Video<float>(Shape4{1, 1, m.rows(), m.cols()},
                              std::vector<float>(m.values().begin(), m.values().end())));
    index["layer_order"].push_back(name);
    index["tensors"].push_back({{"name", name}, {"file", file}, {"shape", {m.rows(), m.cols()}}});
  });
  write_json_file(dir / "index.json", index);
}

inline Weights<float> load_checkpoint(const std::filesystem::path& dir) {
  const nlohmann::json index = read_json_file(dir / "index.json");
  if (index.value("format", "") != kCheckpointFormat) {
    throw FormatError("not a vidinsert checkpoint: " + dir.string());
  }
  Weights<float> w = Weights<float>::zeros(model_config_from_json(index.at("model")));
  std::map<std::string, nlohmann::json> by_name;
  for (const auto& t : index.at("tensors")) by_name[t.at("name").get<std::string>()] = t;
  for_each_param(w, [&](const std::string& name, Matrix<float>& m) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor " + name);
    const Video<float> v = read_tensor(dir / it->second.at("file").get<std::string>());
    if (v.frames() != 1 || v.height() != 1 || v.width() != m.rows() ||
        v.channels() != m.cols()) {
      throw DimensionError("checkpoint tensor " + name + " has shape " + v.shape().str());
    }
    std::copy(v.data().begin(), v.data().end(), m.data());
    if (!m.all_finite()) throw NumericError("non-finite weights in " + name);
  });
  return w;
}

}  // namespace vidinsert

#endif  // VIDINSERT_CHECKPOINT_HPP_
