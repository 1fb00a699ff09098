// Copyright 2026 The mbmix Authors
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

// JSON checkpoints. Doubles are written with shortest round-trip formatting,
// so load(save(x)) is bit-exact for finite payloads.

#ifndef MBMIX_NETS_CHECKPOINT_HPP_
#define MBMIX_NETS_CHECKPOINT_HPP_

#include <fstream>
#include <limits>
#include <string>

#include "json.hpp"
#include "mbmix/nets/policy.hpp"

namespace mbmix::nets {

inline constexpr const char* kCheckpointFormat = "mbmix-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json matrix_to_json(const Matrix& m) {
  if (!m.all_finite()) throw NonFiniteError("checkpoint: refusing to save non-finite parameters");
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

inline nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : net.params) params.push_back(matrix_to_json(p));
  return {{"widths", net.widths}, {"output", to_string(net.output)}, {"params", params}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp net;
  net.widths = j.at("widths").get<std::vector<std::size_t>>();
  net.output = output_transform_from_string(j.at("output").get<std::string>());
  for (const auto& p : j.at("params")) net.params.push_back(matrix_from_json(p));
  if (net.params.size() != 2 * net.num_layers())
    throw Error("checkpoint: parameter count does not match layer widths");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    if (net.weight(l).shape() != Shape{net.widths[l], net.widths[l + 1]} ||
        net.bias(l).shape() != Shape{1, net.widths[l + 1]})
      throw ShapeError("checkpoint: layer " + std::to_string(l) + " shapes do not match widths");
  }
  return net;
}

inline nlohmann::json policy_to_json(const SquashedGaussianPolicy& p) {
  nlohmann::json j{{"format", kCheckpointFormat},
                   {"version", kCheckpointVersion},
                   {"kind", "squashed-gaussian-policy"},
                   {"net", mlp_to_json(p.net)},
                   {"log_std", matrix_to_json(p.log_std)},
                   {"learn_std", p.learn_std},
                   {"normalizer",
                    {{"enabled", p.normalizer.enabled},
                     {"count", p.normalizer.count},
                     {"mean", p.normalizer.mean},
                     {"m2", p.normalizer.m2}}}};
  // JSON has no infinity; an unbounded box is stored as null.
  if (p.squashed())
    j["action_bound"] = p.action_bound;
  else
    j["action_bound"] = nullptr;
  return j;
}

inline SquashedGaussianPolicy policy_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat)
    throw Error("checkpoint: not an mbmix checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw Error("checkpoint: unsupported version " + j.at("version").dump());
  if (j.at("kind").get<std::string>() != "squashed-gaussian-policy")
    throw Error("checkpoint: expected a policy, found " + j.at("kind").dump());
  SquashedGaussianPolicy p;
  p.net = mlp_from_json(j.at("net"));
  p.log_std = matrix_from_json(j.at("log_std"));
  p.learn_std = j.at("learn_std").get<bool>();
  p.action_bound = j.at("action_bound").is_null() ? std::numeric_limits<double>::infinity()
                                                  : j.at("action_bound").get<double>();
  const auto& n = j.at("normalizer");
  p.normalizer.enabled = n.at("enabled").get<bool>();
  p.normalizer.count = n.at("count").get<double>();
  p.normalizer.mean = n.at("mean").get<std::vector<double>>();
  p.normalizer.m2 = n.at("m2").get<std::vector<double>>();
  return p;
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(1) << "\n";
  if (!out) throw Error("failed writing '" + path + "'");
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("'" + path + "': " + e.what());
  }
}

inline void save_policy(const SquashedGaussianPolicy& p, const std::string& path) {
  save_json(policy_to_json(p), path);
}

inline SquashedGaussianPolicy load_policy(const std::string& path) {
  return policy_from_json(load_json(path));
}

}  // namespace mbmix::nets

#endif  // MBMIX_NETS_CHECKPOINT_HPP_
