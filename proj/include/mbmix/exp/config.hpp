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

// Experiment configuration: a flat INI document with one level of sections.
// Every field is listed in a single table so parsing, printing and defaults
// cannot drift apart.

#ifndef MBMIX_EXP_CONFIG_HPP_
#define MBMIX_EXP_CONFIG_HPP_

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mbmix/exp/tabular_run.hpp"
#include "mbmix/mix/train.hpp"
#include "mbmix/mix/variance.hpp"

namespace mbmix::expcli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"tabular",        "mbmix",
                                              "shac-baseline",  "mix-real-env",
                                              "model-ablation", "variance-study"};
  return kinds;
}

struct VarianceSection {
  mix::VarianceConfig study;
  mix::Algorithm snapshot_algorithm = mix::Algorithm::kMixRealEnv;
  std::uint64_t snapshot_budget = 20000;  // env steps before freezing
};

struct ExperimentConfig {
  std::vector<std::string> kinds;
  std::vector<std::uint64_t> seeds = {0};
  std::uint64_t budget = 100000;  // environment steps
  std::string outdir = "results";

  std::string env_name = "pendulum";
  env::EnvOptions env;

  mix::MixConfig mix;
  world::SobolevConfig model;
  std::vector<std::size_t> model_hidden = {128, 128};
  nets::PolicyOptions policy;
  mix::ValueConfig value;
  mix::TrainConfig train;
  TabularRunConfig tabular;
  std::vector<TabularMethod> tabular_methods = {TabularMethod::kApgFull, TabularMethod::kMix};
  VarianceSection variance;

  mix::AgentConfig agent() const { return {policy, value, model_hidden}; }
  mix::TrainConfig train_config() const {
    mix::TrainConfig t = train;
    t.budget = budget;
    return t;
  }
  TabularRunConfig tabular_config() const {
    TabularRunConfig t = tabular;
    t.budget = budget;
    return t;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
  return out;
}

inline std::uint64_t parse_u64(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  return std::stoull(t);
}

// Accepts plain integers and exact scientific forms such as 1e6.
inline std::uint64_t parse_count(const std::string& s) {
  const std::string t = trim(s);
  if (t.find_first_of("eE") == std::string::npos) return parse_u64(t);
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(t, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != t.size() || !(d >= 0.0) || d != std::floor(d) || d > 1e18)
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  return static_cast<std::uint64_t>(d);
}

inline double parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t == "default") return std::numeric_limits<double>::quiet_NaN();
  if (t == "inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(t, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != t.size() || t.empty())
    throw std::invalid_argument("expected a number, got '" + s + "'");
  return d;
}

inline std::string show_double(double d) {
  if (std::isnan(d)) return "default";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, d);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

inline bool parse_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

inline std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(parse_u64(item));
  return out;
}

inline std::string show_sizes(const std::vector<std::size_t>& xs) {
  return join<std::size_t>(xs, [](const std::size_t& x) { return std::to_string(x); });
}

struct Field {
  std::string section, key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <typename T>
Field size_field(std::string sec, std::string key, T& ref) {
  return {std::move(sec), std::move(key), [&ref] { return std::to_string(ref); },
          [&ref](const std::string& v) { ref = static_cast<T>(parse_count(v)); }};
}

inline Field double_field(std::string sec, std::string key, double& ref) {
  return {std::move(sec), std::move(key), [&ref] { return show_double(ref); },
          [&ref](const std::string& v) { ref = parse_double(v); }};
}

inline Field bool_field(std::string sec, std::string key, bool& ref) {
  return {std::move(sec), std::move(key), [&ref] { return ref ? "true" : "false"; },
          [&ref](const std::string& v) { ref = parse_bool(v); }};
}

inline Field sizes_field(std::string sec, std::string key, std::vector<std::size_t>& ref) {
  return {std::move(sec), std::move(key), [&ref] { return show_sizes(ref); },
          [&ref](const std::string& v) { ref = parse_sizes(v); }};
}

template <typename E>
Field enum_field(std::string sec, std::string key, E& ref,
                 std::vector<std::pair<std::string, E>> names) {
  return {std::move(sec), std::move(key),
          [&ref, names] {
            for (const auto& [n, e] : names)
              if (e == ref) return n;
            return std::string("?");
          },
          [&ref, names](const std::string& v) {
            std::string opts;
            for (const auto& [n, e] : names) {
              if (n == trim(v)) {
                ref = e;
                return;
              }
              opts += (opts.empty() ? "" : "|") + n;
            }
            throw std::invalid_argument("expected one of " + opts + ", got '" + v + "'");
          }};
}

inline std::vector<Field> fields(ExperimentConfig& c) {
  using mix::Algorithm;
  std::vector<Field> f;
  f.push_back({"experiment", "kind",
               [&c] { return join<std::string>(c.kinds, [](const std::string& s) { return s; }); },
               [&c](const std::string& v) {
                 c.kinds = split_list(v);
                 if (c.kinds.empty()) throw std::invalid_argument("empty experiment list");
                 for (const auto& k : c.kinds) {
                   const auto& all = experiment_kinds();
                   if (std::find(all.begin(), all.end(), k) == all.end())
                     throw std::invalid_argument(
                         "unknown experiment '" + k +
                         "' (tabular|mbmix|shac-baseline|mix-real-env|model-ablation|"
                         "variance-study)");
                 }
               }});
  f.push_back({"experiment", "seeds",
               [&c] {
                 return join<std::uint64_t>(c.seeds,
                                            [](const std::uint64_t& s) { return std::to_string(s); });
               },
               [&c](const std::string& v) {
                 c.seeds.clear();
                 for (const auto& s : split_list(v)) c.seeds.push_back(parse_u64(s));
                 if (c.seeds.empty()) throw std::invalid_argument("empty seed list");
               }});
  f.push_back(size_field("experiment", "budget", c.budget));
  f.push_back({"experiment", "outdir", [&c] { return c.outdir; },
               [&c](const std::string& v) { c.outdir = trim(v); }});

  f.push_back({"env", "name", [&c] { return c.env_name; },
               [&c](const std::string& v) {
                 const auto& names = env::env_names();
                 if (std::find(names.begin(), names.end(), trim(v)) == names.end())
                   throw std::invalid_argument("unknown environment '" + v +
                                               "' (lqr|pendulum|softcontact-pointmass)");
                 c.env_name = trim(v);
               }});
  f.push_back(double_field("env", "noise_std", c.env.noise_std));
  f.push_back(double_field("env", "action_bound", c.env.action_bound));
  f.push_back(enum_field<std::string>("env", "lqr_variant", c.env.lqr_variant,
                                      {{"stable", "stable"}, {"unstable", "unstable"}}));
  f.push_back(size_field("env", "horizon", c.env.horizon));

  f.push_back(double_field("mix", "lambda_mix", c.mix.lambda_mix));
  f.push_back(double_field("mix", "gamma", c.mix.gamma));
  f.push_back(size_field("mix", "h_max", c.mix.h_max));
  f.push_back(size_field("mix", "interval", c.mix.interval));
  f.push_back(size_field("mix", "branch_len", c.mix.branch_len));
  f.push_back(size_field("mix", "n_branch", c.mix.n_branch));
  f.push_back(double_field("mix", "lambda_td", c.mix.lambda_td));
  f.push_back(size_field("mix", "recency_window", c.mix.recency_window));
  f.push_back(enum_field<mix::BranchStarts>(
      "mix", "branch_starts", c.mix.branch_starts,
      {{"recent", mix::BranchStarts::kRecent},
       {"episode-starts", mix::BranchStarts::kEpisodeStarts}}));

  f.push_back(enum_field<world::ModelMode>(
      "model", "mode", c.model.mode,
      {{"sobolev", world::ModelMode::kSobolev}, {"plain", world::ModelMode::kPlain}}));
  f.push_back(double_field("model", "alpha", c.model.alpha));
  f.push_back(size_field("model", "batch_size", c.model.batch_size));
  f.push_back(size_field("model", "epochs", c.model.epochs));
  f.push_back(size_field("model", "max_batches", c.model.max_batches));
  f.push_back(double_field("model", "learning_rate", c.model.learning_rate));
  f.push_back(double_field("model", "clip_norm", c.model.clip_norm));
  f.push_back(bool_field("model", "warmup", c.model.warmup));
  f.push_back(enum_field<world::JacobianMode>(
      "model", "jacobian_mode", c.model.jacobian_mode,
      {{"full", world::JacobianMode::kFull}, {"probe", world::JacobianMode::kProbe}}));
  f.push_back(size_field("model", "probes", c.model.probes));
  f.push_back(sizes_field("model", "hidden", c.model_hidden));

  f.push_back(sizes_field("policy", "hidden", c.policy.hidden));
  f.push_back(double_field("policy", "init_log_std", c.policy.init_log_std));
  f.push_back(bool_field("policy", "learn_std", c.policy.learn_std));
  f.push_back(double_field("policy", "output_gain", c.policy.output_gain));
  f.push_back(bool_field("policy", "normalize_obs", c.policy.normalize_obs));

  f.push_back(sizes_field("value", "hidden", c.value.hidden));
  f.push_back(double_field("value", "learning_rate", c.value.learning_rate));
  f.push_back(size_field("value", "iterations", c.value.iterations));
  f.push_back(size_field("value", "minibatch", c.value.minibatch));
  f.push_back(double_field("value", "clip_norm", c.value.clip_norm));

  f.push_back(size_field("train", "n_envs", c.train.n_envs));
  f.push_back(size_field("train", "steps_per_iter", c.train.steps_per_iter));
  f.push_back(size_field("train", "inner_updates", c.train.inner_updates));
  f.push_back(size_field("train", "buffer_capacity", c.train.buffer_capacity));
  f.push_back(size_field("train", "record_interval", c.train.record_interval));
  f.push_back(size_field("train", "eval_episodes", c.train.eval_episodes));
  f.push_back(size_field("train", "eval_seed", c.train.eval_seed));
  f.push_back(size_field("train", "heldout_steps", c.train.heldout_steps));
  f.push_back(double_field("train", "policy_lr", c.train.policy_lr));
  f.push_back(double_field("train", "policy_clip", c.train.policy_clip));
  f.push_back(enum_field<mix::Method>("train", "mbmix_method", c.train.mbmix_method,
                                      {{"MIX", mix::Method::kMix}, {"SHAC", mix::Method::kShac}}));
  f.push_back(bool_field("train", "record_wallclock", c.train.record_wallclock));

  f.push_back(size_field("tabular", "n_states", c.tabular.mdp.n_states));
  f.push_back(size_field("tabular", "n_actions", c.tabular.mdp.n_actions));
  f.push_back(double_field("tabular", "dirichlet_alpha", c.tabular.mdp.dirichlet_alpha));
  f.push_back(double_field("tabular", "gamma", c.tabular.mdp.gamma));
  f.push_back(enum_field<env::RewardLaw>(
      "tabular", "reward_law", c.tabular.mdp.reward_law,
      {{"uniform", env::RewardLaw::kUniform}, {"constant", env::RewardLaw::kConstant}}));
  f.push_back(double_field("tabular", "constant_reward", c.tabular.mdp.constant_reward));
  f.push_back(size_field("tabular", "episode_len", c.tabular.episode_len));
  f.push_back(size_field("tabular", "trajectories_per_update", c.tabular.trajectories_per_update));
  f.push_back(double_field("tabular", "learning_rate", c.tabular.learning_rate));
  f.push_back(size_field("tabular", "h_max", c.tabular.h_max));
  f.push_back(double_field("tabular", "lambda_mix", c.tabular.lambda_mix));
  f.push_back(size_field("tabular", "interval", c.tabular.interval));
  f.push_back(bool_field("tabular", "exact_gradient", c.tabular.exact_gradient));
  f.push_back(size_field("tabular", "record_every", c.tabular.record_every));
  f.push_back({"tabular", "methods",
               [&c] {
                 return join<TabularMethod>(c.tabular_methods,
                                            [](const TabularMethod& m) { return to_string(m); });
               },
               [&c](const std::string& v) {
                 c.tabular_methods.clear();
                 for (const auto& m : split_list(v))
                   c.tabular_methods.push_back(tabular_method_from_string(m));
                 if (c.tabular_methods.empty()) throw std::invalid_argument("empty method list");
               }});

  f.push_back(sizes_field("variance", "h_grid", c.variance.study.h_grid));
  f.push_back(double_field("variance", "lambda_mix", c.variance.study.lambda_mix));
  f.push_back(size_field("variance", "n_estimates", c.variance.study.n_estimates));
  f.push_back(size_field("variance", "n_branch", c.variance.study.n_branch));
  f.push_back(size_field("variance", "n_bootstrap", c.variance.study.n_bootstrap));
  f.push_back(double_field("variance", "ci_level", c.variance.study.ci_level));
  f.push_back(bool_field("variance", "deterministic_policy", c.variance.study.deterministic_policy));
  f.push_back(enum_field<Algorithm>("variance", "snapshot_algorithm",
                                    c.variance.snapshot_algorithm,
                                    {{"mbmix", Algorithm::kMbMix},
                                     {"shac-baseline", Algorithm::kShacBaseline},
                                     {"mix-real-env", Algorithm::kMixRealEnv}}));
  f.push_back(size_field("variance", "snapshot_budget", c.variance.snapshot_budget));
  return f;
}

// Line of each "section.key" in the source text, for diagnostics.
inline std::map<std::string, int> key_lines(const std::string& text) {
  std::map<std::string, int> out;
  std::istringstream in(text);
  std::string line, section;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos) out.emplace(section + "." + trim(t.substr(0, eq)), n);
  }
  return out;
}

}  // namespace detail

// Semantic checks shared by parsing and programmatic construction.
inline void validate(const ExperimentConfig& c) {
  if (c.kinds.empty()) throw ConfigError("config: experiment.kind is required");
  if (c.seeds.empty()) throw ConfigError("config: experiment.seeds is empty");
  try {
    for (const auto& k : c.kinds) {
      if (k == "tabular") {
        if (c.tabular.mdp.n_states < 1 || c.tabular.mdp.n_actions < 1)
          throw Error("tabular dims must be >= 1");
        continue;
      }
      c.mix.validate(k == "mbmix" || k == "model-ablation");
      if (k == "variance-study" && c.variance.study.n_estimates < 32)
        throw Error("variance.n_estimates must be >= 32");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig default_config(const std::string& kind) {
  const auto& all = experiment_kinds();
  if (std::find(all.begin(), all.end(), kind) == all.end())
    throw ConfigError("unknown experiment '" + kind + "'");
  ExperimentConfig c;
  c.kinds = {kind};
  if (kind == "tabular") c.budget = 1000000;
  if (kind == "variance-study") c.env.noise_std = 0.05;
  return c;
}

// Parses INI text. `source` names the document in error messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "config") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const auto lines = detail::key_lines(text);
  auto where = [&](const std::string& id) {
    auto it = lines.find(id);
    return source + (it == lines.end() ? "" : ":" + std::to_string(it->second));
  };
  ExperimentConfig c;
  auto table = detail::fields(c);
  std::map<std::string, detail::Field*> by_id;
  for (auto& f : table) by_id[f.section + "." + f.key] = &f;
  std::set<std::string> seen;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(where(section) + ": key '" + section + "' outside any section");
    for (const auto& [key, node] : body) {
      const std::string id = section + "." + key;
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ConfigError(where(id) + ": unknown field '" + id + "'");
      try {
        it->second->set(node.data());
      } catch (const std::exception& e) {
        throw ConfigError(where(id) + ": field '" + id + "': " + e.what());
      }
      seen.insert(id);
    }
  }
  if (!seen.count("experiment.kind"))
    throw ConfigError(source + ": missing required field 'experiment.kind'");
  // Kind-specific defaults apply to fields the document leaves out.
  if (!seen.count("experiment.budget") && c.kinds.size() == 1)
    c.budget = default_config(c.kinds.front()).budget;
  if (!seen.count("env.noise_std") && c.kinds.size() == 1)
    c.env.noise_std = default_config(c.kinds.front()).env.noise_std;
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

// Every field, explicitly; parse_config(to_ini(c)) reproduces c.
inline std::string to_ini(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  std::ostringstream out;
  std::string section;
  for (const auto& f : detail::fields(c)) {
    if (f.section != section) {
      out << (section.empty() ? "" : "\n") << "[" << f.section << "]\n";
      section = f.section;
    }
    out << f.key << " = " << f.get() << "\n";
  }
  return out.str();
}

inline env::DiffEnvSpec make_env(const ExperimentConfig& c, std::uint64_t seed) {
  return env::make_env(c.env_name, seed, c.env);
}

}  // namespace mbmix::expcli

#endif  // MBMIX_EXP_CONFIG_HPP_
