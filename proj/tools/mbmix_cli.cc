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


// mbmix command-line harness.
//   mbmix run <config.ini>
//   mbmix print-config <kind>
//   mbmix variance-study <config.ini>
//   mbmix eval <policy.json> <env> [--episodes N] [--seed S] [--noise X] [--gamma G]
// Exit codes: 0 success, 1 configuration error, 2 run failure.

#include <iostream>

#include "CLI11.hpp"
#include "mbmix/exp/runner.hpp"

namespace {

using namespace mbmix;

int report(const expcli::SuiteResult& res) {
  for (const auto& r : res.runs) {
    if (r.ok)
      std::cout << "ok     " << r.kind << " seed " << r.seed << " -> " << r.dir.string() << "\n";
    else
      std::cerr << "FAILED " << r.kind << " seed " << r.seed << " -> " << r.dir.string() << ": "
                << r.error << "\n";
  }
  return res.ok() ? 0 : 2;
}

int run_config(const std::string& path, bool variance_only) {
  expcli::ExperimentConfig cfg;
  try {
    cfg = expcli::load_config(path);
    if (variance_only) {
      cfg.kinds = {"variance-study"};
      expcli::validate(cfg);
    }
  } catch (const expcli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  return report(expcli::run_suite(cfg));
}

int eval_checkpoint(const std::string& ckpt, const std::string& env_name, std::size_t episodes,
                    std::uint64_t seed, double noise, double gamma) {
  nets::SquashedGaussianPolicy policy;
  env::DiffEnvSpec spec;
  try {
    policy = nets::load_policy(ckpt);
    env::EnvOptions eo;
    eo.noise_std = noise;
    spec = env::make_env(env_name, 0, eo);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  try {
    const auto ev = mix::evaluate_policy(policy, spec, episodes, seed);
    nlohmann::json j{{"env", spec.name},
                     {"episodes", episodes},
                     {"eval_seed", seed},
                     {"eval_return_mean", ev.mean},
                     {"eval_return_std", ev.std},
                     {"returns", ev.returns}};
    if (spec.lqr) {
      const auto s = mix::lqr_summary(policy, spec, std::isnan(gamma) ? spec.default_gamma : gamma);
      j["lqr"] = {{"policy_cost", s.policy_cost}, {"optimal_cost", s.optimal_cost},
                  {"ratio", s.ratio}};
    }
    std::cout << j.dump(1) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "eval failed: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mbmix experiment harness"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run every experiment and seed in a config");
  run->add_option("config", config_path, "INI config")->required();

  std::string kind;
  auto* print = app.add_subcommand("print-config", "print the full default config for a kind");
  print->add_option("kind", kind, "experiment kind")->required();

  auto* variance = app.add_subcommand("variance-study", "run only the variance study of a config");
  variance->add_option("config", config_path, "INI config")->required();

  std::string ckpt, env_name;
  std::size_t episodes = 8;
  std::uint64_t eval_seed = 777;
  double noise = std::numeric_limits<double>::quiet_NaN();
  double gamma = std::numeric_limits<double>::quiet_NaN();
  auto* eval = app.add_subcommand("eval", "evaluate a saved policy");
  eval->add_option("checkpoint", ckpt, "policy checkpoint (policy.json)")->required();
  eval->add_option("env", env_name, "environment name")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--noise", noise, "process noise std (default: environment default)");
  eval->add_option("--gamma", gamma, "discount for the LQR cost ratio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return run_config(config_path, false);
    if (*variance) return run_config(config_path, true);
    if (*print) {
      std::cout << expcli::to_ini(expcli::default_config(kind));
      return 0;
    }
    if (*eval) return eval_checkpoint(ckpt, env_name, episodes, eval_seed, noise, gamma);
  } catch (const expcli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
