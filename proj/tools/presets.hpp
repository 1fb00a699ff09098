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


// Experiment settings used by the acceptance run. The same configs are
// written to configs/ so each study can be rerun through the CLI.

#ifndef MBMIX_TOOLS_PRESETS_HPP_
#define MBMIX_TOOLS_PRESETS_HPP_

#include "mbmix/exp/config.hpp"

namespace mbmix::presets {

using expcli::ExperimentConfig;

// MB-MIX on the unstable LQR task with a linear policy.
inline ExperimentConfig lqr_mbmix() {
  ExperimentConfig c = expcli::default_config("mbmix");
  c.seeds = {0, 1, 2};
  c.budget = 100000;
  c.env_name = "lqr";
  c.mix.gamma = 0.95;
  c.mix.h_max = 32;
  c.mix.branch_len = 32;
  c.mix.n_branch = 32;
  c.mix.branch_starts = mix::BranchStarts::kEpisodeStarts;
  c.model.epochs = 2;
  c.model.max_batches = 50;
  c.model_hidden = {64, 64};
  c.policy.hidden = {};
  c.train.policy_lr = 3e-2;
  return c;
}

// Sobolev vs plain model on pendulum swing-up.
inline ExperimentConfig pendulum_ablation() {
  ExperimentConfig c = expcli::default_config("model-ablation");
  c.seeds = {0, 1, 2, 3, 4};
  c.budget = 60000;
  c.env_name = "pendulum";
  c.mix.gamma = 0.99;
  c.mix.h_max = 32;
  c.mix.branch_len = 32;
  c.mix.n_branch = 32;
  c.model.epochs = 2;
  c.model.max_batches = 50;
  c.model_hidden = {64, 64};
  c.train.policy_lr = 1e-3;
  return c;
}

// Gradient variance of MIX vs SHAC on noisy pendulum, frozen after a short
// real-environment MIX run.
inline ExperimentConfig pendulum_variance() {
  ExperimentConfig c = expcli::default_config("variance-study");
  c.seeds = {0, 1, 2};
  c.env_name = "pendulum";
  c.env.noise_std = 0.05;
  c.mix.gamma = 0.99;
  c.mix.h_max = 16;
  c.mix.branch_len = 16;
  c.mix.n_branch = 16;
  c.train.policy_lr = 1e-3;
  c.train.record_interval = 10000;
  c.variance.study.h_grid = {4, 8, 16, 32};
  c.variance.study.lambda_mix = 0.95;
  c.variance.study.n_estimates = 64;
  c.variance.study.n_branch = 8;
  c.variance.study.n_bootstrap = 1000;
  c.variance.snapshot_algorithm = mix::Algorithm::kMixRealEnv;
  c.variance.snapshot_budget = 20000;
  return c;
}

// Random 20x5 Dirichlet MDP, APG-full vs MIX.
inline ExperimentConfig tabular() {
  ExperimentConfig c = expcli::default_config("tabular");
  c.seeds = {0, 1, 2, 3, 4};
  c.budget = 1000000;
  c.tabular.learning_rate = 0.003;
  c.tabular.h_max = 10;
  c.tabular.lambda_mix = 0.98;
  c.tabular.episode_len = 50;
  c.tabular.trajectories_per_update = 10;
  return c;
}

// Soft-contact point mass, one real-environment run per (method, H_max, seed).
inline ExperimentConfig softcontact(const std::string& kind, std::size_t h_max) {
  ExperimentConfig c = expcli::default_config(kind);
  c.seeds = {0, 1, 2, 3, 4};
  c.budget = 100000;
  c.env_name = "softcontact-pointmass";
  c.mix.lambda_mix = 0.98;
  c.mix.gamma = 0.98;
  c.mix.h_max = h_max;
  c.mix.branch_len = h_max;
  c.mix.n_branch = 32;
  c.train.policy_lr = 3e-3;
  c.train.record_interval = 10000;
  return c;
}

inline const std::vector<std::size_t>& softcontact_horizons() {
  static const std::vector<std::size_t> hs{8, 16, 32, 64};
  return hs;
}

}  // namespace mbmix::presets

#endif  // MBMIX_TOOLS_PRESETS_HPP_
