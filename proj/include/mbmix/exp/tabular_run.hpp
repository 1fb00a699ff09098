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

// Random tabular MDP experiment: softmax logits trained by differentiating
// state-distribution propagation through P^pi. APG-full backs up over the
// whole episode; MIX mixes truncated horizons bootstrapped with exact values.

#ifndef MBMIX_EXP_TABULAR_RUN_HPP_
#define MBMIX_EXP_TABULAR_RUN_HPP_

#include <string>
#include <vector>

#include "mbmix/env/tabular.hpp"
#include "mbmix/mix/objective.hpp"
#include "mbmix/nets/mlp.hpp"
#include "mbmix/nets/optimizer.hpp"

namespace mbmix::expcli {

using ad::Tape;
using ad::Value;

enum class TabularMethod { kApgFull, kMix };

inline std::string to_string(TabularMethod m) {
  return m == TabularMethod::kApgFull ? "APG-full" : "MIX";
}

inline TabularMethod tabular_method_from_string(const std::string& s) {
  if (s == "APG-full" || s == "apg-full") return TabularMethod::kApgFull;
  if (s == "MIX" || s == "mix") return TabularMethod::kMix;
  throw Error("unknown tabular method '" + s + "' (APG-full|MIX)");
}

struct TabularRunConfig {
  env::TabularOptions mdp;
  std::uint64_t budget = 1000000;  // environment steps
  std::size_t episode_len = 50;
  std::size_t trajectories_per_update = 10;
  double learning_rate = 0.05;
  std::size_t h_max = 10;
  double lambda_mix = 0.98;
  std::size_t interval = 1;
  bool exact_gradient = false;    // exact start/visitation distributions
  std::size_t record_every = 20;  // updates between records
};

struct TabularRunRecord {
  std::uint64_t env_steps = 0;
  double reward_per_step = 0.0;
  TabularMethod method = TabularMethod::kApgFull;
};

// Expected reward per step over an episode_len-step episode from a uniform
// start, computed exactly.
inline double tabular_reward_per_step(const env::TabularMdp& m, const Matrix& pi,
                                      std::size_t T) {
  const Matrix P = env::policy_transition(m, pi);
  const auto r = env::policy_reward(m, pi);
  std::vector<double> d(m.n_states, 1.0 / static_cast<double>(m.n_states)), next(m.n_states);
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < m.n_states; ++s) total += d[s] * r[s];
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < m.n_states; ++s)
      for (std::size_t s2 = 0; s2 < m.n_states; ++s2) next[s2] += d[s] * P(s, s2);
    d.swap(next);
  }
  return total / static_cast<double>(T);
}

namespace detail {

// Differentiable P^pi (S x S) and r^pi (S x 1) from pi (S x A) on the tape.
inline std::pair<Value, Value> policy_maps(const env::TabularMdp& m, Value pi, Tape& tape) {
  using namespace ad;
  const std::size_t S = m.n_states;
  Value P;
  for (std::size_t a = 0; a < m.n_actions; ++a) {
    Value term = mul(broadcast(slice_cols(pi, a, a + 1), S, S), tape.constant(m.P[a]));
    P = P.valid() ? add(P, term) : term;
  }
  Value r = sum_rows(mul(pi, tape.constant(m.R)));
  return {P, r};
}

struct SampledBatch {
  Matrix start_dist;    // 1 x S
  Matrix visited_dist;  // 1 x S, over every visited (pre-step) state
};

inline SampledBatch sample_batch(const env::TabularMdp& m, const Matrix& pi, std::size_t n,
                                 std::size_t T, Rng& rng) {
  SampledBatch b{Matrix(1, m.n_states), Matrix(1, m.n_states)};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t s = rng.index(m.n_states);
    b.start_dist(0, s) += 1.0 / static_cast<double>(n);
    for (std::size_t t = 0; t < T; ++t) {
      b.visited_dist(0, s) += 1.0 / static_cast<double>(n * T);
      const std::size_t a = env::sample_categorical(&pi.data[s * m.n_actions], m.n_actions, rng);
      std::vector<double> row(m.n_states);
      for (std::size_t s2 = 0; s2 < m.n_states; ++s2) row[s2] = m.P[a](s, s2);
      s = env::sample_categorical(row.data(), m.n_states, rng);
    }
  }
  return b;
}

// Average of the exact state distributions over T steps from uniform p0.
inline Matrix exact_visitation(const env::TabularMdp& m, const Matrix& pi, std::size_t T) {
  const Matrix P = env::policy_transition(m, pi);
  Matrix d(1, m.n_states, 1.0 / static_cast<double>(m.n_states)), avg(1, m.n_states);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < m.n_states; ++s) avg(0, s) += d(0, s) / static_cast<double>(T);
    d = kernels::matmul(d, P);
  }
  return avg;
}

}  // namespace detail

// Objective J(theta) for one update given the distribution the horizons
// start from. Returns the scalar on `tape`.
inline Value tabular_objective(TabularMethod method, const TabularRunConfig& cfg,
                               const env::TabularMdp& m, Value theta, const Matrix& d0,
                               Tape& tape) {
  using namespace ad;
  Value pi = nets::softmax_rows(theta);
  auto [P, r] = detail::policy_maps(m, pi, tape);
  const std::size_t T = method == TabularMethod::kApgFull ? cfg.episode_len : cfg.h_max;
  Matrix V;
  if (method == TabularMethod::kMix) {
    const auto v = env::tabular_exact_value(m, pi.value());
    V = Matrix(m.n_states, 1);
    for (std::size_t s = 0; s < m.n_states; ++s) V(s, 0) = v[s];
  } else {
    V = Matrix(m.n_states, 1);  // no bootstrap past the episode end
  }
  Value Vc = tape.constant(V);
  mix::RolloutBundle b;
  Value d = tape.constant(d0);
  b.values.push_back(matmul(d, Vc));
  for (std::size_t t = 0; t < T; ++t) {
    b.rewards.push_back(matmul(d, r));
    d = matmul(d, P);
    b.values.push_back(matmul(d, Vc));
  }
  if (method == TabularMethod::kApgFull) return mix::fixed_horizon_objective(b, T, m.gamma);
  mix::MixConfig mc;
  mc.lambda_mix = cfg.lambda_mix;
  mc.gamma = m.gamma;
  mc.h_max = cfg.h_max;
  mc.interval = cfg.interval;
  return mix::mix_objective(b, mc);
}

inline std::vector<TabularRunRecord> run_tabular_method(TabularMethod method,
                                                        const TabularRunConfig& cfg,
                                                        std::uint64_t seed) {
  if (cfg.mdp.n_states < 1 || cfg.mdp.n_actions < 1) throw Error("tabular: invalid dims");
  if (cfg.episode_len < 1 || cfg.trajectories_per_update < 1)
    throw Error("tabular: episode_len and trajectories_per_update must be >= 1");
  if (method == TabularMethod::kMix) {
    if (cfg.h_max < 1 || cfg.h_max % cfg.interval != 0)
      throw Error("tabular: h_max must be a positive multiple of the interval");
  }
  env::TabularMdp m = env::make_tabular_mdp(seed, cfg.mdp);
  Rng rng = Rng(seed).split(100);
  std::vector<Matrix> params{m.theta};
  nets::OptimizerState opt =
      nets::make_optimizer(params, {.learning_rate = cfg.learning_rate, .clip_norm = 0.0});
  const std::uint64_t per_update = cfg.trajectories_per_update * cfg.episode_len;
  std::vector<TabularRunRecord> out;
  auto record = [&](std::uint64_t steps) {
    out.push_back({steps, tabular_reward_per_step(m, env::softmax_policy(params[0]),
                                                  cfg.episode_len),
                   method});
  };
  record(0);
  std::uint64_t steps = 0;
  std::size_t updates = 0;
  while (steps + per_update <= cfg.budget) {
    const Matrix pi = env::softmax_policy(params[0]);
    Matrix d0;
    if (cfg.exact_gradient) {
      d0 = method == TabularMethod::kApgFull
               ? Matrix(1, m.n_states, 1.0 / static_cast<double>(m.n_states))
               : detail::exact_visitation(m, pi, cfg.episode_len);
    } else {
      auto batch = detail::sample_batch(m, pi, cfg.trajectories_per_update, cfg.episode_len, rng);
      d0 = method == TabularMethod::kApgFull ? batch.start_dist : batch.visited_dist;
    }
    steps += per_update;
    Tape tape;
    Value theta = tape.variable(params[0]);
    Value J = tabular_objective(method, cfg, m, theta, d0, tape);
    Matrix g = ad::backward(tape, J)[theta];
    for (double& x : g.data) x = -x;
    nets::apply_gradients(params, {g}, opt);
    ++updates;
    if (updates % cfg.record_every == 0) record(steps);
  }
  if (out.back().env_steps != steps) record(steps);
  return out;
}

}  // namespace mbmix::expcli

#endif  // MBMIX_EXP_TABULAR_RUN_HPP_
