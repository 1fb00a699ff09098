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

// Branch rollouts in the real or learned world, path-derivative policy
// gradients and value regression.

#ifndef MBMIX_MIX_AGENT_HPP_
#define MBMIX_MIX_AGENT_HPP_

#include <string>
#include <vector>

#include "mbmix/env/env.hpp"
#include "mbmix/mix/objective.hpp"
#include "mbmix/nets/policy.hpp"
#include "mbmix/world/buffer.hpp"
#include "mbmix/world/model.hpp"

namespace mbmix::mix {

enum class Method { kMix, kShac };
enum class World { kRealEnv, kModel };

inline std::string to_string(Method m) { return m == Method::kMix ? "MIX" : "SHAC"; }
inline std::string to_string(World w) { return w == World::kModel ? "learned-model" : "real-env"; }

struct ValueConfig {
  std::vector<std::size_t> hidden = {64, 64};
  double learning_rate = 1e-3;
  std::size_t iterations = 16;  // minibatch steps per update
  std::size_t minibatch = 256;
  double clip_norm = 1.0;
};

inline nets::Mlp make_value_net(std::size_t obs_dim, const std::vector<std::size_t>& hidden,
                                Rng& rng) {
  std::vector<std::size_t> widths{obs_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  return nets::make_mlp(widths, nets::OutputTransform::kIdentity, rng, 1.0);
}

// V(s) with the value net's parameters as constants; differentiable in s.
inline Value state_value(const nets::Mlp& value, const env::DiffEnvSpec& spec, Value s) {
  return nets::forward(value, spec.observe(s), *s.tape());
}

struct RolloutContext {
  const env::DiffEnvSpec* spec = nullptr;
  World world = World::kRealEnv;
  const world::DynamicsModel* model = nullptr;  // required for kModel
  bool env_noise = true;              // process noise in the real world
  bool deterministic_policy = false;  // mean actions, no exploration noise
};

// Rolls out starts.rows branches for T steps on `tape`. Branch b draws all
// of its noise from rng.split(b), so results do not depend on batching.
inline RolloutBundle rollout(Tape& tape, const nets::BoundPolicy& pol, const nets::Mlp& value,
                             const RolloutContext& ctx, const Matrix& starts, std::size_t T,
                             const Rng& rng, std::size_t stream_offset = 0) {
  using namespace ad;
  if (ctx.spec == nullptr) throw Error("rollout: no environment spec");
  const env::DiffEnvSpec& spec = *ctx.spec;
  if (ctx.world == World::kModel && ctx.model == nullptr)
    throw Error("rollout: learned-model world without a model");
  if (starts.cols != spec.state_dim || starts.rows == 0)
    throw ShapeError("rollout: starts have shape " + to_string(starts.shape()));
  const std::size_t B = starts.rows, ds = spec.state_dim, da = spec.action_dim;
  std::vector<Rng> streams;
  for (std::size_t b = 0; b < B; ++b) streams.push_back(rng.split(stream_offset + b));
  std::vector<Value> model_params;
  if (ctx.world == World::kModel) model_params = nets::bind(ctx.model->net.params, tape, false);
  const bool noisy = ctx.world == World::kRealEnv && ctx.env_noise && spec.noise_std > 0.0;

  RolloutBundle out;
  out.starts = starts;
  Value s = tape.constant(starts);
  out.states.push_back(s);
  out.values.push_back(state_value(value, spec, s));
  for (std::size_t t = 0; t < T; ++t) {
    Matrix eps(B, da), noise(B, ds);
    for (std::size_t b = 0; b < B; ++b) {
      if (!ctx.deterministic_policy)
        for (std::size_t j = 0; j < da; ++j) eps(b, j) = streams[b].normal();
      if (noisy)
        for (std::size_t j = 0; j < ds; ++j) noise(b, j) = streams[b].normal();
    }
    Value obs = spec.observe(s);
    Value a = ctx.deterministic_policy ? nets::mean_action(pol, obs) : nets::act(pol, obs, eps);
    Value r, next;
    if (ctx.world == World::kModel) {
      r = spec.reward(s, a);
      next = world::predict(*ctx.model, model_params, s, a);
    } else {
      env::StepResult st = env::env_step(spec, s, a, noisy ? &noise : nullptr);
      r = st.reward;
      next = st.next_state;
    }
    for (std::size_t b = 0; b < B; ++b) {
      bool ok = std::isfinite(r.value()(b, 0));
      for (std::size_t j = 0; j < ds; ++j) ok = ok && std::isfinite(next.value()(b, j));
      if (!ok)
        throw NonFiniteError("rollout: non-finite state or reward in branch " +
                             std::to_string(b) + " at step " + std::to_string(t));
    }
    out.actions.push_back(a);
    out.rewards.push_back(r);
    out.states.push_back(next);
    out.values.push_back(state_value(value, spec, next));
    s = next;
  }
  return out;
}

struct GradientEstimate {
  std::vector<double> grad;  // -dJ/dtheta, policy parameter order
  Method method = Method::kMix;
  std::vector<std::size_t> horizons;
  std::uint64_t seed = 0;
  double objective = 0.0;
  double norm() const {
    double s = 0.0;
    for (double g : grad) s += g * g;
    return std::sqrt(s);
  }
};

// Several estimators evaluated on one shared rollout (common random numbers).
struct GradientBatch {
  std::vector<GradientEstimate> estimates;
  Matrix rewards;              // B x T
  Matrix values;               // B x (T+1), current value net
  std::vector<Matrix> states;  // T+1 entries, B x d_s
};

inline Value method_objective(Method method, const RolloutBundle& b, const MixConfig& cfg) {
  return method == Method::kMix ? mix_objective(b, cfg)
                                : fixed_horizon_objective(b, cfg.h_max, cfg.gamma);
}

inline std::vector<std::size_t> method_horizons(Method method, const MixConfig& cfg) {
  if (method == Method::kShac) return {cfg.h_max};
  std::vector<std::size_t> hs;
  for (const auto& hw : mix_weights(cfg.lambda_mix, cfg.h_max, cfg.interval))
    hs.push_back(hw.horizon);
  return hs;
}

inline GradientBatch policy_gradients(const std::vector<Method>& methods,
                                      const RolloutContext& ctx, const MixConfig& cfg,
                                      const nets::SquashedGaussianPolicy& policy,
                                      const nets::Mlp& value, const Matrix& starts,
                                      std::size_t T, const Rng& rng) {
  if (T < cfg.h_max) throw Error("policy_gradients: rollout shorter than h_max");
  Tape tape;
  nets::BoundPolicy pol = nets::bind(policy, tape, true);
  RolloutBundle bundle = rollout(tape, pol, value, ctx, starts, T, rng);
  GradientBatch out;
  for (Method m : methods) {
    Value J = method_objective(m, bundle, cfg);
    if (!J.finite()) throw NonFiniteError("policy_gradients: non-finite " + to_string(m) +
                                          " objective");
    ad::GradMap grads = ad::backward(tape, J);
    GradientEstimate est;
    est.method = m;
    est.horizons = method_horizons(m, cfg);
    est.seed = rng.seed();
    est.objective = J.item();
    est.grad = nets::flatten(nets::collect_grads(grads, pol.all()));
    for (double& g : est.grad) g = -g;
    bool finite = true;
    for (double g : est.grad) finite = finite && std::isfinite(g);
    if (!finite) {
      // Replay branches one at a time; each keeps its own noise stream.
      std::string where = "no single branch reproduces it";
      for (std::size_t b = 0; b < bundle.branches(); ++b) {
        Tape t2;
        nets::BoundPolicy p2 = nets::bind(policy, t2, true);
        RolloutBundle rb =
            rollout(t2, p2, value, ctx, kernels::row_slice(starts, b, b + 1), T, rng, b);
        auto g2 = nets::flatten(nets::collect_grads(
            ad::backward(t2, method_objective(m, rb, cfg)), p2.all()));
        bool ok = true;
        for (double g : g2) ok = ok && std::isfinite(g);
        if (!ok) {
          where = "branch " + std::to_string(b);
          break;
        }
      }
      throw NonFiniteError("policy_gradients: non-finite " + to_string(m) + " gradient in " +
                           where);
    }
    out.estimates.push_back(std::move(est));
  }
  auto [r, v] = bundle_numbers(bundle);
  out.rewards = std::move(r);
  out.values = std::move(v);
  for (const Value& s : bundle.states) out.states.push_back(s.value());
  return out;
}

// Branch starts: uniform over the newest recency window of real states.
inline Matrix sample_branch_starts(const world::EnvBuffer& buffer, std::size_t n,
                                   std::size_t window, Rng& rng) {
  auto picks = buffer.sample_recent(n, window, rng);
  Matrix out(n, picks.front()->s.cols);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) = picks[i]->s(0, j);
  return out;
}

// Uniform (with replacement) over buffered first states of real episodes
// inside the recency window.
inline Matrix sample_episode_starts(const world::EnvBuffer& buffer, std::size_t n,
                                    std::size_t window, Rng& rng) {
  const std::size_t w = window == 0 ? buffer.size() : std::min(window, buffer.size());
  std::vector<std::size_t> idx;
  for (std::size_t i = buffer.size() - w; i < buffer.size(); ++i)
    if (buffer.at(i).step == 0) idx.push_back(i);
  if (idx.empty()) throw Error("sample_episode_starts: no episode start in the window");
  Matrix out(n, buffer.at(idx.front()).s.cols);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& s = buffer.at(idx[rng.index(idx.size())]).s;
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) = s(0, j);
  }
  return out;
}

inline Matrix sample_branch_starts(const world::EnvBuffer& buffer, const MixConfig& cfg,
                                   Rng& rng) {
  return cfg.branch_starts == BranchStarts::kEpisodeStarts
             ? sample_episode_starts(buffer, cfg.n_branch, cfg.recency_window, rng)
             : sample_branch_starts(buffer, cfg.n_branch, cfg.recency_window, rng);
}

// Single-estimator entry point. Model-world branches start from buffer
// states; real-world branches start from buffer states when a buffer is
// given and from fresh initial states otherwise.
inline GradientEstimate policy_gradient(Method method, World world, const MixConfig& cfg,
                                        const env::DiffEnvSpec& spec,
                                        const nets::SquashedGaussianPolicy& policy,
                                        const nets::Mlp& value,
                                        const world::DynamicsModel* model,
                                        const world::EnvBuffer* buffer, const Rng& rng) {
  cfg.validate(world == World::kModel);
  Rng start_rng = rng.split(0x5717);
  Matrix starts;
  if (buffer != nullptr && !buffer->empty()) {
    starts = sample_branch_starts(*buffer, cfg, start_rng);
  } else if (world == World::kModel) {
    throw Error("policy_gradient: learned-model branches need a non-empty buffer");
  } else {
    starts = Matrix(cfg.n_branch, spec.state_dim);
    for (std::size_t b = 0; b < cfg.n_branch; ++b) {
      Matrix s0 = spec.sample_initial(start_rng);
      for (std::size_t j = 0; j < spec.state_dim; ++j) starts(b, j) = s0(0, j);
    }
  }
  RolloutContext ctx;
  ctx.spec = &spec;
  ctx.world = world;
  ctx.model = model;
  return policy_gradients({method}, ctx, cfg, policy, value, starts, cfg.h_max, rng)
      .estimates.front();
}

// Applies a descent-direction flat gradient to the policy.
inline nets::StepReport apply_policy_gradient(nets::SquashedGaussianPolicy& policy,
                                              nets::OptimizerState& opt,
                                              const std::vector<double>& flat) {
  std::vector<Matrix> grads = policy.params();
  nets::unflatten(flat, grads);
  if (!policy.learn_std) grads.back() = Matrix(grads.back().rows, grads.back().cols);
  return nets::apply_gradients(policy.param_refs(), grads, opt);
}

struct ValueTrainReport {
  std::vector<double> losses;  // one per minibatch step, before the step
  double final_loss() const { return losses.empty() ? 0.0 : losses.back(); }
};

// Squared-error regression of V(obs) onto fixed targets (N x 1).
inline ValueTrainReport train_value(nets::Mlp& value, nets::OptimizerState& opt,
                                    const Matrix& obs, const Matrix& targets,
                                    const ValueConfig& cfg, Rng& rng) {
  if (obs.rows != targets.rows || targets.cols != 1)
    throw ShapeError("train_value: obs " + to_string(obs.shape()) + " vs targets " +
                     to_string(targets.shape()));
  if (!targets.all_finite()) throw NonFiniteError("train_value: non-finite targets");
  if (obs.rows == 0) return {};
  ValueTrainReport rep;
  const std::size_t n = obs.rows, k = std::min(cfg.minibatch, n);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> idx = k == n ? std::vector<std::size_t>() :
                                            rng.sample_without_replacement(n, k);
    Matrix xb(k, obs.cols), yb(k, 1);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t r = idx.empty() ? i : idx[i];
      for (std::size_t j = 0; j < obs.cols; ++j) xb(i, j) = obs(r, j);
      yb(i, 0) = targets(r, 0);
    }
    Tape tape;
    auto bound = nets::bind(value.params, tape, true);
    Value pred = nets::forward(value, bound, tape.constant(xb));
    Value loss = ad::mean(ad::square(ad::sub(pred, tape.constant(yb))));
    rep.losses.push_back(loss.item());
    ad::GradMap g = ad::backward(tape, loss);
    nets::apply_gradients(value.params, nets::collect_grads(g, bound), opt);
  }
  return rep;
}

inline nets::OptimizerState make_value_optimizer(const nets::Mlp& value, const ValueConfig& cfg) {
  nets::AdamConfig ac;
  ac.learning_rate = cfg.learning_rate;
  ac.clip_norm = cfg.clip_norm;
  return nets::make_optimizer(value.params, ac);
}

// Regression pairs from a gradient batch: observations of s_0..s_{T-1} and
// their TD(lambda) targets. Targets are plain numbers, detached from any tape.
inline std::pair<Matrix, Matrix> value_regression_data(const env::DiffEnvSpec& spec,
                                                       const GradientBatch& batch,
                                                       double gamma, double lambda_td) {
  const Matrix targets = value_targets(batch.rewards, batch.values, gamma, lambda_td);
  const std::size_t B = batch.rewards.rows, T = batch.rewards.cols;
  Matrix obs(B * T, spec.obs_dim), y(B * T, 1);
  for (std::size_t t = 0; t < T; ++t) {
    Tape tape;
    const Matrix o = spec.observe(tape.constant(batch.states[t])).value();
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t j = 0; j < spec.obs_dim; ++j) obs(t * B + b, j) = o(b, j);
      y(t * B + b, 0) = targets(b, t);
    }
  }
  return {obs, y};
}

}  // namespace mbmix::mix

#endif  // MBMIX_MIX_AGENT_HPP_
