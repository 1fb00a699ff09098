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

// Training loops: model-based MB-MIX and the two real-environment
// baselines (fixed-horizon SHAC and MIX on the simulator itself).

#ifndef MBMIX_MIX_TRAIN_HPP_
#define MBMIX_MIX_TRAIN_HPP_

#include <chrono>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mbmix/env/riccati.hpp"
#include "mbmix/env/trajectories.hpp"
#include "mbmix/mix/agent.hpp"

namespace mbmix::mix {

enum class Algorithm { kMbMix, kShacBaseline, kMixRealEnv };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kMbMix: return "mbmix";
    case Algorithm::kShacBaseline: return "shac-baseline";
    case Algorithm::kMixRealEnv: return "mix-real-env";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "mbmix") return Algorithm::kMbMix;
  if (s == "shac-baseline") return Algorithm::kShacBaseline;
  if (s == "mix-real-env") return Algorithm::kMixRealEnv;
  throw Error("unknown algorithm '" + s + "' (mbmix|shac-baseline|mix-real-env)");
}

struct TrainConfig {
  std::uint64_t budget = 100000;     // real environment steps
  std::size_t n_envs = 8;            // collection environments (mbmix)
  std::size_t steps_per_iter = 250;  // collection steps per env per outer iteration
  std::size_t inner_updates = 20;    // policy/value updates per outer iteration
  std::size_t buffer_capacity = 200000;
  std::size_t record_interval = 5000;  // real-env baselines: env steps between records
  std::size_t eval_episodes = 8;
  std::uint64_t eval_seed = 777;
  std::size_t heldout_steps = 200;  // per eval env, for final model metrics
  double policy_lr = 1e-3;
  double policy_clip = 1.0;
  Method mbmix_method = Method::kMix;  // objective used inside the model
  bool record_wallclock = false;
};

struct AgentConfig {
  nets::PolicyOptions policy;
  ValueConfig value;
  std::vector<std::size_t> model_hidden = {128, 128};
};

struct CurveRecord {
  std::size_t outer_iter = 0;
  std::uint64_t env_steps = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double model_pred_loss = 0.0;
  double model_jac_loss = 0.0;
  double grad_norm = 0.0;
  double wallclock_s = 0.0;
};

inline const char* curve_csv_header() {
  return "outer_iter,env_steps,eval_return_mean,eval_return_std,model_pred_loss,"
         "model_jac_loss,grad_norm,wallclock_s";
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline void write_curve_csv(const std::vector<CurveRecord>& curve, std::ostream& out) {
  out << curve_csv_header() << "\n";
  for (const auto& r : curve)
    out << r.outer_iter << "," << r.env_steps << "," << format_double(r.eval_return_mean) << ","
        << format_double(r.eval_return_std) << "," << format_double(r.model_pred_loss) << ","
        << format_double(r.model_jac_loss) << "," << format_double(r.grad_norm) << ","
        << format_double(r.wallclock_s) << "\n";
}

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

// Undiscounted full-horizon return of the deterministic mean action from a
// fixed set of starts; process noise comes from a fixed stream too.
inline EvalResult evaluate_policy(const nets::SquashedGaussianPolicy& policy,
                                  const env::DiffEnvSpec& spec, std::size_t episodes,
                                  std::uint64_t eval_seed) {
  if (episodes == 0) throw Error("evaluate_policy: need at least one episode");
  Rng rng(eval_seed);
  Matrix s(episodes, spec.state_dim);
  for (std::size_t e = 0; e < episodes; ++e) {
    Matrix s0 = spec.sample_initial(rng);
    for (std::size_t j = 0; j < spec.state_dim; ++j) s(e, j) = s0(0, j);
  }
  std::vector<double> ret(episodes, 0.0);
  std::vector<bool> alive(episodes, true);
  for (std::size_t t = 0; t < spec.horizon; ++t) {
    Matrix a = env::sample_action(policy, spec, s, rng, true);
    Matrix noise = rng.normal_matrix(episodes, spec.state_dim);
    auto [next, r] = env::step_values(spec, s, a, spec.noise_std > 0 ? &noise : nullptr);
    for (std::size_t e = 0; e < episodes; ++e) {
      if (!alive[e]) continue;
      bool ok = std::isfinite(r(e, 0));
      for (std::size_t j = 0; j < spec.state_dim; ++j) ok = ok && std::isfinite(next(e, j));
      if (!ok) {
        // A diverged episode keeps its return so far and stops.
        alive[e] = false;
        for (std::size_t j = 0; j < spec.state_dim; ++j) next(e, j) = s(e, j);
        continue;
      }
      ret[e] += r(e, 0);
    }
    s = next;
  }
  EvalResult out;
  out.returns = ret;
  for (double x : ret) out.mean += x / static_cast<double>(episodes);
  for (double x : ret) out.std += (x - out.mean) * (x - out.mean) / static_cast<double>(episodes);
  out.std = std::sqrt(out.std);
  return out;
}

// Discounted noise-free cost of the policy's mean action on LQR, averaged
// over the given starts.
inline double lqr_policy_cost(const nets::SquashedGaussianPolicy& policy,
                              const env::DiffEnvSpec& spec, double gamma,
                              const std::vector<Matrix>& starts, std::size_t T) {
  double total = 0.0;
  for (const Matrix& s0 : starts) {
    Matrix s = s0;
    double disc = 1.0, cost = 0.0;
    Rng unused(0);
    for (std::size_t t = 0; t < T; ++t) {
      Matrix a = env::sample_action(policy, spec, s, unused, true);
      auto [next, r] = env::step_values(spec, s, a);
      cost -= disc * r(0, 0);
      disc *= gamma;
      s = next;
    }
    total += cost;
  }
  return total / static_cast<double>(starts.size());
}

struct LqrSummary {
  double policy_cost = 0.0;
  double optimal_cost = 0.0;
  double ratio = 0.0;  // policy / optimal
};

inline LqrSummary lqr_summary(const nets::SquashedGaussianPolicy& policy,
                              const env::DiffEnvSpec& spec, double gamma) {
  if (!spec.lqr) throw Error("lqr_summary: environment is not linear-quadratic");
  const auto starts = env::lqr_eval_starts(32);
  const auto ric = env::solve_discounted_riccati(*spec.lqr, gamma);
  LqrSummary s;
  s.policy_cost = lqr_policy_cost(policy, spec, gamma, starts, spec.horizon);
  s.optimal_cost = env::linear_policy_cost(*spec.lqr, ric.K, gamma, starts, spec.horizon);
  s.ratio = s.policy_cost / s.optimal_cost;
  return s;
}

struct TrainResult {
  std::vector<CurveRecord> curve;
  std::vector<std::string> failures;
  nets::SquashedGaussianPolicy policy;
  nets::Mlp value;
  std::optional<world::DynamicsModel> model;
  std::optional<world::ModelMetrics> heldout;
  std::uint64_t env_steps = 0;
  std::size_t updates = 0;
  std::size_t skipped_updates = 0;
};

// RNG streams derived from the run seed.
namespace streams {
inline constexpr std::uint64_t kPolicyInit = 1, kValueInit = 2, kModelInit = 3, kRunner = 4,
                               kModelTrain = 5, kStarts = 6, kRollouts = 7, kValueTrain = 8,
                               kHeldout = 9;
}

struct Agent {
  nets::SquashedGaussianPolicy policy;
  nets::Mlp value;
  nets::OptimizerState policy_opt;
  nets::OptimizerState value_opt;
};

inline Agent make_agent(const env::DiffEnvSpec& spec, const AgentConfig& ac,
                        const TrainConfig& tc, const Rng& root) {
  Agent a;
  Rng pr = root.split(streams::kPolicyInit), vr = root.split(streams::kValueInit);
  a.policy = nets::make_policy(spec.obs_dim, spec.action_dim, spec.action_bound, ac.policy, pr);
  a.value = make_value_net(spec.obs_dim, ac.value.hidden, vr);
  a.policy_opt = nets::make_optimizer(a.policy, {.learning_rate = tc.policy_lr,
                                                 .clip_norm = tc.policy_clip});
  a.value_opt = make_value_optimizer(a.value, ac.value);
  return a;
}

namespace detail {

class Clock {
 public:
  explicit Clock(bool on) : on_(on), t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!on_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  bool on_;
  std::chrono::steady_clock::time_point t0_;
};

// One policy step plus value regression on a gradient batch.
inline double update_agent(Agent& ag, const env::DiffEnvSpec& spec, const MixConfig& mc,
                           const ValueConfig& vc, const GradientBatch& batch, Rng& value_rng) {
  const GradientEstimate& est = batch.estimates.front();
  nets::StepReport rep = apply_policy_gradient(ag.policy, ag.policy_opt, est.grad);
  if (!rep.applied) throw NonFiniteError("policy step skipped: " + rep.skipped_reason);
  auto [obs, y] = value_regression_data(spec, batch, mc.gamma, mc.lambda_td);
  train_value(ag.value, ag.value_opt, obs, y, vc, value_rng);
  return rep.grad_norm;
}

inline CurveRecord make_record(std::size_t iter, std::uint64_t steps, const Agent& ag,
                               const env::DiffEnvSpec& spec, const TrainConfig& tc,
                               const Clock& clock) {
  CurveRecord r;
  r.outer_iter = iter;
  r.env_steps = steps;
  EvalResult ev = evaluate_policy(ag.policy, spec, tc.eval_episodes, tc.eval_seed);
  r.eval_return_mean = ev.mean;
  r.eval_return_std = ev.std;
  r.wallclock_s = clock.seconds();
  return r;
}

inline void finish_heldout(TrainResult& res, const env::DiffEnvSpec& spec, const TrainConfig& tc,
                           const Rng& root) {
  if (!res.model || tc.heldout_steps == 0) return;
  env::EnvRunner runner(spec, std::max<std::size_t>(tc.eval_episodes, 1),
                        root.split(streams::kHeldout));
  auto heldout = runner.collect(res.policy, tc.heldout_steps, false, true);
  if (!heldout.empty()) res.heldout = world::evaluate_model(*res.model, heldout);
}

}  // namespace detail

// Model-based loop: collect real transitions (with Jacobians), fit the
// model, then inner_updates rounds of {branch rollouts in the model, policy
// step, TD(lambda) targets, value regression}. One record per outer
// iteration; record 0 is the initial policy.
inline TrainResult train_mbmix(const env::DiffEnvSpec& spec, const MixConfig& mc,
                               const world::SobolevConfig& sc, const AgentConfig& ac,
                               const TrainConfig& tc, std::uint64_t seed) {
  mc.validate(true);
  detail::Clock clock(tc.record_wallclock);
  const Rng root(seed);
  Agent ag = make_agent(spec, ac, tc, root);
  Rng mr = root.split(streams::kModelInit);
  world::ModelTrainer trainer = world::make_model_trainer(
      world::make_dynamics_model(spec.state_dim, spec.action_dim, ac.model_hidden, mr), sc);
  world::EnvBuffer buffer(tc.buffer_capacity);
  env::EnvRunner runner(spec, tc.n_envs, root.split(streams::kRunner));
  Rng model_rng = root.split(streams::kModelTrain), start_rng = root.split(streams::kStarts),
      value_rng = root.split(streams::kValueTrain);
  const Rng rollout_root = root.split(streams::kRollouts);

  TrainResult res;
  res.curve.push_back(detail::make_record(0, 0, ag, spec, tc, clock));
  std::size_t iter = 0;
  while (runner.total_steps() < tc.budget) {
    const std::uint64_t remaining = tc.budget - runner.total_steps();
    const std::size_t steps = static_cast<std::size_t>(
        std::min<std::uint64_t>(tc.steps_per_iter, remaining / tc.n_envs));
    if (steps == 0) break;  // fewer than n_envs steps left
    ++iter;
    // Jacobians are kept in every mode so held-out metrics can use them.
    auto fresh = runner.collect(ag.policy, steps, false, true);
    buffer.add(fresh);
    CurveRecord rec;
    try {
      auto rep = world::train_model(trainer, buffer, sc, model_rng);
      for (const auto& e : rep.epochs)
        if (e.aborted) res.failures.push_back("iter " + std::to_string(iter) + ": " + e.message);
      if (!rep.epochs.empty()) {
        rec.model_pred_loss = rep.epochs.back().pred_loss;
        rec.model_jac_loss = rep.epochs.back().jac_loss;
      }
    } catch (const Error& e) {
      res.failures.push_back("iter " + std::to_string(iter) + " model: " + e.what());
    }
    RolloutContext ctx;
    ctx.spec = &spec;
    ctx.world = World::kModel;
    ctx.model = &trainer.model;
    double norm_sum = 0.0;
    std::size_t applied = 0;
    for (std::size_t u = 0; u < tc.inner_updates; ++u) {
      try {
        Matrix starts = sample_branch_starts(buffer, mc, start_rng);
        GradientBatch batch =
            policy_gradients({tc.mbmix_method}, ctx, mc, ag.policy, ag.value, starts,
                             mc.branch_len, rollout_root.split(res.updates));
        norm_sum += detail::update_agent(ag, spec, mc, ac.value, batch, value_rng);
        ++applied;
      } catch (const Error& e) {
        ++res.skipped_updates;
        res.failures.push_back("iter " + std::to_string(iter) + " update " + std::to_string(u) +
                               ": " + e.what());
      }
      ++res.updates;
    }
    CurveRecord ev = detail::make_record(iter, runner.total_steps(), ag, spec, tc, clock);
    ev.model_pred_loss = rec.model_pred_loss;
    ev.model_jac_loss = rec.model_jac_loss;
    ev.grad_norm = applied ? norm_sum / static_cast<double>(applied) : 0.0;
    res.curve.push_back(ev);
  }
  res.env_steps = runner.total_steps();
  res.policy = ag.policy;
  res.value = ag.value;
  res.model = trainer.model;
  detail::finish_heldout(res, spec, tc, root);
  return res;
}

// Real-environment loop: n_branch persistent environments advanced by
// h_max-step windows. Each window starts from the (detached) state where the
// previous one ended; an environment without room for a full window is
// reset. A record is written every record_interval env steps.
inline TrainResult train_real_env(const env::DiffEnvSpec& spec, Method method,
                                  const MixConfig& mc, const AgentConfig& ac,
                                  const TrainConfig& tc, std::uint64_t seed) {
  mc.validate(false);
  if (spec.horizon < mc.h_max) throw Error("train_real_env: h_max exceeds the episode horizon");
  detail::Clock clock(tc.record_wallclock);
  const Rng root(seed);
  Agent ag = make_agent(spec, ac, tc, root);
  env::EnvRunner runner(spec, mc.n_branch, root.split(streams::kRunner));
  Rng value_rng = root.split(streams::kValueTrain);
  const Rng rollout_root = root.split(streams::kRollouts);
  RolloutContext ctx;
  ctx.spec = &spec;
  ctx.world = World::kRealEnv;

  TrainResult res;
  res.curve.push_back(detail::make_record(0, 0, ag, spec, tc, clock));
  std::uint64_t steps = 0, next_record = tc.record_interval;
  double norm_sum = 0.0;
  std::size_t applied = 0, iter = 0;
  const std::size_t B = mc.n_branch, H = mc.h_max;
  // Whole windows only, so the step count never passes the budget.
  while (steps + B * H <= tc.budget) {
    Matrix starts(B, spec.state_dim);
    for (std::size_t b = 0; b < B; ++b) {
      auto& slot = runner.slot(b);
      if (slot.t + H > spec.horizon) runner.reset(b);
      for (std::size_t j = 0; j < spec.state_dim; ++j) starts(b, j) = runner.slot(b).s(0, j);
    }
    steps += B * H;
    try {
      GradientBatch batch = policy_gradients({method}, ctx, mc, ag.policy, ag.value, starts, H,
                                             rollout_root.split(res.updates));
      for (std::size_t b = 0; b < B; ++b) {
        auto& slot = runner.slot(b);
        slot.s = kernels::row_slice(batch.states[H], b, b + 1);
        slot.t += H;
      }
      norm_sum += detail::update_agent(ag, spec, mc, ac.value, batch, value_rng);
      ++applied;
    } catch (const Error& e) {
      ++res.skipped_updates;
      res.failures.push_back("update " + std::to_string(res.updates) + ": " + e.what());
      for (std::size_t b = 0; b < B; ++b) runner.reset(b);
    }
    ++res.updates;
    if (steps >= next_record || steps + B * H > tc.budget) {
      ++iter;
      CurveRecord ev = detail::make_record(iter, steps, ag, spec, tc, clock);
      ev.grad_norm = applied ? norm_sum / static_cast<double>(applied) : 0.0;
      res.curve.push_back(ev);
      norm_sum = 0.0;
      applied = 0;
      while (next_record <= steps) next_record += std::max<std::size_t>(tc.record_interval, 1);
    }
  }
  res.env_steps = steps;
  res.policy = ag.policy;
  res.value = ag.value;
  return res;
}

inline TrainResult train(Algorithm algo, const env::DiffEnvSpec& spec, const MixConfig& mc,
                         const world::SobolevConfig& sc, const AgentConfig& ac,
                         const TrainConfig& tc, std::uint64_t seed) {
  switch (algo) {
    case Algorithm::kMbMix: return train_mbmix(spec, mc, sc, ac, tc, seed);
    case Algorithm::kShacBaseline: return train_real_env(spec, Method::kShac, mc, ac, tc, seed);
    case Algorithm::kMixRealEnv: return train_real_env(spec, Method::kMix, mc, ac, tc, seed);
  }
  throw Error("train: unknown algorithm");
}

}  // namespace mbmix::mix

#endif  // MBMIX_MIX_TRAIN_HPP_
