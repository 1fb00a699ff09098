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

#ifndef MBMIX_ENV_TRAJECTORIES_HPP_
#define MBMIX_ENV_TRAJECTORIES_HPP_

#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "mbmix/env/env.hpp"
#include "mbmix/nets/policy.hpp"

namespace mbmix::env {

// One real step with its true Jacobians (of the deterministic part).
struct Transition {
  Matrix s;       // 1 x d_s
  Matrix a;       // 1 x d_a
  double r = 0.0;
  Matrix s_next;  // 1 x d_s
  Matrix J_s;     // d_s x d_s
  Matrix J_a;     // d_s x d_a
  bool terminal = false;     // truncated on a non-finite state
  bool episode_end = false;  // last step of its episode (cap or terminal)
  std::uint64_t episode = 0;
  std::size_t step = 0;
};

struct Jacobians {
  Matrix J_s, J_a;
};

inline Jacobians step_jacobians(const DiffEnvSpec& spec, const Matrix& s, const Matrix& a) {
  Tape tape;
  Value sv = tape.variable(s), av = tape.variable(a);
  Value next = spec.dynamics(sv, av);
  return {ad::jacobian(tape, next, {sv}).value(), ad::jacobian(tape, next, {av}).value()};
}

// Policy action for a single state, off any training tape.
inline Matrix sample_action(const nets::SquashedGaussianPolicy& policy, const DiffEnvSpec& spec,
                            const Matrix& s, Rng& rng, bool deterministic) {
  Tape tape;
  auto bound = nets::bind(policy, tape, false);
  Value obs = spec.observe(tape.constant(s));
  if (deterministic) return nets::mean_action(bound, obs).value();
  return nets::act(bound, obs, rng.normal_matrix(s.rows, spec.action_dim)).value();
}

// n_envs persistent environments, each with its own RNG stream split from
// the master seed. Episodes continue across collect() calls and reset at the
// horizon cap or on a non-finite state.
class EnvRunner {
 public:
  struct Slot {
    Matrix s;
    std::size_t t = 0;
    std::uint64_t episode = 0;
    std::uint64_t episodes_started = 0;
    Rng rng;
  };

  EnvRunner(const DiffEnvSpec& spec, std::size_t n_envs, const Rng& master)
      : spec_(&spec), n_envs_(n_envs) {
    if (n_envs == 0) throw Error("EnvRunner: n_envs must be >= 1");
    for (std::size_t e = 0; e < n_envs; ++e) {
      Slot slot;
      slot.rng = master.split(e);
      slots_.push_back(std::move(slot));
      reset(e);
    }
  }

  const DiffEnvSpec& spec() const { return *spec_; }
  std::size_t size() const { return n_envs_; }
  Slot& slot(std::size_t e) { return slots_.at(e); }
  const Slot& slot(std::size_t e) const { return slots_.at(e); }
  std::uint64_t total_steps() const { return total_steps_; }
  void add_steps(std::uint64_t n) { total_steps_ += n; }

  void reset(std::size_t e) {
    Slot& slot = slots_.at(e);
    slot.s = spec_->sample_initial(slot.rng);
    slot.t = 0;
    slot.episode = e + n_envs_ * slot.episodes_started;
    ++slot.episodes_started;
  }

  // Steps every environment `steps` times with the given policy.
  std::vector<Transition> collect(const nets::SquashedGaussianPolicy& policy, std::size_t steps,
                                  bool deterministic = false, bool with_jacobians = true) {
    std::vector<Transition> out;
    out.reserve(steps * n_envs_);
    for (std::size_t e = 0; e < n_envs_; ++e) {
      Slot& slot = slots_[e];
      for (std::size_t k = 0; k < steps; ++k) {
        Transition tr;
        tr.s = slot.s;
        tr.a = sample_action(policy, *spec_, slot.s, slot.rng, deterministic);
        Matrix noise = slot.rng.normal_matrix(1, spec_->state_dim);
        auto [next, r] = step_values(*spec_, tr.s, tr.a, spec_->noise_std > 0 ? &noise : nullptr);
        tr.r = r(0, 0);
        tr.s_next = next;
        if (with_jacobians) {
          Jacobians j = step_jacobians(*spec_, tr.s, tr.a);
          tr.J_s = std::move(j.J_s);
          tr.J_a = std::move(j.J_a);
        }
        tr.terminal = !next.all_finite() || !std::isfinite(tr.r);
        tr.episode = slot.episode;
        tr.step = slot.t;
        ++slot.t;
        ++total_steps_;
        tr.episode_end = tr.terminal || slot.t >= spec_->horizon;
        if (tr.episode_end) {
          reset(e);
        } else {
          slot.s = next;
        }
        // A non-finite transition cannot be stored as training data.
        if (!tr.terminal) out.push_back(std::move(tr));
      }
    }
    return out;
  }

 private:
  const DiffEnvSpec* spec_;
  std::size_t n_envs_;
  std::vector<Slot> slots_;
  std::uint64_t total_steps_ = 0;
};

// n_envs fresh rollouts of `horizon` steps each.
inline std::vector<Transition> collect_diff_trajectories(const DiffEnvSpec& spec,
                                                         const nets::SquashedGaussianPolicy& policy,
                                                         std::size_t n_envs, std::size_t horizon,
                                                         const Rng& rng,
                                                         bool deterministic = false) {
  if (horizon < 1) throw Error("collect_diff_trajectories: horizon must be >= 1");
  EnvRunner runner(spec, n_envs, rng);
  return runner.collect(policy, horizon, deterministic);
}

inline void write_trajectory_csv(const std::vector<Transition>& ts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  if (ts.empty()) return;
  const std::size_t ds = ts.front().s.cols, da = ts.front().a.cols;
  out << "episode,step";
  for (std::size_t i = 0; i < ds; ++i) out << ",s" << i;
  for (std::size_t i = 0; i < da; ++i) out << ",a" << i;
  out << ",r";
  for (std::size_t i = 0; i < ds; ++i) out << ",s_next" << i;
  for (std::size_t i = 0; i < ds; ++i)
    for (std::size_t j = 0; j < ds; ++j) out << ",J_s_" << i << "_" << j;
  for (std::size_t i = 0; i < ds; ++i)
    for (std::size_t j = 0; j < da; ++j) out << ",J_a_" << i << "_" << j;
  out << ",terminal\n";
  out << std::setprecision(17);
  for (const auto& t : ts) {
    out << t.episode << "," << t.step;
    for (double v : t.s.data) out << "," << v;
    for (double v : t.a.data) out << "," << v;
    out << "," << t.r;
    for (double v : t.s_next.data) out << "," << v;
    for (std::size_t i = 0; i < ds * ds; ++i) out << "," << (t.J_s.empty() ? 0.0 : t.J_s[i]);
    for (std::size_t i = 0; i < ds * da; ++i) out << "," << (t.J_a.empty() ? 0.0 : t.J_a[i]);
    out << "," << (t.terminal ? 1 : 0) << "\n";
  }
}

}  // namespace mbmix::env

#endif  // MBMIX_ENV_TRAJECTORIES_HPP_
