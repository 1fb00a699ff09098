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

// Truncated-horizon objectives, trajectory-length mixing and TD(lambda)
// value targets.

#ifndef MBMIX_MIX_OBJECTIVE_HPP_
#define MBMIX_MIX_OBJECTIVE_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mbmix/ad/ad.hpp"

namespace mbmix::mix {

using ad::Tape;
using ad::Value;

// Where model branches start: any recent buffer state, or only the recorded
// first states of real episodes.
enum class BranchStarts { kRecent, kEpisodeStarts };

struct MixConfig {
  double lambda_mix = 0.98;
  double gamma = 0.99;
  std::size_t h_max = 32;
  std::size_t interval = 1;  // m
  std::size_t branch_len = 32;
  std::size_t n_branch = 64;
  double lambda_td = 0.98;
  std::size_t recency_window = 0;  // 0 = whole buffer
  BranchStarts branch_starts = BranchStarts::kRecent;

  void validate(bool model_rollouts = true) const {
    auto fail = [](const std::string& what) { throw Error("mix config: " + what); };
    if (!(lambda_mix >= 0.0 && lambda_mix <= 1.0)) fail("lambda_mix must be in [0, 1]");
    if (!(lambda_td >= 0.0 && lambda_td <= 1.0)) fail("lambda_td must be in [0, 1]");
    if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0, 1]");
    if (interval < 1 || interval > h_max) fail("interval must satisfy 1 <= m <= h_max");
    if (h_max % interval != 0) fail("h_max must be divisible by the interval");
    if (model_rollouts && branch_len < h_max) fail("branch_len must be >= h_max");
    if (n_branch < 1) fail("n_branch must be >= 1");
  }
};

struct HorizonWeight {
  std::size_t horizon;
  double weight;
};

// Horizons m, 2m, ..., H_max with w_{km} = (1 - l^m) l^{(k-1)m} and the tail
// l^{(K-1)m} on H_max (K = H_max / m). The tail (and, if rounding
// overshoots, the leading weight) is nudged by a few ulps so the
// left-to-right sum is exactly 1.
inline std::vector<HorizonWeight> mix_weights(double lambda, std::size_t h_max,
                                              std::size_t m = 1) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error("mix_weights: lambda must be in [0, 1], got " + std::to_string(lambda));
  if (m < 1 || h_max < m || h_max % m != 0)
    throw Error("mix_weights: need 1 <= m <= h_max with m dividing h_max (m=" +
                std::to_string(m) + ", h_max=" + std::to_string(h_max) + ")");
  const std::size_t K = h_max / m;
  const double lm = std::pow(lambda, static_cast<double>(m));
  std::vector<HorizonWeight> w;
  w.reserve(K);
  double head = 0.0;
  for (std::size_t k = 1; k < K; ++k) {
    const double wk = (1.0 - lm) * std::pow(lm, static_cast<double>(k - 1));
    w.push_back({k * m, wk});
    head += wk;
  }
  const double exact_tail = std::pow(lm, static_cast<double>(K - 1));
  auto head_sum = [&w] {
    double s = 0.0;
    for (const auto& hw : w) s += hw.weight;
    return s;
  };
  // Rounding can carry the head past 1 even though the true tail is
  // positive; shave the leading weight until a non-negative tail closes it.
  for (int shave = 0; shave < 256; ++shave) {
    double tail = head + exact_tail == 1.0 ? exact_tail : 1.0 - head;
    for (int i = 0; i < 64 && tail >= 0.0 && head + tail != 1.0; ++i)
      tail = std::nextafter(tail, head + tail < 1.0 ? 2.0 : -1.0);
    if (tail >= 0.0 && head + tail == 1.0) {
      w.push_back({h_max, tail});
      return w;
    }
    w.front().weight = std::nextafter(w.front().weight, -1.0);
    head = head_sum();
  }
  throw Error("mix_weights: could not normalize weights");
}

// Per-branch sequences recorded on one tape; row b of every entry is
// branch b. values[t] = V(s_t) for t = 0..T.
struct RolloutBundle {
  std::vector<Value> states;   // T+1 entries, B x d_s
  std::vector<Value> actions;  // T entries, B x d_a
  std::vector<Value> rewards;  // T entries, B x 1
  std::vector<Value> values;   // T+1 entries, B x 1
  Matrix starts;               // B x d_s

  std::size_t length() const { return rewards.size(); }
  std::size_t branches() const { return rewards.empty() ? 0 : rewards.front().rows(); }
};

// Builds a bundle from plain per-branch sequences (rewards B x T, values
// B x (T+1)) as tape constants. Used by tests and the tabular lab.
inline RolloutBundle bundle_from_values(Tape& tape, const Matrix& rewards, const Matrix& values) {
  if (values.cols != rewards.cols + 1 || values.rows != rewards.rows)
    throw ShapeError("bundle_from_values: rewards " + to_string(rewards.shape()) +
                     " need values with one more column, got " + to_string(values.shape()));
  RolloutBundle b;
  for (std::size_t t = 0; t < rewards.cols; ++t)
    b.rewards.push_back(tape.constant(kernels::col_slice(rewards, t, t + 1)));
  for (std::size_t t = 0; t <= rewards.cols; ++t)
    b.values.push_back(tape.constant(kernels::col_slice(values, t, t + 1)));
  return b;
}

// Mean over branches of sum_{t<H} g^t r_t + g^H V(s_H).
inline Value fixed_horizon_objective(const RolloutBundle& b, std::size_t H, double gamma) {
  using namespace ad;
  if (H < 1) throw Error("fixed_horizon_objective: H must be >= 1");
  if (H > b.length() || b.values.size() <= H)
    throw Error("fixed_horizon_objective: H=" + std::to_string(H) + " exceeds bundle length " +
                std::to_string(b.length()));
  Value acc = b.rewards[0];
  double disc = 1.0;
  for (std::size_t t = 1; t < H; ++t) {
    disc *= gamma;
    acc = add(acc, scale(b.rewards[t], disc));
  }
  acc = add(acc, scale(b.values[H], disc * gamma));
  return mean(acc);
}

// Weighted sum of fixed-horizon objectives.
inline Value mix_objective(const RolloutBundle& b, const MixConfig& cfg) {
  using namespace ad;
  if (b.length() < cfg.h_max)
    throw Error("mix_objective: bundle length " + std::to_string(b.length()) + " < h_max " +
                std::to_string(cfg.h_max));
  Value total;
  for (const auto& hw : mix_weights(cfg.lambda_mix, cfg.h_max, cfg.interval)) {
    if (hw.weight == 0.0) continue;
    Value term = scale(fixed_horizon_objective(b, hw.horizon, cfg.gamma), hw.weight);
    total = total.valid() ? add(total, term) : term;
  }
  return total;
}

// One pass over the rollout for m = 1:
//   sum_{t<H} (g l)^t r_t + (1-l) sum_{t=1}^{H-1} l^{t-1} g^t V(s_t)
//   + l^{H-1} g^H V(s_H),
// the last term being the truncated tail of the infinite mixture.
inline Value single_pass_mix_objective(const RolloutBundle& b, const MixConfig& cfg) {
  using namespace ad;
  if (cfg.interval != 1) throw Error("single_pass_mix_objective: requires interval 1");
  const std::size_t H = cfg.h_max;
  if (b.length() < H) throw Error("single_pass_mix_objective: bundle shorter than h_max");
  const double g = cfg.gamma, l = cfg.lambda_mix;
  Value acc = b.rewards[0];
  for (std::size_t t = 1; t < H; ++t) {
    const double gt = std::pow(g, static_cast<double>(t));
    const double lt1 = std::pow(l, static_cast<double>(t - 1));
    acc = add(acc, scale(b.rewards[t], gt * lt1 * l));
    if ((1.0 - l) * lt1 != 0.0) acc = add(acc, scale(b.values[t], (1.0 - l) * lt1 * gt));
  }
  acc = add(acc, scale(b.values[H], std::pow(l, static_cast<double>(H - 1)) *
                                        std::pow(g, static_cast<double>(H))));
  return mean(acc);
}

// Targets for one sequence of length h: rewards r_0..r_{h-1} and values
// V(s_0)..V(s_h). Computed by the backward recursion
//   V_hat_{h-1} = r_{h-1} + g V_h,
//   V_hat_t = r_t + g ((1 - l) V_{t+1} + l V_hat_{t+1}),
// which expands to (1-l) sum_{k<h-t} l^{k-1} G_t^k + l^{h-t-1} G_t^{h-t}.
inline std::vector<double> value_targets(const std::vector<double>& rewards,
                                         const std::vector<double>& values, double gamma,
                                         double lambda_td, std::size_t h) {
  if (rewards.size() != h || values.size() != h + 1)
    throw Error("value_targets: expected " + std::to_string(h) + " rewards and " +
                std::to_string(h + 1) + " values, got " + std::to_string(rewards.size()) +
                " and " + std::to_string(values.size()));
  std::vector<double> out(h);
  if (h == 0) return out;
  out[h - 1] = rewards[h - 1] + gamma * values[h];
  for (std::size_t t = h - 1; t-- > 0;)
    out[t] = rewards[t] + gamma * ((1.0 - lambda_td) * values[t + 1] + lambda_td * out[t + 1]);
  return out;
}

// Batched form: rewards B x h, values B x (h+1); returns B x h constants.
inline Matrix value_targets(const Matrix& rewards, const Matrix& values, double gamma,
                            double lambda_td) {
  if (values.rows != rewards.rows || values.cols != rewards.cols + 1)
    throw Error("value_targets: rewards " + to_string(rewards.shape()) + " and values " +
                to_string(values.shape()) + " do not line up");
  const std::size_t h = rewards.cols;
  Matrix out(rewards.rows, h);
  for (std::size_t b = 0; b < rewards.rows; ++b) {
    if (h == 0) continue;
    out(b, h - 1) = rewards(b, h - 1) + gamma * values(b, h);
    for (std::size_t t = h - 1; t-- > 0;)
      out(b, t) = rewards(b, t) +
                  gamma * ((1.0 - lambda_td) * values(b, t + 1) + lambda_td * out(b, t + 1));
  }
  return out;
}

// Plain rewards/values of a bundle (B x T and B x (T+1)).
inline std::pair<Matrix, Matrix> bundle_numbers(const RolloutBundle& b) {
  const std::size_t B = b.branches(), T = b.length();
  Matrix r(B, T), v(B, T + 1);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < B; ++i) r(i, t) = b.rewards[t].value()(i, 0);
  for (std::size_t t = 0; t <= T; ++t)
    for (std::size_t i = 0; i < B; ++i) v(i, t) = b.values[t].value()(i, 0);
  return {r, v};
}

}  // namespace mbmix::mix

#endif  // MBMIX_MIX_OBJECTIVE_HPP_
