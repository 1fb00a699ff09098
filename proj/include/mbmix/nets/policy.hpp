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

// Reparameterized squashed-Gaussian policy and a running observation
// normalizer.

#ifndef MBMIX_NETS_POLICY_HPP_
#define MBMIX_NETS_POLICY_HPP_

#include <cmath>
#include <limits>
#include <vector>

#include "mbmix/nets/mlp.hpp"
#include "mbmix/nets/optimizer.hpp"

namespace mbmix::nets {

// Welford running mean/variance over observation rows. Applied as a fixed
// affine map (constants on the tape), so it never receives gradients.
struct RunningNormalizer {
  bool enabled = false;
  double count = 0.0;
  std::vector<double> mean;
  std::vector<double> m2;
  double min_std = 1e-6;

  void update(const Matrix& obs) {
    if (!enabled) return;
    if (mean.empty()) {
      mean.assign(obs.cols, 0.0);
      m2.assign(obs.cols, 0.0);
    }
    for (std::size_t r = 0; r < obs.rows; ++r) {
      count += 1.0;
      for (std::size_t c = 0; c < obs.cols; ++c) {
        const double d = obs(r, c) - mean[c];
        mean[c] += d / count;
        m2[c] += d * (obs(r, c) - mean[c]);
      }
    }
  }

  double stddev(std::size_t c) const {
    if (count < 2.0) return 1.0;
    return std::max(std::sqrt(m2[c] / (count - 1.0)), min_std);
  }

  ad::Value apply(ad::Value obs) const {
    if (!enabled || mean.empty()) return obs;
    ad::Tape& tape = *obs.tape();
    Matrix shift(1, obs.cols()), inv(1, obs.cols());
    for (std::size_t c = 0; c < obs.cols(); ++c) {
      shift(0, c) = -mean[c];
      inv(0, c) = 1.0 / stddev(c);
    }
    using namespace ad;
    return mul_broadcast(add_rowwise(obs, tape.constant(shift)), tape.constant(inv));
  }
};

// a = bound * tanh(mu(obs) + exp(log_std) * eps). With an unbounded action
// box the squash is dropped and a = mu + exp(log_std) * eps.
struct SquashedGaussianPolicy {
  Mlp net;
  Matrix log_std;        // 1 x d_a, state independent
  double action_bound = 1.0;
  bool learn_std = true;
  RunningNormalizer normalizer;

  std::size_t action_dim() const { return net.output_dim(); }
  bool squashed() const { return std::isfinite(action_bound); }

  // Trainable parameters in optimizer order: net weights, then log_std.
  std::vector<Matrix*> param_refs() {
    std::vector<Matrix*> out;
    for (auto& p : net.params) out.push_back(&p);
    out.push_back(&log_std);
    return out;
  }
  std::vector<Matrix> params() const {
    std::vector<Matrix> out = net.params;
    out.push_back(log_std);
    return out;
  }
  std::size_t num_params() const { return net.num_params() + log_std.size(); }
};

struct PolicyOptions {
  std::vector<std::size_t> hidden = {64, 64};
  double init_log_std = -0.5;
  bool learn_std = true;
  double output_gain = 0.01;
  bool normalize_obs = false;
};

inline SquashedGaussianPolicy make_policy(std::size_t obs_dim, std::size_t action_dim,
                                          double action_bound, const PolicyOptions& opt,
                                          Rng& rng) {
  if (!(action_bound > 0.0)) throw Error("make_policy: action bound must be positive");
  std::vector<std::size_t> widths{obs_dim};
  widths.insert(widths.end(), opt.hidden.begin(), opt.hidden.end());
  widths.push_back(action_dim);
  SquashedGaussianPolicy p;
  p.net = make_mlp(widths, OutputTransform::kIdentity, rng, opt.output_gain);
  p.log_std = Matrix(1, action_dim, opt.init_log_std);
  p.action_bound = action_bound;
  p.learn_std = opt.learn_std;
  p.normalizer.enabled = opt.normalize_obs;
  return p;
}

struct BoundPolicy {
  const SquashedGaussianPolicy* policy = nullptr;
  std::vector<ad::Value> net;
  ad::Value log_std;

  // Parameters in the same order as SquashedGaussianPolicy::param_refs().
  std::vector<ad::Value> all() const {
    std::vector<ad::Value> out = net;
    out.push_back(log_std);
    return out;
  }
};

inline BoundPolicy bind(const SquashedGaussianPolicy& p, ad::Tape& tape, bool trainable) {
  BoundPolicy b;
  b.policy = &p;
  b.net = bind(p.net.params, tape, trainable);
  b.log_std = trainable && p.learn_std ? tape.variable(p.log_std) : tape.constant(p.log_std);
  return b;
}

namespace detail {
// Keeps |a| strictly below the bound even when tanh rounds to 1.
inline constexpr double kSquashMargin = 1.0 - 1e-12;
}  // namespace detail

inline ad::Value squash(const SquashedGaussianPolicy& p, ad::Value pre) {
  if (!p.squashed()) return pre;
  return ad::scale(ad::tanh(pre), p.action_bound * detail::kSquashMargin);
}

// obs is B x d_obs; eps is B x d_a standard normal noise.
inline ad::Value act(const BoundPolicy& b, ad::Value obs, const Matrix& eps) {
  using namespace ad;
  const SquashedGaussianPolicy& p = *b.policy;
  Value mu = forward(p.net, b.net, p.normalizer.apply(obs));
  if (eps.rows != mu.rows() || eps.cols != mu.cols())
    throw ShapeError("policy act: noise shape " + to_string(eps.shape()) + " != action shape " +
                     to_string(mu.shape()));
  Tape& tape = *obs.tape();
  Value noise = mul(broadcast(exp(b.log_std), mu.rows(), mu.cols()), tape.constant(eps));
  return squash(p, add(mu, noise));
}

// Deterministic action used for evaluation.
inline ad::Value mean_action(const BoundPolicy& b, ad::Value obs) {
  const SquashedGaussianPolicy& p = *b.policy;
  return squash(p, forward(p.net, b.net, p.normalizer.apply(obs)));
}

inline OptimizerState make_optimizer(SquashedGaussianPolicy& p, AdamConfig config) {
  return make_optimizer(p.params(), config);
}

}  // namespace mbmix::nets

#endif  // MBMIX_NETS_POLICY_HPP_
