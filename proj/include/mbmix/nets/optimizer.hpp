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

#ifndef MBMIX_NETS_OPTIMIZER_HPP_
#define MBMIX_NETS_OPTIMIZER_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mbmix/ad/matrix.hpp"

namespace mbmix::nets {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

struct OptimizerState {
  AdamConfig config;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
};

inline OptimizerState make_optimizer(const std::vector<Matrix>& params, AdamConfig config = {}) {
  OptimizerState s;
  s.config = config;
  for (const auto& p : params) {
    s.m.emplace_back(p.rows, p.cols);
    s.v.emplace_back(p.rows, p.cols);
  }
  return s;
}

struct StepReport {
  bool applied = false;
  bool clipped = false;
  double grad_norm = 0.0;     // before clipping
  double applied_norm = 0.0;  // after clipping
  std::string skipped_reason;
};

inline double global_norm(const std::vector<Matrix>& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (double x : g.data) s += x * x;
  return std::sqrt(s);
}

// One Adam step on params. Gradients are descent directions of the loss.
// A non-finite gradient leaves params and state untouched.
inline StepReport apply_gradients(const std::vector<Matrix*>& params,
                                  const std::vector<Matrix>& grads, OptimizerState& opt) {
  if (grads.size() != params.size() || opt.m.size() != params.size())
    throw ShapeError("apply_gradients: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].shape() != params[i]->shape() || opt.m[i].shape() != params[i]->shape())
      throw ShapeError("apply_gradients: parameter " + std::to_string(i) + " has shape " +
                       to_string(params[i]->shape()) + ", gradient " +
                       to_string(grads[i].shape()));
  StepReport rep;
  rep.grad_norm = global_norm(grads);
  if (!std::isfinite(rep.grad_norm)) {
    rep.skipped_reason = "non-finite gradient";
    return rep;
  }
  double factor = 1.0;
  const AdamConfig& c = opt.config;
  if (c.clip_norm > 0.0 && rep.grad_norm > c.clip_norm) {
    factor = c.clip_norm / rep.grad_norm;
    rep.clipped = true;
  }
  rep.applied_norm = rep.grad_norm * factor;
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = grads[i][k] * factor;
      double& m = opt.m[i][k];
      double& v = opt.v[i][k];
      m = c.beta1 * m + (1.0 - c.beta1) * g;
      v = c.beta2 * v + (1.0 - c.beta2) * g * g;
      p[k] -= c.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + c.epsilon);
    }
  }
  rep.applied = true;
  return rep;
}

inline StepReport apply_gradients(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
                                  OptimizerState& opt) {
  std::vector<Matrix*> refs;
  for (auto& p : params) refs.push_back(&p);
  return apply_gradients(refs, grads, opt);
}

}  // namespace mbmix::nets

#endif  // MBMIX_NETS_OPTIMIZER_HPP_
