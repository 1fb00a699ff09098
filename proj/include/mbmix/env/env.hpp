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

// Differentiable environments. Dynamics and rewards are tape programs over
// row batches (B x d_s states, B x d_a actions), so the same code serves
// single steps, batched rollouts, and Jacobian extraction.

#ifndef MBMIX_ENV_ENV_HPP_
#define MBMIX_ENV_ENV_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mbmix/ad/ad.hpp"
#include "mbmix/rng.hpp"

namespace mbmix::env {

using ad::Tape;
using ad::Value;

struct LqrParams {
  Matrix A, B, Q, R;
};

struct DiffEnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t obs_dim = 0;
  std::size_t horizon = 0;  // episode cap in steps
  double action_bound = std::numeric_limits<double>::infinity();
  double noise_std = 0.0;
  double default_gamma = 0.99;

  std::function<Matrix(Rng&)> sample_initial;  // 1 x d_s
  std::function<Value(Value s, Value a)> dynamics;
  std::function<Value(Value s, Value a)> reward;  // B x 1, r(s_t, a_t)
  std::function<Value(Value s)> observe;

  std::optional<LqrParams> lqr;  // set for the linear-quadratic task
};

struct EnvOptions {
  double noise_std = std::numeric_limits<double>::quiet_NaN();  // NaN keeps the default
  double action_bound = std::numeric_limits<double>::quiet_NaN();
  std::string lqr_variant = "unstable";  // stable | unstable
  std::size_t horizon = 0;               // 0 keeps the default
};

namespace detail {

inline Value quadratic_form_rows(Value x, const Matrix& M) {
  Tape& tape = *x.tape();
  return ad::sum_rows(ad::mul(ad::matmul(x, tape.constant(M)), x));
}

inline DiffEnvSpec make_lqr(const EnvOptions& opt) {
  LqrParams p;
  if (opt.lqr_variant == "stable") {
    p.A = Matrix{{0.95, 0.1}, {0.0, 0.95}};
  } else if (opt.lqr_variant == "unstable") {
    p.A = Matrix{{1.02, 0.1}, {0.0, 1.02}};
  } else {
    throw Error("lqr: unknown variant '" + opt.lqr_variant + "' (stable|unstable)");
  }
  p.B = Matrix{{0.005}, {0.1}};
  p.Q = Matrix::identity(2);
  p.R = Matrix{{0.1}};
  DiffEnvSpec spec;
  spec.name = "lqr";
  spec.state_dim = 2;
  spec.action_dim = 1;
  spec.obs_dim = 2;
  spec.horizon = 100;
  spec.default_gamma = 0.95;
  spec.lqr = p;
  spec.sample_initial = [](Rng& rng) {
    return Matrix{{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}};
  };
  // Row convention: s' = s A^T + a B^T.
  const Matrix At = kernels::transpose(p.A), Bt = kernels::transpose(p.B);
  spec.dynamics = [At, Bt](Value s, Value a) {
    Tape& tape = *s.tape();
    return ad::add(ad::matmul(s, tape.constant(At)), ad::matmul(a, tape.constant(Bt)));
  };
  spec.reward = [Q = p.Q, R = p.R](Value s, Value a) {
    return ad::neg(ad::add(quadratic_form_rows(s, Q), quadratic_form_rows(a, R)));
  };
  spec.observe = [](Value s) { return s; };
  return spec;
}

struct PendulumParams {
  double dt = 0.05, g = 9.81, mass = 1.0, length = 1.0, damping = 0.0;
};

// State (theta, omega) with theta = 0 hanging down; semi-implicit Euler.
inline DiffEnvSpec make_pendulum(const EnvOptions&) {
  const PendulumParams pp;
  DiffEnvSpec spec;
  spec.name = "pendulum";
  spec.state_dim = 2;
  spec.action_dim = 1;
  spec.obs_dim = 3;
  spec.horizon = 200;
  spec.action_bound = 2.0;
  spec.default_gamma = 0.99;
  spec.sample_initial = [](Rng& rng) {
    return Matrix{{rng.uniform(-std::numbers::pi, std::numbers::pi), rng.uniform(-1.0, 1.0)}};
  };
  spec.dynamics = [pp](Value s, Value a) {
    using namespace ad;
    Value th = slice_cols(s, 0, 1), om = slice_cols(s, 1, 2);
    Value acc = scale(sin(th), -pp.g / pp.length) +
                scale(a, 1.0 / (pp.mass * pp.length * pp.length)) + scale(om, -pp.damping);
    Value om2 = om + scale(acc, pp.dt);
    Value th2 = th + scale(om2, pp.dt);
    return concat_cols({th2, om2});
  };
  spec.reward = [](Value s, Value a) {
    using namespace ad;
    Value th = slice_cols(s, 0, 1), om = slice_cols(s, 1, 2);
    return neg(offset(cos(th), 1.0) + scale(square(om), 0.1) + scale(square(a), 0.001));
  };
  spec.observe = [](Value s) {
    using namespace ad;
    Value th = slice_cols(s, 0, 1);
    return concat_cols({cos(th), sin(th), slice_cols(s, 1, 2)});
  };
  return spec;
}

struct SoftContactParams {
  double dt = 0.05;
  int substeps = 4;
  double wall = 1.0;
  double stiffness = 100.0;
  double length_scale = 0.01;
  double damping = 0.1;
  double goal_offset = 0.02;
};

// Penalty force pushing back from the wall at x = wall:
// F = -k * l * softplus((x - wall) / l)^2.
inline Value wall_force(Value x, const SoftContactParams& p) {
  using namespace ad;
  Value pen = scale(offset(x, -p.wall), 1.0 / p.length_scale);
  return scale(square(softplus(pen)), -p.stiffness * p.length_scale);
}

inline DiffEnvSpec make_softcontact(const EnvOptions&) {
  const SoftContactParams cp;
  const double goal = cp.wall - cp.goal_offset;
  DiffEnvSpec spec;
  spec.name = "softcontact-pointmass";
  spec.state_dim = 2;
  spec.action_dim = 1;
  spec.obs_dim = 2;
  spec.horizon = 100;
  spec.action_bound = 1.0;
  spec.default_gamma = 0.98;
  spec.sample_initial = [](Rng& rng) { return Matrix{{rng.uniform(-1.0, 0.0), 0.0}}; };
  spec.dynamics = [cp](Value s, Value a) {
    using namespace ad;
    Value x = slice_cols(s, 0, 1), v = slice_cols(s, 1, 2);
    const double h = cp.dt / cp.substeps;
    for (int k = 0; k < cp.substeps; ++k) {
      Value f = a + wall_force(x, cp) + scale(v, -cp.damping);
      v = v + scale(f, h);
      x = x + scale(v, h);
    }
    return concat_cols({x, v});
  };
  spec.reward = [goal](Value s, Value a) {
    using namespace ad;
    Value x = slice_cols(s, 0, 1), v = slice_cols(s, 1, 2);
    return neg(square(offset(x, -goal)) + scale(square(v), 0.01) + scale(square(a), 0.001));
  };
  spec.observe = [](Value s) { return s; };
  return spec;
}

}  // namespace detail

inline const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"lqr", "pendulum", "softcontact-pointmass"};
  return names;
}

// The seed is accepted for interface symmetry; the tasks themselves are
// fixed and all randomness comes from the Rng passed to sampling calls.
inline DiffEnvSpec make_env(const std::string& name, std::uint64_t seed = 0,
                            const EnvOptions& opt = {}) {
  (void)seed;
  DiffEnvSpec spec;
  if (name == "lqr")
    spec = detail::make_lqr(opt);
  else if (name == "pendulum")
    spec = detail::make_pendulum(opt);
  else if (name == "softcontact-pointmass")
    spec = detail::make_softcontact(opt);
  else
    throw Error("unknown environment '" + name + "' (lqr|pendulum|softcontact-pointmass)");
  if (!std::isnan(opt.noise_std)) {
    if (opt.noise_std < 0.0) throw Error("noise std must be >= 0");
    spec.noise_std = opt.noise_std;
  }
  if (!std::isnan(opt.action_bound)) {
    if (!(opt.action_bound > 0.0)) throw Error("action bound must be positive");
    spec.action_bound = opt.action_bound;
  }
  if (opt.horizon > 0) spec.horizon = opt.horizon;
  return spec;
}

inline void check_action_bounds(const DiffEnvSpec& spec, const Matrix& a) {
  if (!std::isfinite(spec.action_bound)) return;
  for (double v : a.data)
    if (!(std::abs(v) <= spec.action_bound))
      throw Error(spec.name + ": action " + std::to_string(v) + " outside [-" +
                  std::to_string(spec.action_bound) + ", " + std::to_string(spec.action_bound) +
                  "]");
}

struct StepResult {
  Value next_state;
  Value reward;
  bool terminal = false;  // a non-finite state was produced
};

// One step on the tape. noise is B x d_s standard normal and is scaled by the
// spec's noise std; it is added after the deterministic map as a constant, so
// gradients pass straight through it.
inline StepResult env_step(const DiffEnvSpec& spec, Value s, Value a, const Matrix* noise) {
  if (s.cols() != spec.state_dim || a.cols() != spec.action_dim || s.rows() != a.rows())
    throw ShapeError(spec.name + ": step got state " + to_string(s.shape()) + " and action " +
                     to_string(a.shape()));
  if (!s.finite()) throw NonFiniteError(spec.name + ": non-finite input state");
  check_action_bounds(spec, a.value());
  StepResult out;
  out.reward = spec.reward(s, a);
  out.next_state = spec.dynamics(s, a);
  if (spec.noise_std > 0.0 && noise != nullptr) {
    Tape& tape = *s.tape();
    out.next_state = ad::add(out.next_state, tape.constant(kernels::map(*noise, [&](double z) {
                               return spec.noise_std * z;
                             })));
  }
  out.terminal = !out.next_state.finite() || !out.reward.finite();
  return out;
}

inline StepResult env_step(const DiffEnvSpec& spec, Value s, Value a, Rng& rng) {
  const Matrix noise = rng.normal_matrix(s.rows(), spec.state_dim);
  return env_step(spec, s, a, spec.noise_std > 0.0 ? &noise : nullptr);
}

// Untaped convenience for code that only needs numbers.
inline std::pair<Matrix, Matrix> step_values(const DiffEnvSpec& spec, const Matrix& s,
                                             const Matrix& a, const Matrix* noise = nullptr) {
  Tape tape;
  StepResult r = env_step(spec, tape.constant(s), tape.constant(a), noise);
  return {r.next_state.value(), r.reward.value()};
}

}  // namespace mbmix::env

#endif  // MBMIX_ENV_ENV_HPP_
