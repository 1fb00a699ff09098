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

// Random tabular MDPs with Dirichlet transitions and softmax policies.

#ifndef MBMIX_ENV_TABULAR_HPP_
#define MBMIX_ENV_TABULAR_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mbmix/ad/matrix.hpp"
#include "mbmix/rng.hpp"

namespace mbmix::env {

struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  Matrix R;                // S x A
  std::vector<Matrix> P;   // P[a] is S x S, row s is P(. | s, a)
  Matrix theta;            // S x A logits
  double gamma = 0.99;

  double p(std::size_t s, std::size_t a, std::size_t s2) const { return P[a](s, s2); }
};

enum class RewardLaw { kUniform, kConstant };

struct TabularOptions {
  std::size_t n_states = 20;
  std::size_t n_actions = 5;
  double dirichlet_alpha = 1.0;
  double gamma = 0.99;
  RewardLaw reward_law = RewardLaw::kUniform;
  double constant_reward = 0.5;
};

// Dirichlet(alpha) rows via normalized Gamma(alpha, 1) draws; rewards
// uniform on [0, 1]. Rows are renormalized so each sums to 1 up to rounding
// of the final division.
inline TabularMdp make_tabular_mdp(std::uint64_t seed, const TabularOptions& opt = {}) {
  if (opt.n_states < 1 || opt.n_actions < 1) throw Error("tabular mdp: dims must be >= 1");
  if (!(opt.dirichlet_alpha > 0.0) || !std::isfinite(opt.dirichlet_alpha))
    throw Error("tabular mdp: dirichlet alpha must be positive, got " +
                std::to_string(opt.dirichlet_alpha));
  if (!(opt.gamma >= 0.0 && opt.gamma < 1.0)) throw Error("tabular mdp: gamma must be in [0, 1)");
  Rng rng(seed);
  Rng reward_rng = rng.split(1), trans_rng = rng.split(2);
  TabularMdp m;
  m.n_states = opt.n_states;
  m.n_actions = opt.n_actions;
  m.gamma = opt.gamma;
  m.R = Matrix(opt.n_states, opt.n_actions);
  for (double& r : m.R.data)
    r = opt.reward_law == RewardLaw::kUniform ? reward_rng.uniform() : opt.constant_reward;
  m.P.assign(opt.n_actions, Matrix(opt.n_states, opt.n_states));
  for (std::size_t s = 0; s < opt.n_states; ++s) {
    for (std::size_t a = 0; a < opt.n_actions; ++a) {
      double total = 0.0;
      std::vector<double> g(opt.n_states);
      // Tiny alphas can underflow every draw; redraw until the row has mass.
      do {
        total = 0.0;
        for (double& x : g) total += (x = trans_rng.gamma(opt.dirichlet_alpha));
      } while (!(total > 0.0));
      for (std::size_t s2 = 0; s2 < opt.n_states; ++s2) m.P[a](s, s2) = g[s2] / total;
    }
  }
  m.theta = Matrix(opt.n_states, opt.n_actions);
  return m;
}

inline Matrix softmax_policy(const Matrix& theta) {
  Matrix pi(theta.rows, theta.cols);
  for (std::size_t s = 0; s < theta.rows; ++s) {
    double mx = theta(s, 0);
    for (std::size_t a = 1; a < theta.cols; ++a) mx = std::max(mx, theta(s, a));
    double z = 0.0;
    for (std::size_t a = 0; a < theta.cols; ++a) z += (pi(s, a) = std::exp(theta(s, a) - mx));
    for (std::size_t a = 0; a < theta.cols; ++a) pi(s, a) /= z;
  }
  return pi;
}

// P^pi (S x S) and r^pi (S) for a policy given as S x A probabilities.
inline Matrix policy_transition(const TabularMdp& m, const Matrix& pi) {
  Matrix out(m.n_states, m.n_states);
  for (std::size_t s = 0; s < m.n_states; ++s)
    for (std::size_t a = 0; a < m.n_actions; ++a)
      for (std::size_t s2 = 0; s2 < m.n_states; ++s2) out(s, s2) += pi(s, a) * m.P[a](s, s2);
  return out;
}

inline std::vector<double> policy_reward(const TabularMdp& m, const Matrix& pi) {
  std::vector<double> r(m.n_states, 0.0);
  for (std::size_t s = 0; s < m.n_states; ++s)
    for (std::size_t a = 0; a < m.n_actions; ++a) r[s] += pi(s, a) * m.R(s, a);
  return r;
}

inline void check_policy(const TabularMdp& m, const Matrix& pi) {
  if (pi.rows != m.n_states || pi.cols != m.n_actions)
    throw ShapeError("tabular policy shape " + to_string(pi.shape()) + " does not match MDP (" +
                     std::to_string(m.n_states) + "x" + std::to_string(m.n_actions) + ")");
}

// Solves (I - gamma P^pi) V = r^pi by LU.
inline std::vector<double> tabular_exact_value(const TabularMdp& m, const Matrix& pi) {
  check_policy(m, pi);
  if (!(m.gamma < 1.0)) throw Error("tabular_exact_value: gamma must be < 1");
  const Matrix Ppi = policy_transition(m, pi);
  const auto r = policy_reward(m, pi);
  const auto n = static_cast<Eigen::Index>(m.n_states);
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b(i) = r[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j)
      A(i, j) -= m.gamma * Ppi(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw Error("tabular_exact_value: singular system");
  const Eigen::VectorXd v = lu.solve(b);
  return std::vector<double>(v.data(), v.data() + n);
}

inline std::size_t sample_categorical(const double* probs, std::size_t n, Rng& rng) {
  double u = rng.uniform(), acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return n - 1;
}

}  // namespace mbmix::env

#endif  // MBMIX_ENV_TABULAR_HPP_
