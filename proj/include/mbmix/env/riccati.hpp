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

// Discounted LQR by Riccati iteration, and closed-loop cost evaluation for
// linear feedback a = -K s.

#ifndef MBMIX_ENV_RICCATI_HPP_
#define MBMIX_ENV_RICCATI_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mbmix/env/env.hpp"

namespace mbmix::env {

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c)
      e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
  return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c)
      m(r, c) = e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return m;
}

struct RiccatiSolution {
  Matrix P;  // value x^T P x of the optimal cost-to-go
  Matrix K;  // a = -K s
  int iterations = 0;
  bool converged = false;
};

// P = Q + g A'PA - g^2 A'PB (R + g B'PB)^-1 B'PA, K = g (R + g B'PB)^-1 B'PA.
inline RiccatiSolution solve_discounted_riccati(const LqrParams& p, double gamma,
                                                int max_iter = 100000, double tol = 1e-14) {
  const Eigen::MatrixXd A = to_eigen(p.A), B = to_eigen(p.B), Q = to_eigen(p.Q),
                        R = to_eigen(p.R);
  Eigen::MatrixXd P = Q;
  RiccatiSolution out;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::MatrixXd S = R + gamma * B.transpose() * P * B;
    const Eigen::MatrixXd K = S.ldlt().solve(gamma * B.transpose() * P * A);
    const Eigen::MatrixXd next = Q + K.transpose() * R * K +
                                 gamma * (A - B * K).transpose() * P * (A - B * K);
    const double delta = (next - P).cwiseAbs().maxCoeff();
    P = 0.5 * (next + next.transpose());
    out.iterations = it;
    if (delta <= tol * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      out.converged = true;
      break;
    }
  }
  const Eigen::MatrixXd S = R + gamma * B.transpose() * P * B;
  out.K = from_eigen(S.ldlt().solve(gamma * B.transpose() * P * A));
  out.P = from_eigen(P);
  return out;
}

// Discounted T-step cost sum_t g^t (s'Qs + a'Ra) of a = -K s, averaged over
// the given start states. Noise-free.
inline double linear_policy_cost(const LqrParams& p, const Matrix& K, double gamma,
                                 const std::vector<Matrix>& starts, std::size_t T) {
  const Eigen::MatrixXd A = to_eigen(p.A), B = to_eigen(p.B), Q = to_eigen(p.Q),
                        R = to_eigen(p.R), Ke = to_eigen(K);
  double total = 0.0;
  for (const Matrix& s0 : starts) {
    Eigen::VectorXd s = to_eigen(s0).transpose();
    double disc = 1.0, cost = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const Eigen::VectorXd a = -Ke * s;
      cost += disc * (s.dot(Q * s) + a.dot(R * a));
      s = A * s + B * a;
      disc *= gamma;
    }
    total += cost;
  }
  return total / static_cast<double>(starts.size());
}

// Fixed evaluation start states shared by every LQR comparison.
inline std::vector<Matrix> lqr_eval_starts(std::size_t n, std::uint64_t seed = 12345) {
  Rng rng(seed);
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(Matrix{{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}});
  return out;
}

}  // namespace mbmix::env

#endif  // MBMIX_ENV_RICCATI_HPP_
