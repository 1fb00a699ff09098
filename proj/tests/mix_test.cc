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

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "mbmix/env/riccati.hpp"
#include "mbmix/mix/agent.hpp"
#include "mbmix/mix/objective.hpp"
#include "test_util.hpp"

namespace mbmix {
namespace {

using ad::Tape;
using ad::Value;
using mix::Method;
using mix::MixConfig;
using mix::World;

// Independent reference: sum of the fixed-horizon returns for one branch.
double ref_fixed(const std::vector<double>& r, const std::vector<double>& v, std::size_t H,
                 double g) {
  double acc = 0.0;
  for (std::size_t t = 0; t < H; ++t) acc += std::pow(g, double(t)) * r[t];
  return acc + std::pow(g, double(H)) * v[H];
}

// Literal transcription of the value-target formula with explicit G_t^k.
double ref_target(const std::vector<double>& r, const std::vector<double>& v, double g, double l,
                  std::size_t t, std::size_t h) {
  auto G = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::pow(g, double(i)) * r[t + i];
    return s + std::pow(g, double(k)) * v[t + k];
  };
  double head = 0.0;
  for (std::size_t k = 1; k + t < h; ++k) head += std::pow(l, double(k - 1)) * G(k);
  return (1.0 - l) * head + std::pow(l, double(h - t - 1)) * G(h - t);
}

struct RandomRollout {
  Matrix rewards, values;
};

RandomRollout random_rollout(std::mt19937_64& gen, std::size_t B, std::size_t T) {
  return {testing::random_matrix(gen, B, T), testing::random_matrix(gen, B, T + 1, 3.0)};
}

std::vector<double> row(const Matrix& m, std::size_t r) {
  std::vector<double> out(m.cols);
  for (std::size_t c = 0; c < m.cols; ++c) out[c] = m(r, c);
  return out;
}

TEST(MixWeights, LambdaZeroPutsAllWeightOnFirstHorizon) {
  for (std::size_t m : {1, 2, 4}) {
    auto w = mix::mix_weights(0.0, 8, m);
    ASSERT_EQ(w.size(), 8 / m);
    EXPECT_EQ(w[0].horizon, m);
    EXPECT_EQ(w[0].weight, 1.0);
    for (std::size_t k = 1; k < w.size(); ++k) EXPECT_EQ(w[k].weight, 0.0);
  }
}

TEST(MixWeights, HalfLambdaThreeHorizons) {
  auto w = mix::mix_weights(0.5, 3, 1);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_DOUBLE_EQ(w[0].weight, 0.5);
  EXPECT_DOUBLE_EQ(w[1].weight, 0.25);
  EXPECT_DOUBLE_EQ(w[2].weight, 0.25);
  EXPECT_EQ(w[2].horizon, 3u);
}

TEST(MixWeights, LambdaOneIsAllTail) {
  auto w = mix::mix_weights(1.0, 16, 2);
  ASSERT_EQ(w.size(), 8u);
  for (std::size_t k = 0; k + 1 < w.size(); ++k) EXPECT_EQ(w[k].weight, 0.0);
  EXPECT_EQ(w.back().weight, 1.0);
}

TEST(MixWeights, RandomConfigurationsSumToExactlyOne) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> mi(1, 8), ki(1, 40);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t m = mi(gen), hmax = m * ki(gen);
    const double l = lam(gen);
    double s = 0.0;
    for (const auto& hw : mix::mix_weights(l, hmax, m)) {
      EXPECT_GE(hw.weight, 0.0);
      EXPECT_EQ(hw.horizon % m, 0u);
      s += hw.weight;
    }
    EXPECT_EQ(s, 1.0) << "lambda=" << l << " hmax=" << hmax << " m=" << m;
  }
}

TEST(MixWeights, GeometricShapeBeforeTail) {
  auto w = mix::mix_weights(0.9, 12, 3);
  const double l3 = std::pow(0.9, 3.0);
  for (std::size_t k = 0; k + 1 < w.size(); ++k)
    EXPECT_NEAR(w[k].weight, (1 - l3) * std::pow(l3, double(k)), 1e-15);
}

TEST(MixWeights, InvalidConfigurationsThrow) {
  EXPECT_THROW(mix::mix_weights(-0.1, 4, 1), Error);
  EXPECT_THROW(mix::mix_weights(1.1, 4, 1), Error);
  EXPECT_THROW(mix::mix_weights(0.5, 5, 2), Error);
  EXPECT_THROW(mix::mix_weights(0.5, 4, 0), Error);
  EXPECT_THROW(mix::mix_weights(0.5, 2, 4), Error);
}

TEST(MixConfigTest, ValidateRejectsShortBranches) {
  MixConfig c;
  c.h_max = 16;
  c.branch_len = 8;
  EXPECT_THROW(c.validate(true), Error);
  EXPECT_NO_THROW(c.validate(false));
  c.branch_len = 16;
  c.interval = 3;
  EXPECT_THROW(c.validate(), Error);
}

TEST(FixedHorizon, OneStepSubstitution) {
  Tape tape;
  auto b = mix::bundle_from_values(tape, Matrix{{1.0}}, Matrix{{0.0, 2.0}});
  EXPECT_DOUBLE_EQ(mix::fixed_horizon_objective(b, 1, 0.9).item(), 2.8);
}

TEST(FixedHorizon, TwoStepSubstitution) {
  Tape tape;
  auto b = mix::bundle_from_values(tape, Matrix{{1.0, 1.0}}, Matrix{{0.0, 0.0, 0.0}});
  EXPECT_DOUBLE_EQ(mix::fixed_horizon_objective(b, 2, 0.5).item(), 1.5);
}

TEST(FixedHorizon, HorizonBeyondBundleThrows) {
  Tape tape;
  auto b = mix::bundle_from_values(tape, Matrix{{1.0, 1.0}}, Matrix{{0.0, 0.0, 0.0}});
  EXPECT_THROW(mix::fixed_horizon_objective(b, 3, 0.5), Error);
  EXPECT_THROW(mix::fixed_horizon_objective(b, 0, 0.5), Error);
}

TEST(MixObjective, LimitsMatchOneStepAndFullHorizon) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 20; ++rep) {
    auto rr = random_rollout(gen, 5, 12);
    Tape tape;
    auto b = mix::bundle_from_values(tape, rr.rewards, rr.values);
    MixConfig c;
    c.gamma = 0.93;
    c.h_max = 12;
    c.lambda_mix = 0.0;
    EXPECT_NEAR(mix::mix_objective(b, c).item(), mix::fixed_horizon_objective(b, 1, c.gamma).item(),
                1e-10);
    c.lambda_mix = 1.0;
    EXPECT_NEAR(mix::mix_objective(b, c).item(),
                mix::fixed_horizon_objective(b, 12, c.gamma).item(), 1e-10);
  }
}

TEST(MixObjective, WeightedSumMatchesSinglePassAndReference) {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t H = 1 + rep % 20;
    auto rr = random_rollout(gen, 4, H + 3);
    Tape tape;
    auto b = mix::bundle_from_values(tape, rr.rewards, rr.values);
    MixConfig c;
    c.gamma = 0.97;
    c.h_max = H;
    c.lambda_mix = 0.7;
    const double weighted = mix::mix_objective(b, c).item();
    const double single = mix::single_pass_mix_objective(b, c).item();
    EXPECT_NEAR(weighted, single, 1e-10);
    // Plain-double reference of the weighted-sum form.
    double ref = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto r = row(rr.rewards, i), v = row(rr.values, i);
      double s = 0.0;
      for (std::size_t h = 1; h <= H; ++h) {
        const double w = h < H ? 0.3 * std::pow(0.7, double(h - 1)) : std::pow(0.7, double(H - 1));
        s += w * ref_fixed(r, v, h, c.gamma);
      }
      ref += s / 4.0;
    }
    EXPECT_NEAR(weighted, ref, 1e-10);
  }
}

TEST(MixObjective, IntervalTwoUsesEvenHorizons) {
  std::mt19937_64 gen(5);
  auto rr = random_rollout(gen, 3, 6);
  Tape tape;
  auto b = mix::bundle_from_values(tape, rr.rewards, rr.values);
  MixConfig c;
  c.gamma = 0.9;
  c.h_max = 6;
  c.interval = 2;
  c.lambda_mix = 0.6;
  const double l2 = 0.36;
  const double expect = (1 - l2) * mix::fixed_horizon_objective(b, 2, 0.9).item() +
                        (1 - l2) * l2 * mix::fixed_horizon_objective(b, 4, 0.9).item() +
                        l2 * l2 * mix::fixed_horizon_objective(b, 6, 0.9).item();
  EXPECT_NEAR(mix::mix_objective(b, c).item(), expect, 1e-12);
  EXPECT_THROW(mix::single_pass_mix_objective(b, c), Error);
}

TEST(ValueTargets, WorkedExample) {
  auto t = mix::value_targets({1, 1, 1}, {0, 0, 0, 0}, 0.5, 0.5, 3);
  EXPECT_DOUBLE_EQ(t[0], 1.3125);
}

TEST(ValueTargets, LambdaZeroIsOneStep) {
  std::vector<double> r{0.3, -1.0, 2.0, 0.5}, v{1.0, 2.0, -3.0, 0.25, 4.0};
  auto t = mix::value_targets(r, v, 0.9, 0.0, 4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(t[i], r[i] + 0.9 * v[i + 1], 1e-15);
}

TEST(ValueTargets, LastStepIsSingleReturn) {
  std::vector<double> r{0.3, -1.0, 2.0}, v{1.0, 2.0, -3.0, 0.25};
  for (double l : {0.0, 0.4, 1.0}) {
    auto t = mix::value_targets(r, v, 0.8, l, 3);
    EXPECT_DOUBLE_EQ(t[2], 2.0 + 0.8 * 0.25);
  }
}

TEST(ValueTargets, RandomTuplesMatchLiteralFormula) {
  std::mt19937_64 gen(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> hi(1, 30);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t h = hi(gen);
    const double g = 0.5 + 0.5 * u(gen), l = u(gen);
    std::vector<double> r(h), v(h + 1);
    for (auto& x : r) x = n(gen);
    for (auto& x : v) x = n(gen);
    auto t = mix::value_targets(r, v, g, l, h);
    for (std::size_t i = 0; i < h; ++i) EXPECT_NEAR(t[i], ref_target(r, v, g, l, i, h), 1e-12);
  }
}

TEST(ValueTargets, BatchedFormMatchesRows) {
  std::mt19937_64 gen(23);
  auto rr = random_rollout(gen, 6, 9);
  Matrix t = mix::value_targets(rr.rewards, rr.values, 0.95, 0.8);
  for (std::size_t b = 0; b < 6; ++b) {
    auto tb = mix::value_targets(row(rr.rewards, b), row(rr.values, b), 0.95, 0.8, 9);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(t(b, i), tb[i]);
  }
}

TEST(ValueTargets, LengthMismatchThrows) {
  EXPECT_THROW(mix::value_targets({1, 2}, {0, 0}, 0.9, 0.5, 2), Error);
  EXPECT_THROW(mix::value_targets(Matrix(2, 3), Matrix(2, 3), 0.9, 0.5), Error);
}

// ---- policy gradient --------------------------------------------------------

nets::SquashedGaussianPolicy linear_policy(const env::DiffEnvSpec& spec, const Matrix& W,
                                           std::uint64_t seed = 1) {
  Rng rng(seed);
  nets::PolicyOptions po;
  po.hidden = {};
  auto p = nets::make_policy(spec.obs_dim, spec.action_dim, spec.action_bound, po, rng);
  p.net.params[0] = W;
  p.net.params[1] = Matrix(1, spec.action_dim);
  return p;
}

nets::Mlp zero_value(const env::DiffEnvSpec& spec) {
  Rng rng(2);
  nets::Mlp v = mix::make_value_net(spec.obs_dim, {8}, rng);
  v.params[2] = Matrix(8, 1);
  v.params[3] = Matrix(1, 1);
  return v;
}

mix::RolloutContext deterministic_ctx(const env::DiffEnvSpec& spec) {
  mix::RolloutContext ctx;
  ctx.spec = &spec;
  ctx.world = World::kRealEnv;
  ctx.deterministic_policy = true;
  return ctx;
}

// Finite-horizon LQR oracle: for a = -K s and cost sum_t g^t (s'Qs + a'Ra),
// dC/dK = 2 sum_t g^t [(R + g B'P_{t+1} B) K - g B'P_{t+1} A] s_t s_t',
// with P_{t+1} the cost-to-go matrix of the remaining H-t-1 steps.
Eigen::MatrixXd lqr_cost_gradient(const env::LqrParams& p, const Eigen::MatrixXd& K,
                                  const std::vector<Eigen::VectorXd>& starts, std::size_t H,
                                  double g) {
  const Eigen::MatrixXd A = env::to_eigen(p.A), B = env::to_eigen(p.B), Q = env::to_eigen(p.Q),
                        R = env::to_eigen(p.R);
  const Eigen::MatrixXd Acl = A - B * K;
  std::vector<Eigen::MatrixXd> P(H + 1, Eigen::MatrixXd::Zero(2, 2));
  for (std::size_t k = H; k-- > 0;)
    P[k] = Q + K.transpose() * R * K + g * Acl.transpose() * P[k + 1] * Acl;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(K.rows(), K.cols());
  for (const auto& s0 : starts) {
    Eigen::VectorXd s = s0;
    for (std::size_t t = 0; t < H; ++t) {
      const Eigen::MatrixXd E = (R + g * B.transpose() * P[t + 1] * B) * K -
                                g * B.transpose() * P[t + 1] * A;
      grad += 2.0 * std::pow(g, double(t)) * E * s * s.transpose();
      s = Acl * s;
    }
  }
  return grad / double(starts.size());
}

TEST(PolicyGradient, LqrFixedHorizonMatchesClosedForm) {
  auto spec = env::make_env("lqr");
  const Matrix W{{-0.3}, {-0.8}};
  auto policy = linear_policy(spec, W);
  auto value = zero_value(spec);
  Matrix starts{{0.5, -0.2}, {-0.7, 0.9}, {0.1, 0.4}};
  MixConfig c;
  c.gamma = 0.95;
  for (std::size_t H : {1, 5, 20}) {
    c.h_max = H;
    auto batch = mix::policy_gradients({Method::kShac}, deterministic_ctx(spec), c, policy, value,
                                       starts, H, Rng(0));
    const auto& g = batch.estimates[0].grad;
    // Estimates are -dJ/dtheta = dC/dtheta; W = -K^T.
    Eigen::MatrixXd K = -env::to_eigen(W).transpose();
    std::vector<Eigen::VectorXd> s0;
    for (std::size_t b = 0; b < starts.rows; ++b) s0.push_back(env::to_eigen(starts).row(b));
    Eigen::MatrixXd dK = lqr_cost_gradient(*spec.lqr, K, s0, H, c.gamma);
    EXPECT_NEAR(g[0], -dK(0, 0), 1e-6) << "H=" << H;
    EXPECT_NEAR(g[1], -dK(0, 1), 1e-6) << "H=" << H;
  }
}

TEST(PolicyGradient, LqrTwoStepMatchesHandChainRule) {
  auto spec = env::make_env("lqr");
  const Matrix W{{-0.4}, {-1.1}};
  auto policy = linear_policy(spec, W);
  auto value = zero_value(spec);
  Matrix starts{{0.6, -0.3}};
  MixConfig c;
  c.gamma = 0.9;
  c.h_max = 2;
  auto g = mix::policy_gradients({Method::kShac}, deterministic_ctx(spec), c, policy, value,
                                 starts, 2, Rng(0))
               .estimates[0]
               .grad;
  // Hand BPTT with scalar action: a_t = s_t w, s_{t+1} = A s_t + B a_t.
  const Eigen::Matrix2d A = env::to_eigen(spec.lqr->A);
  const Eigen::Vector2d Bv = env::to_eigen(spec.lqr->B);
  const double R = spec.lqr->R(0, 0);
  const Eigen::Vector2d w(W(0, 0), W(1, 0));
  const Eigen::Vector2d s0(0.6, -0.3);
  const double a0 = s0.dot(w);
  const Eigen::Vector2d s1 = A * s0 + Bv * a0;
  const double a1 = s1.dot(w);
  // dC/dw = d/dw [s0's0 + R a0^2 + g (s1's1 + R a1^2)], Q = I.
  const Eigen::Vector2d da0 = s0;
  const Eigen::Matrix2d ds1 = Bv * da0.transpose();  // ds1/dw
  const Eigen::Vector2d da1 = s1 + ds1.transpose() * w;
  const Eigen::Vector2d dC = 2 * R * a0 * da0 + c.gamma * (2 * ds1.transpose() * s1 + 2 * R * a1 * da1);
  EXPECT_NEAR(g[0], dC(0), 1e-10);
  EXPECT_NEAR(g[1], dC(1), 1e-10);
  // Bias: da/db = 1.
  const Eigen::Vector2d ds1b = Bv;
  const double da1b = 1.0 + ds1b.dot(w);
  const double dCb = 2 * R * a0 + c.gamma * (2 * ds1b.dot(s1) + 2 * R * a1 * da1b);
  EXPECT_NEAR(g[2], dCb, 1e-10);
}

TEST(PolicyGradient, MixEqualsShacWhenLambdaIsOne) {
  auto spec = env::make_env("lqr");
  auto policy = linear_policy(spec, Matrix{{-0.2}, {-0.5}});
  Rng vr(4);
  auto value = mix::make_value_net(spec.obs_dim, {16}, vr);
  Matrix starts{{0.5, -0.2}, {-0.7, 0.9}};
  MixConfig c;
  c.h_max = 10;
  c.lambda_mix = 1.0;
  auto batch = mix::policy_gradients({Method::kMix, Method::kShac}, deterministic_ctx(spec), c,
                                     policy, value, starts, 10, Rng(0));
  ASSERT_EQ(batch.estimates.size(), 2u);
  for (std::size_t i = 0; i < batch.estimates[0].grad.size(); ++i)
    EXPECT_NEAR(batch.estimates[0].grad[i], batch.estimates[1].grad[i], 1e-10);
}

TEST(PolicyGradient, ZeroRewardGivesZeroGradient) {
  auto spec = env::make_env("pendulum", 0, {.noise_std = 0.05});
  spec.reward = [](Value s, Value a) { return ad::scale(ad::sum_rows(ad::concat_cols({s, a})), 0.0); };
  Rng rng(8);
  auto policy = nets::make_policy(spec.obs_dim, 1, spec.action_bound, {}, rng);
  auto value = zero_value(spec);
  for (Method m : {Method::kMix, Method::kShac}) {
    MixConfig c;
    c.h_max = 8;
    c.n_branch = 4;
    auto est = mix::policy_gradient(m, World::kRealEnv, c, spec, policy, value, nullptr, nullptr,
                                    Rng(3));
    EXPECT_EQ(est.grad.size(), policy.num_params());
    for (double g : est.grad) EXPECT_EQ(g, 0.0);
  }
}

TEST(PolicyGradient, ModelWorldNeedsBuffer) {
  auto spec = env::make_env("pendulum");
  Rng rng(8);
  auto policy = nets::make_policy(spec.obs_dim, 1, spec.action_bound, {}, rng);
  auto value = zero_value(spec);
  auto model = world::make_dynamics_model(2, 1, {16}, rng);
  world::EnvBuffer empty(10);
  MixConfig c;
  c.h_max = 4;
  c.branch_len = 4;
  EXPECT_THROW(mix::policy_gradient(Method::kMix, World::kModel, c, spec, policy, value, &model,
                                    &empty, Rng(0)),
               Error);
}

TEST(PolicyGradient, BranchStreamsAreIndependentOfBatching) {
  auto spec = env::make_env("pendulum", 0, {.noise_std = 0.1});
  Rng rng(8);
  auto policy = nets::make_policy(spec.obs_dim, 1, spec.action_bound, {}, rng);
  auto value = zero_value(spec);
  mix::RolloutContext ctx;
  ctx.spec = &spec;
  Matrix starts{{0.1, 0.0}, {1.0, -0.5}, {-2.0, 0.3}};
  Tape t1;
  auto b1 = nets::bind(policy, t1, false);
  auto all = mix::rollout(t1, b1, value, ctx, starts, 6, Rng(42));
  Tape t2;
  auto b2 = nets::bind(policy, t2, false);
  auto one = mix::rollout(t2, b2, value, ctx, kernels::row_slice(starts, 2, 3), 6, Rng(42), 2);
  for (std::size_t t = 0; t <= 6; ++t)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_EQ(all.states[t].value()(2, j), one.states[t].value()(0, j));
}

TEST(PolicyGradient, NonFiniteRolloutNamesBranch) {
  auto spec = env::make_env("lqr");
  auto policy = linear_policy(spec, Matrix{{-0.2}, {-0.5}});
  auto value = zero_value(spec);
  Matrix starts{{0.1, 0.1}, {1e200, 1e200}};
  MixConfig c;
  c.h_max = 3;
  try {
    mix::policy_gradients({Method::kShac}, deterministic_ctx(spec), c, policy, value, starts, 3,
                          Rng(0));
    FAIL() << "expected a non-finite error";
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("branch 1"), std::string::npos) << e.what();
  }
}

TEST(PolicyGradient, TargetsAreDetachedFromPolicy) {
  auto spec = env::make_env("pendulum", 0, {.noise_std = 0.05});
  Rng rng(8);
  auto policy = nets::make_policy(spec.obs_dim, 1, spec.action_bound, {}, rng);
  Rng vr(5);
  auto value = mix::make_value_net(spec.obs_dim, {16}, vr);
  mix::RolloutContext ctx;
  ctx.spec = &spec;
  MixConfig c;
  c.h_max = 5;
  Matrix starts{{0.1, 0.0}, {1.0, -0.5}};
  auto batch = mix::policy_gradients({Method::kMix}, ctx, c, policy, value, starts, 5, Rng(1));
  auto [obs, targets] = mix::value_regression_data(spec, batch, c.gamma, c.lambda_td);
  const Matrix frozen = targets;
  // Perturb theta and recompute a gradient; the frozen set must not move.
  for (auto* p : policy.param_refs())
    for (double& x : p->data) x += 0.1;
  mix::policy_gradients({Method::kMix}, ctx, c, policy, value, starts, 5, Rng(1));
  EXPECT_EQ(frozen.data, targets.data);
  // A regression loss built on the targets sends no gradient to the policy.
  Tape tape;
  auto pol = nets::bind(policy, tape, true);
  auto bundle = mix::rollout(tape, pol, value, ctx, starts, 5, Rng(1));
  Value pred = mix::state_value(value, spec, bundle.states[0]);
  Matrix y(2, 1);
  for (std::size_t b = 0; b < 2; ++b) y(b, 0) = targets(b, 0);
  Value loss = ad::mean(ad::square(ad::sub(pred, tape.constant(y))));
  auto g = ad::backward(tape, loss);
  for (const auto& m : nets::collect_grads(g, pol.all()))
    for (double x : m.data) EXPECT_EQ(x, 0.0);
}

// ---- value regression -------------------------------------------------------

Matrix random_obs(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 gen(seed);
  return testing::random_matrix(gen, n, d);
}

TEST(TrainValue, ConstantTargetsAreFit) {
  Rng rng(1);
  auto v = mix::make_value_net(3, {32, 32}, rng);
  mix::ValueConfig cfg;
  cfg.iterations = 500;
  cfg.minibatch = 64;
  cfg.learning_rate = 3e-3;
  auto opt = mix::make_value_optimizer(v, cfg);
  Matrix obs = random_obs(2, 256, 3);
  Matrix y(256, 1, 2.5);
  auto rep = mix::train_value(v, opt, obs, y, cfg, rng);
  Tape tape;
  Value pred = nets::forward(v, tape.constant(obs), tape);
  double mse = 0.0;
  for (std::size_t i = 0; i < 256; ++i) mse += std::pow(pred.value()(i, 0) - 2.5, 2) / 256;
  EXPECT_LT(mse, 1e-3);
}

TEST(TrainValue, MatchedTargetsLeaveNetNearlyUnchanged) {
  Rng rng(1);
  auto v = mix::make_value_net(3, {16}, rng);
  Matrix obs = random_obs(3, 64, 3);
  Tape tape;
  Matrix y = nets::forward(v, tape.constant(obs), tape).value();
  mix::ValueConfig cfg;
  cfg.iterations = 20;
  auto opt = mix::make_value_optimizer(v, cfg);
  const auto before = v.params;
  auto rep = mix::train_value(v, opt, obs, y, cfg, rng);
  EXPECT_LT(rep.losses.front(), 1e-20);
  for (std::size_t i = 0; i < before.size(); ++i)
    EXPECT_LT(kernels::max_abs_diff(before[i], v.params[i]), 1e-6);
}

TEST(TrainValue, SmoothedLossDecreasesOnFixedData) {
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    auto v = mix::make_value_net(3, {32, 32}, rng);
    Matrix obs = random_obs(seed + 10, 128, 3);
    Matrix y(128, 1);
    for (std::size_t i = 0; i < 128; ++i) y(i, 0) = std::sin(obs(i, 0)) + 0.5 * obs(i, 1);
    mix::ValueConfig cfg;
    cfg.iterations = 200;
    cfg.minibatch = 128;
    cfg.learning_rate = 3e-4;
    auto opt = mix::make_value_optimizer(v, cfg);
    auto rep = mix::train_value(v, opt, obs, y, cfg, rng);
    double prev = INFINITY;
    for (std::size_t w = 0; w < 20; ++w) {
      double m = 0.0;
      for (std::size_t i = 0; i < 10; ++i) m += rep.losses[w * 10 + i] / 10;
      EXPECT_LE(m, prev) << "seed " << seed << " window " << w;
      prev = m;
    }
  }
}

TEST(TrainValue, NonFiniteTargetsThrow) {
  Rng rng(1);
  auto v = mix::make_value_net(3, {8}, rng);
  mix::ValueConfig cfg;
  auto opt = mix::make_value_optimizer(v, cfg);
  Matrix y(4, 1);
  y(2, 0) = NAN;
  EXPECT_THROW(mix::train_value(v, opt, random_obs(1, 4, 3), y, cfg, rng), NonFiniteError);
}

}  // namespace
}  // namespace mbmix
