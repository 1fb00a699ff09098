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

// Tests for the reverse-mode tape and taped forward-mode products.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mbmix/ad/ad.hpp"
#include "random_graph.hpp"
#include "test_util.hpp"

namespace mbmix {
namespace {

using ad::Tape;
using ad::Value;
using testing::fd_gradient;
using testing::random_matrix;
using testing::relative_error;

TEST(RecordTest, MatmulShapeAlgebra) {
  Tape tape;
  Value a = tape.constant(Matrix(2, 3, 1.0));
  Value b = tape.constant(Matrix(3, 1, 2.0));
  Value c = ad::matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(c.value()(0, 0), 6.0);
  EXPECT_EQ(tape.size(), 3u);
}

TEST(RecordTest, ScalarExamples) {
  Tape tape;
  EXPECT_EQ(ad::tanh(tape.constant(Matrix::scalar(0.0))).item(), 0.0);
  EXPECT_EQ(ad::sum(tape.constant(Matrix::row({1, 2, 3}))).item(), 6.0);
}

TEST(RecordTest, ShapeMismatchNamesShapes) {
  Tape tape;
  Value a = tape.constant(Matrix(2, 3));
  Value b = tape.constant(Matrix(2, 3));
  try {
    ad::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("(2x3)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ad::add(a, tape.constant(Matrix(3, 2))), ShapeError);
  EXPECT_THROW(ad::slice_cols(a, 2, 5), ShapeError);
  EXPECT_THROW(ad::broadcast(a, 4, 3), ShapeError);
}

TEST(RecordTest, NonFiniteIsFlagged) {
  Tape tape;
  Value z = tape.constant(Matrix::scalar(0.0));
  EXPECT_FALSE(tape.first_nonfinite().has_value());
  Value bad = ad::log(z);
  ASSERT_TRUE(tape.first_nonfinite().has_value());
  EXPECT_EQ(*tape.first_nonfinite(), bad.id());
  EXPECT_FALSE(bad.finite());

  Tape strict;
  strict.set_throw_on_nonfinite(true);
  EXPECT_THROW(ad::reciprocal(strict.constant(Matrix::scalar(0.0))), NonFiniteError);
}

TEST(RecordTest, ReplayIsBitExact) {
  std::mt19937_64 rng(3);
  Tape tape;
  Value x = tape.variable(random_matrix(rng, 3, 4));
  Value w = tape.variable(random_matrix(rng, 4, 4));
  testing::random_graph(11, 8, x, w);
  EXPECT_TRUE(tape.replay());
}

TEST(BackwardTest, Square) {
  Tape tape;
  Value x = tape.variable(Matrix::scalar(3.0));
  auto grads = ad::backward(tape, ad::square(x));
  EXPECT_DOUBLE_EQ(grads[x][0], 6.0);
}

TEST(BackwardTest, TanhAtZero) {
  Tape tape;
  Value x = tape.variable(Matrix::scalar(0.0));
  auto grads = ad::backward(tape, ad::tanh(x));
  EXPECT_DOUBLE_EQ(grads[x][0], 1.0);
}

TEST(BackwardTest, Errors) {
  Tape tape, other;
  Value x = tape.variable(Matrix(1, 2, 1.0));
  EXPECT_THROW(ad::backward(tape, x), ShapeError);
  Value y = other.variable(Matrix::scalar(1.0));
  EXPECT_THROW(ad::backward(tape, ad::square(y)), Error);
}

TEST(BackwardTest, ConstantsGetNoGradient) {
  Tape tape;
  Value x = tape.variable(Matrix::scalar(2.0));
  Value c = tape.constant(Matrix::scalar(5.0));
  auto grads = ad::backward(tape, ad::mul(x, c));
  EXPECT_DOUBLE_EQ(grads[x][0], 5.0);
  EXPECT_FALSE(grads.contains(c));
  EXPECT_EQ(grads[c][0], 0.0);
}

// f(x) = sum(tanh(tanh(tanh(x W1 + b1) W2 + b2) W3 + b3))
Value three_layer_mlp(Value x, const std::vector<Value>& p) {
  using namespace ad;
  Value h = x;
  for (int l = 0; l < 3; ++l) h = tanh(add_rowwise(matmul(h, p[2 * l]), p[2 * l + 1]));
  return sum(h);
}

TEST(BackwardTest, ThreeLayerMlpMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const std::vector<std::pair<std::size_t, std::size_t>> dims{{4, 6}, {1, 6}, {6, 5},
                                                              {1, 5}, {5, 3}, {1, 3}};
  std::vector<Matrix> params;
  for (auto [r, c] : dims) params.push_back(random_matrix(rng, r, c, 0.6));
  const Matrix input = random_matrix(rng, 2, 4);

  Tape tape;
  Value x = tape.variable(input);
  std::vector<Value> p;
  for (const auto& m : params) p.push_back(tape.variable(m));
  auto grads = ad::backward(tape, three_layer_mlp(x, p));

  auto eval = [&](std::size_t which, const Matrix& m) {
    Tape t;
    std::vector<Value> q;
    for (std::size_t i = 0; i < params.size(); ++i)
      q.push_back(t.constant(i == which ? m : params[i]));
    Value xin = t.constant(which == params.size() ? m : input);
    return three_layer_mlp(xin, q).item();
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix fd = fd_gradient([&](const Matrix& m) { return eval(i, m); }, params[i]);
    EXPECT_LT(relative_error(grads[p[i]], fd), 1e-6) << "parameter " << i;
  }
  Matrix fdx = fd_gradient([&](const Matrix& m) { return eval(params.size(), m); }, input);
  EXPECT_LT(relative_error(grads[x], fdx), 1e-6);
}

TEST(BackwardTest, FanOutLinearity) {
  std::mt19937_64 rng(5);
  const Matrix xin = random_matrix(rng, 3, 4), win = random_matrix(rng, 4, 4);
  Tape once;
  Value x1 = once.variable(xin), w1 = once.variable(win);
  Matrix g1 = ad::backward(once, testing::random_graph(21, 6, x1, w1))[x1];

  Tape twice;
  Value x2 = twice.variable(xin), w2 = twice.variable(win);
  Value f = testing::random_graph(21, 6, x2, w2);
  Matrix g2 = ad::backward(twice, ad::add(f, f))[x2];
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_DOUBLE_EQ(g2[i], 2.0 * g1[i]);
}

// Property: random compositions up to depth 8 agree with central differences.
TEST(BackwardTest, RandomCompositionsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int depth = 1 + static_cast<int>(seed % 8);
    const auto in = testing::random_graph_inputs(seed);
    Tape tape;
    Value x = tape.variable(in.x), w = tape.variable(in.w);
    auto grads = ad::backward(tape, testing::random_graph(seed, depth, x, w));
    auto f = [&](const Matrix& xm, const Matrix& wm) {
      Tape t;
      return testing::random_graph(seed, depth, t.constant(xm), t.constant(wm)).item();
    };
    Matrix fdx = fd_gradient([&](const Matrix& m) { return f(m, in.w); }, in.x);
    Matrix fdw = fd_gradient([&](const Matrix& m) { return f(in.x, m); }, in.w);
    EXPECT_LT(relative_error(grads[x], fdx, 1e-8), 1e-5) << "seed " << seed;
    EXPECT_LT(relative_error(grads[w], fdw, 1e-8), 1e-5) << "seed " << seed;
  }
}

TEST(BackwardTest, Deterministic) {
  auto run = [] {
    const auto in = testing::random_graph_inputs(9);
    Tape tape;
    Value x = tape.variable(in.x), w = tape.variable(in.w);
    Value root = testing::random_graph(9, 8, x, w);
    auto g = ad::backward(tape, root);
    return std::make_tuple(root.item(), g[x], g[w], tape.size());
  };
  EXPECT_EQ(run(), run());
}

TEST(JvpTest, LinearAndIdentity) {
  Tape tape;
  const Matrix a{{1, 2}, {3, 4}, {5, 6}};
  Value x = tape.variable(Matrix::row({0.3, -0.2}));
  Value y = ad::matmul(x, tape.constant(kernels::transpose(a)));  // y = A x as rows
  Value v = tape.constant(Matrix::row({1.0, -1.0}));
  Value t = ad::jvp(tape, y, {x}, v);
  EXPECT_EQ(t.value(), (Matrix{{-1.0, -1.0, -1.0}}));

  Value ident = ad::jvp(tape, x, {x}, v);
  EXPECT_EQ(ident.value(), v.value());
}

TEST(JvpTest, TanhMlpMatchesDirectionalDifferences) {
  std::mt19937_64 rng(13);
  const Matrix w1 = random_matrix(rng, 3, 8, 0.7), w2 = random_matrix(rng, 8, 2, 0.7);
  const Matrix b1 = random_matrix(rng, 1, 8);
  const Matrix xin = random_matrix(rng, 4, 3), dir = random_matrix(rng, 4, 3);
  auto net = [&](Tape& t, Value x) {
    using namespace ad;
    return matmul(tanh(add_rowwise(matmul(x, t.constant(w1)), t.constant(b1))), t.constant(w2));
  };
  Tape tape;
  Value x = tape.variable(xin);
  Value tangent = ad::jvp(tape, net(tape, x), {x}, tape.constant(dir));
  Matrix fd = testing::fd_directional(
      [&](const Matrix& m) {
        Tape t;
        return net(t, t.constant(m)).value();
      },
      xin, dir);
  EXPECT_LT(relative_error(tangent.value(), fd), 1e-5);
}

// Property: every tangent rule agrees with directional differences.
TEST(JvpTest, RandomCompositionsMatchDirectionalDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int depth = 1 + static_cast<int>(seed % 8);
    const auto in = testing::random_graph_inputs(seed);
    std::mt19937_64 rng(seed);
    const Matrix dx = random_matrix(rng, 3, 4), dw = random_matrix(rng, 4, 4);
    Tape tape;
    Value x = tape.variable(in.x), w = tape.variable(in.w);
    Value root = testing::random_graph(seed, depth, x, w);
    Value t;
    try {
      t = ad::jvp(tape, root, {x, w}, {tape.constant(dx), tape.constant(dw)});
    } catch (const ad::NoTangentRuleError&) {
      continue;  // graph ends in an L2 norm
    }
    auto f = [&](double eps) {
      Tape u;
      Matrix xp = in.x, wp = in.w;
      for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += eps * dx[i];
      for (std::size_t i = 0; i < wp.size(); ++i) wp[i] += eps * dw[i];
      return testing::random_graph(seed, depth, u.constant(xp), u.constant(wp)).item();
    };
    const double fd = (f(1e-5) - f(-1e-5)) / 2e-5;
    EXPECT_NEAR(t.item(), fd, 1e-5 * std::max(1.0, std::abs(fd))) << "seed " << seed;
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(JvpTest, MissingTangentRuleIsAnError) {
  Tape tape;
  Value x = tape.variable(Matrix::row({1.0, 2.0}));
  Value n = ad::row_norm(x);
  EXPECT_THROW(ad::jvp(tape, n, {x}, tape.constant(Matrix::row({1.0, 0.0}))),
               ad::NoTangentRuleError);
  EXPECT_THROW(ad::jvp(tape, n, {x}, tape.constant(Matrix::row({1.0}))), ShapeError);
}

TEST(JacobianTest, LinearMapIsExact) {
  Tape tape;
  const Matrix a{{1, 2, 0.5}, {-3, 4, 2}};
  Value x = tape.variable(Matrix::row({0.1, 0.2, 0.3}));
  Value y = ad::matmul(x, tape.constant(kernels::transpose(a)));
  EXPECT_EQ(ad::jacobian(tape, y, {x}).value(), a);
}

TEST(JacobianTest, ConstantMapIsZero) {
  Tape tape;
  Value x = tape.variable(Matrix::row({0.1, 0.2}));
  Value c = ad::tanh(tape.constant(Matrix::row({1.0, 2.0, 3.0})));
  EXPECT_EQ(ad::jacobian(tape, c, {x}).value(), Matrix(3, 2));
}

TEST(JacobianTest, SplitInputsMatchConcatenatedInput) {
  std::mt19937_64 rng(17);
  const Matrix w = random_matrix(rng, 3, 2);
  Tape tape;
  Value s = tape.variable(random_matrix(rng, 1, 2));
  Value a = tape.variable(random_matrix(rng, 1, 1));
  Value y = ad::tanh(ad::matmul(ad::concat_cols({s, a}), tape.constant(w)));
  Value j = ad::jacobian(tape, y, {s, a});
  ASSERT_EQ(j.shape(), (Shape{2, 3}));
  for (std::size_t r = 0; r < 2; ++r) {
    const double d = 1.0 - y.value()[r] * y.value()[r];
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(j.value()(r, c), d * w(c, r), 1e-15);
  }
}

// d/dphi ||J_phi(x) - J*||^2 where J_phi is the Jacobian of a tanh layer.
TEST(SecondOrderTest, JacobianLossGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(19);
  const Matrix w0 = random_matrix(rng, 3, 5, 0.8), w1 = random_matrix(rng, 5, 2, 0.8);
  const Matrix xin = random_matrix(rng, 1, 3), target = random_matrix(rng, 2, 3);
  auto loss = [&](Tape& t, Value p0, Value p1) {
    using namespace ad;
    Value x = t.constant(xin);
    Value y = matmul(tanh(matmul(x, p0)), p1);
    Value diff = sub(jacobian(t, y, {x}), t.constant(target));
    return sum(square(diff));
  };
  Tape tape;
  Value p0 = tape.variable(w0), p1 = tape.variable(w1);
  auto grads = ad::backward(tape, loss(tape, p0, p1));
  Matrix fd0 = fd_gradient(
      [&](const Matrix& m) {
        Tape t;
        return loss(t, t.constant(m), t.constant(w1)).item();
      },
      w0);
  Matrix fd1 = fd_gradient(
      [&](const Matrix& m) {
        Tape t;
        return loss(t, t.constant(w0), t.constant(m)).item();
      },
      w1);
  EXPECT_LT(relative_error(grads[p0], fd0), 1e-4);
  EXPECT_LT(relative_error(grads[p1], fd1), 1e-4);
}

}  // namespace
}  // namespace mbmix
