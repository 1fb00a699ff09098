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

#ifndef MBMIX_AD_BACKWARD_HPP_
#define MBMIX_AD_BACKWARD_HPP_

#include <cmath>
#include <vector>

#include "mbmix/ad/tape.hpp"

namespace mbmix::ad {

// Cotangents produced by one backward() call, indexed by node.
// A missing entry is a zero cotangent.
class GradMap {
 public:
  GradMap() = default;
  GradMap(const Tape* tape, std::vector<Matrix> grads)
      : tape_(tape), grads_(std::move(grads)) {}

  bool contains(Value v) const {
    return v.tape() == tape_ && v.id() < grads_.size() && !grads_[v.id()].empty();
  }

  // Cotangent with the primal shape of v (zeros when absent).
  Matrix operator[](Value v) const {
    if (contains(v)) return grads_[v.id()];
    return Matrix(v.rows(), v.cols());
  }

  const Matrix* find(Value v) const { return contains(v) ? &grads_[v.id()] : nullptr; }

 private:
  const Tape* tape_ = nullptr;
  std::vector<Matrix> grads_;
};

namespace detail {

inline void accumulate(std::vector<Matrix>& grads, NodeId id, Matrix g) {
  if (grads[id].empty()) {
    grads[id] = std::move(g);
  } else {
    kernels::add_into(grads[id], g);
  }
}

inline Matrix reduce_to(const Matrix& g, std::size_t rows, std::size_t cols) {
  if (g.rows == rows && g.cols == cols) return g;
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c)
      out(rows == 1 ? 0 : r, cols == 1 ? 0 : c) += g(r, c);
  return out;
}

// Pushes the cotangent of node `id` onto its inputs.
inline void vjp(const Tape& tape, NodeId id, const Matrix& g, std::vector<Matrix>& grads) {
  const Node& n = tape.node(id);
  auto in = [&](std::size_t i) -> const Matrix& { return tape.node(n.inputs[i]).value; };
  auto wants = [&](std::size_t i) { return tape.node(n.inputs[i]).requires_grad; };
  auto push = [&](std::size_t i, Matrix m) {
    if (wants(i)) accumulate(grads, n.inputs[i], std::move(m));
  };
  const Matrix& y = n.value;

  switch (n.kind) {
    case OpKind::kLeaf:
      return;
    case OpKind::kAdd:
      push(0, g);
      push(1, g);
      return;
    case OpKind::kSub:
      push(0, g);
      if (wants(1)) push(1, kernels::map(g, [](double v) { return -v; }));
      return;
    case OpKind::kMul:
      if (wants(0)) push(0, kernels::zip(g, in(1), [](double a, double b) { return a * b; }));
      if (wants(1)) push(1, kernels::zip(g, in(0), [](double a, double b) { return a * b; }));
      return;
    case OpKind::kMatmul:
      if (wants(0)) push(0, kernels::matmul_nt(g, in(1)));
      if (wants(1)) push(1, kernels::matmul_tn(in(0), g));
      return;
    case OpKind::kTranspose:
      push(0, kernels::transpose(g));
      return;
    case OpKind::kTanh:
      push(0, kernels::zip(g, y, [](double a, double t) { return a * (1.0 - t * t); }));
      return;
    case OpKind::kExp:
      push(0, kernels::zip(g, y, [](double a, double e) { return a * e; }));
      return;
    case OpKind::kLog:
      push(0, kernels::zip(g, in(0), [](double a, double x) { return a / x; }));
      return;
    case OpKind::kSin:
      push(0, kernels::zip(g, in(0), [](double a, double x) { return a * std::cos(x); }));
      return;
    case OpKind::kCos:
      push(0, kernels::zip(g, in(0), [](double a, double x) { return -a * std::sin(x); }));
      return;
    case OpKind::kSigmoid:
      push(0, kernels::zip(g, y, [](double a, double s) { return a * s * (1.0 - s); }));
      return;
    case OpKind::kSoftplus:
      push(0, kernels::zip(g, in(0), [](double a, double x) { return a * sigmoid(x); }));
      return;
    case OpKind::kSqrt:
      // The derivative at 0 is unbounded; treat it as 0 (subgradient convention).
      push(0, kernels::zip(g, y, [](double a, double s) { return s > 0 ? 0.5 * a / s : 0.0; }));
      return;
    case OpKind::kSquare:
      push(0, kernels::zip(g, in(0), [](double a, double x) { return 2.0 * a * x; }));
      return;
    case OpKind::kReciprocal:
      push(0, kernels::zip(g, y, [](double a, double r) { return -a * r * r; }));
      return;
    case OpKind::kSum: {
      const Matrix& x = in(0);
      push(0, Matrix(x.rows, x.cols, g.data[0]));
      return;
    }
    case OpKind::kMean: {
      const Matrix& x = in(0);
      push(0, Matrix(x.rows, x.cols, g.data[0] / static_cast<double>(x.size())));
      return;
    }
    case OpKind::kSumRows: {
      const Matrix& x = in(0);
      Matrix out(x.rows, x.cols);
      for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < x.cols; ++c) out(r, c) = g(r, 0);
      push(0, std::move(out));
      return;
    }
    case OpKind::kRowNorm: {
      const Matrix& x = in(0);
      Matrix out(x.rows, x.cols);
      for (std::size_t r = 0; r < x.rows; ++r) {
        const double norm = y(r, 0);
        if (norm == 0.0) continue;
        for (std::size_t c = 0; c < x.cols; ++c) out(r, c) = g(r, 0) * x(r, c) / norm;
      }
      push(0, std::move(out));
      return;
    }
    case OpKind::kConcatCols: {
      std::size_t offset = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const std::size_t w = in(i).cols;
        if (wants(i)) push(i, kernels::col_slice(g, offset, offset + w));
        offset += w;
      }
      return;
    }
    case OpKind::kSliceCols: {
      const Matrix& x = in(0);
      Matrix out(x.rows, x.cols);
      for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = n.attrs.a; c < n.attrs.b; ++c) out(r, c) = g(r, c - n.attrs.a);
      push(0, std::move(out));
      return;
    }
    case OpKind::kScale: {
      const double c = n.attrs.scalar;
      push(0, kernels::map(g, [c](double a) { return a * c; }));
      return;
    }
    case OpKind::kOffset:
      push(0, g);
      return;
    case OpKind::kBroadcast: {
      const Matrix& x = in(0);
      push(0, reduce_to(g, x.rows, x.cols));
      return;
    }
  }
}

}  // namespace detail

// Reverse sweep from a scalar root. Cotangents accumulate additively when a
// node fans out. Only nodes that depend on a variable leaf are visited.
inline GradMap backward(const Tape& tape, Value root) {
  if (!tape.contains(root)) throw Error("backward: root does not live on this tape");
  if (root.rows() != 1 || root.cols() != 1)
    throw ShapeError("backward: root must be scalar, got " + to_string(root.shape()));
  std::vector<Matrix> grads(root.id() + 1);
  if (!tape.node(root).requires_grad) return GradMap(&tape, std::move(grads));
  grads[root.id()] = Matrix::scalar(1.0);
  for (NodeId id = root.id() + 1; id-- > 0;) {
    if (grads[id].empty()) continue;
    if (!tape.node(id).requires_grad) continue;
    // Inputs always precede `id`, so this reference stays valid.
    const Matrix& g = grads[id];
    detail::vjp(tape, id, g, grads);
  }
  return GradMap(&tape, std::move(grads));
}

}  // namespace mbmix::ad

#endif  // MBMIX_AD_BACKWARD_HPP_
