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

// Reverse-mode tape over dense matrices.
//
// Every primitive appends one node holding its forward value. Nodes are
// stored in insertion order, which is also a topological order, so the
// tape is acyclic by construction. Leaves are either variables (gradients
// requested) or constants. A node requires a gradient iff some ancestor is
// a variable; backward() skips everything else.

#ifndef MBMIX_AD_TAPE_HPP_
#define MBMIX_AD_TAPE_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mbmix/ad/matrix.hpp"

namespace mbmix::ad {

using NodeId = std::uint32_t;

enum class OpKind : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kMatmul,
  kTranspose,
  kTanh,
  kExp,
  kLog,
  kSin,
  kCos,
  kSigmoid,
  kSoftplus,
  kSqrt,
  kSquare,
  kReciprocal,
  kSum,         // all entries -> 1x1
  kSumRows,     // RxC -> Rx1
  kMean,        // all entries -> 1x1
  kConcatCols,  // n inputs with equal rows
  kSliceCols,   // columns [begin, end)
  kScale,       // x * attr.scalar
  kOffset,      // x + attr.scalar
  kBroadcast,   // 1xC -> RxC, Rx1 -> RxC, 1x1 -> RxC
  kRowNorm,     // RxC -> Rx1 Euclidean norm of each row
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kTanh: return "tanh";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSin: return "sin";
    case OpKind::kCos: return "cos";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kSquare: return "square";
    case OpKind::kReciprocal: return "reciprocal";
    case OpKind::kSum: return "sum";
    case OpKind::kSumRows: return "sum_rows";
    case OpKind::kMean: return "mean";
    case OpKind::kConcatCols: return "concat";
    case OpKind::kSliceCols: return "slice";
    case OpKind::kScale: return "scale";
    case OpKind::kOffset: return "offset";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kRowNorm: return "l2_norm";
  }
  return "?";
}

struct OpAttrs {
  double scalar = 0.0;
  std::size_t a = 0;  // slice begin / broadcast rows
  std::size_t b = 0;  // slice end / broadcast cols
};

struct Node {
  OpKind kind = OpKind::kLeaf;
  std::vector<NodeId> inputs;
  OpAttrs attrs;
  Matrix value;
  bool is_variable = false;
  bool requires_grad = false;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; the tape owns the data.
class Value {
 public:
  Value() = default;
  Value(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  NodeId id() const { return id_; }

  inline const Matrix& value() const;
  Shape shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  bool finite() const { return value().all_finite(); }
  inline bool requires_grad() const;
  // The single entry of a 1x1 value.
  double item() const {
    if (rows() != 1 || cols() != 1)
      throw ShapeError("item() on non-scalar value " + to_string(shape()));
    return value().data[0];
  }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  // log(1 + e^x) without overflow.
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

[[noreturn]] inline void shape_fail(OpKind k, const std::vector<Shape>& shapes,
                                    const std::string& why) {
  std::string msg = std::string(op_name(k)) + ": " + why + "; input shapes";
  for (const auto& s : shapes) msg += " " + to_string(s);
  throw ShapeError(msg);
}

// Forward kernel for one primitive. Validates shapes.
inline Matrix evaluate(OpKind kind, const std::vector<const Matrix*>& in,
                       const OpAttrs& attrs) {
  std::vector<Shape> shapes;
  shapes.reserve(in.size());
  for (const Matrix* m : in) shapes.push_back(m->shape());
  auto expect_arity = [&](std::size_t n) {
    if (in.size() != n)
      shape_fail(kind, shapes, "expected " + std::to_string(n) + " inputs");
  };
  auto unary = [&](auto f) {
    expect_arity(1);
    return kernels::map(*in[0], f);
  };
  auto binary_same = [&](auto f) {
    expect_arity(2);
    if (in[0]->shape() != in[1]->shape())
      shape_fail(kind, shapes, "shapes must match");
    return kernels::zip(*in[0], *in[1], f);
  };

  switch (kind) {
    case OpKind::kLeaf:
      shape_fail(kind, shapes, "leaves are not recorded as ops");
    case OpKind::kAdd:
      return binary_same([](double x, double y) { return x + y; });
    case OpKind::kSub:
      return binary_same([](double x, double y) { return x - y; });
    case OpKind::kMul:
      return binary_same([](double x, double y) { return x * y; });
    case OpKind::kMatmul:
      expect_arity(2);
      if (in[0]->cols != in[1]->rows)
        shape_fail(kind, shapes, "inner dimensions differ");
      return kernels::matmul(*in[0], *in[1]);
    case OpKind::kTranspose:
      expect_arity(1);
      return kernels::transpose(*in[0]);
    case OpKind::kTanh:
      return unary([](double x) { return std::tanh(x); });
    case OpKind::kExp:
      return unary([](double x) { return std::exp(x); });
    case OpKind::kLog:
      return unary([](double x) { return std::log(x); });
    case OpKind::kSin:
      return unary([](double x) { return std::sin(x); });
    case OpKind::kCos:
      return unary([](double x) { return std::cos(x); });
    case OpKind::kSigmoid:
      return unary([](double x) { return sigmoid(x); });
    case OpKind::kSoftplus:
      return unary([](double x) { return softplus(x); });
    case OpKind::kSqrt:
      return unary([](double x) { return std::sqrt(x); });
    case OpKind::kSquare:
      return unary([](double x) { return x * x; });
    case OpKind::kReciprocal:
      return unary([](double x) { return 1.0 / x; });
    case OpKind::kSum:
      expect_arity(1);
      return Matrix::scalar(kernels::sum(*in[0]));
    case OpKind::kMean:
      expect_arity(1);
      if (in[0]->empty()) shape_fail(kind, shapes, "mean of empty value");
      return Matrix::scalar(kernels::sum(*in[0]) /
                            static_cast<double>(in[0]->size()));
    case OpKind::kSumRows: {
      expect_arity(1);
      const Matrix& x = *in[0];
      Matrix out(x.rows, 1);
      for (std::size_t r = 0; r < x.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < x.cols; ++c) acc += x(r, c);
        out(r, 0) = acc;
      }
      return out;
    }
    case OpKind::kRowNorm: {
      expect_arity(1);
      const Matrix& x = *in[0];
      Matrix out(x.rows, 1);
      for (std::size_t r = 0; r < x.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < x.cols; ++c) acc += x(r, c) * x(r, c);
        out(r, 0) = std::sqrt(acc);
      }
      return out;
    }
    case OpKind::kConcatCols: {
      if (in.empty()) shape_fail(kind, shapes, "needs at least one input");
      const std::size_t rows = in[0]->rows;
      std::size_t cols = 0;
      for (const Matrix* m : in) {
        if (m->rows != rows) shape_fail(kind, shapes, "row counts differ");
        cols += m->cols;
      }
      Matrix out(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        std::size_t offset = 0;
        for (const Matrix* m : in) {
          for (std::size_t c = 0; c < m->cols; ++c) out(r, offset + c) = (*m)(r, c);
          offset += m->cols;
        }
      }
      return out;
    }
    case OpKind::kSliceCols:
      expect_arity(1);
      if (attrs.a >= attrs.b || attrs.b > in[0]->cols)
        shape_fail(kind, shapes,
                   "bad column range [" + std::to_string(attrs.a) + "," +
                       std::to_string(attrs.b) + ")");
      return kernels::col_slice(*in[0], attrs.a, attrs.b);
    case OpKind::kScale: {
      const double c = attrs.scalar;
      return unary([c](double x) { return x * c; });
    }
    case OpKind::kOffset: {
      const double c = attrs.scalar;
      return unary([c](double x) { return x + c; });
    }
    case OpKind::kBroadcast: {
      expect_arity(1);
      const Matrix& x = *in[0];
      const std::size_t rows = attrs.a, cols = attrs.b;
      const bool ok = (x.rows == 1 || x.rows == rows) && (x.cols == 1 || x.cols == cols);
      if (!ok)
        shape_fail(kind, shapes, "cannot broadcast to " + to_string(Shape{rows, cols}));
      Matrix out(rows, cols);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          out(r, c) = x(x.rows == 1 ? 0 : r, x.cols == 1 ? 0 : c);
      return out;
    }
  }
  shape_fail(kind, shapes, "unknown op");
}

}  // namespace detail

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A leaf whose gradient backward() reports.
  Value variable(Matrix m) { return leaf(std::move(m), true); }
  // A leaf treated as fixed data.
  Value constant(Matrix m) { return leaf(std::move(m), false); }

  Value record(OpKind kind, const std::vector<Value>& inputs, OpAttrs attrs = {}) {
    Node node;
    node.kind = kind;
    node.attrs = attrs;
    node.inputs.reserve(inputs.size());
    std::vector<const Matrix*> args;
    args.reserve(inputs.size());
    for (const Value& v : inputs) {
      if (v.tape() != this)
        throw Error(std::string(op_name(kind)) + ": input lives on another tape");
      node.inputs.push_back(v.id());
      args.push_back(&nodes_[v.id()].value);
      node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
    }
    node.value = detail::evaluate(kind, args, attrs);
    return push(std::move(node));
  }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const Node& node(Value v) const { return node(v.id()); }
  bool contains(Value v) const { return v.tape() == this && v.id() < nodes_.size(); }

  // First node whose forward value was not finite, if any.
  std::optional<NodeId> first_nonfinite() const { return first_nonfinite_; }
  void set_throw_on_nonfinite(bool on) { throw_on_nonfinite_ = on; }

  // Replaces the data held by a leaf. Call replay() to refresh dependents.
  void set_leaf(Value leaf, Matrix m) {
    Node& n = nodes_.at(leaf.id());
    if (n.kind != OpKind::kLeaf) throw Error("set_leaf on a non-leaf node");
    if (m.shape() != n.value.shape())
      throw ShapeError("set_leaf: shape " + to_string(m.shape()) + " != " +
                       to_string(n.value.shape()));
    n.value = std::move(m);
  }

  // Re-runs every recorded op in order. Returns true iff every output is
  // bit-identical to what was stored before the replay.
  bool replay() {
    bool identical = true;
    first_nonfinite_.reset();
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      Node& n = nodes_[id];
      if (n.kind == OpKind::kLeaf) continue;
      std::vector<const Matrix*> args;
      for (NodeId in : n.inputs) args.push_back(&nodes_[in].value);
      Matrix fresh = detail::evaluate(n.kind, args, n.attrs);
      identical = identical && fresh == n.value;
      n.value = std::move(fresh);
      if (!first_nonfinite_ && !n.value.all_finite()) first_nonfinite_ = id;
    }
    return identical;
  }

 private:
  Value leaf(Matrix m, bool is_variable) {
    Node node;
    node.value = std::move(m);
    node.is_variable = is_variable;
    node.requires_grad = is_variable;
    return push(std::move(node));
  }

  Value push(Node node) {
    const auto id = static_cast<NodeId>(nodes_.size());
    const bool finite = node.value.all_finite();
    const OpKind kind = node.kind;
    nodes_.push_back(std::move(node));
    if (!finite && !first_nonfinite_) {
      first_nonfinite_ = id;
      if (throw_on_nonfinite_)
        throw NonFiniteError(std::string(op_name(kind)) + " produced a non-finite value at node " +
                             std::to_string(id));
    }
    return Value(this, id);
  }

  std::vector<Node> nodes_;
  std::optional<NodeId> first_nonfinite_;
  bool throw_on_nonfinite_ = false;
};

inline const Matrix& Value::value() const { return tape_->node(id_).value; }
inline bool Value::requires_grad() const { return tape_->node(id_).requires_grad; }

// Free-function form of Tape::record.
inline Value record(Tape& tape, OpKind kind, const std::vector<Value>& inputs,
                    OpAttrs attrs = {}) {
  return tape.record(kind, inputs, attrs);
}

}  // namespace mbmix::ad

#endif  // MBMIX_AD_TAPE_HPP_
