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

// Forward-mode products recorded as ordinary tape ops.
//
// jvp() walks the already-recorded segment between the inputs and the
// outputs and, for each node reachable from an input, records its tangent
// using primitive ops only (e.g. the tanh tangent is t * (1 - y^2)). The
// tangent values therefore live on the same tape and backward() can
// differentiate through them, which is what a loss on model Jacobians
// needs.

#ifndef MBMIX_AD_JVP_HPP_
#define MBMIX_AD_JVP_HPP_

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "mbmix/ad/ops.hpp"
#include "mbmix/ad/tape.hpp"

namespace mbmix::ad {

class NoTangentRuleError : public Error {
 public:
  using Error::Error;
};

namespace detail {

using Tangent = std::optional<Value>;

inline Tangent tangent_rule(Tape& tape, NodeId id, const std::vector<Tangent>& t) {
  // Copy what we need: recording below may reallocate the node storage.
  const OpKind kind = tape.node(id).kind;
  const std::vector<NodeId> inputs = tape.node(id).inputs;
  const OpAttrs attrs = tape.node(id).attrs;
  const Value y(&tape, id);
  auto x = [&](std::size_t i) { return Value(&tape, inputs[i]); };
  auto zeros_like = [&](Value v) { return tape.constant(Matrix(v.rows(), v.cols())); };
  auto first = [&]() -> Value { return *t[0]; };

  switch (kind) {
    case OpKind::kLeaf:
      return std::nullopt;
    case OpKind::kAdd:
      if (t[0] && t[1]) return add(*t[0], *t[1]);
      return t[0] ? t[0] : t[1];
    case OpKind::kSub:
      if (t[0] && t[1]) return sub(*t[0], *t[1]);
      if (t[0]) return t[0];
      return neg(*t[1]);
    case OpKind::kMul: {
      Tangent out;
      if (t[0]) out = mul(*t[0], x(1));
      if (t[1]) out = out ? add(*out, mul(x(0), *t[1])) : mul(x(0), *t[1]);
      return out;
    }
    case OpKind::kMatmul: {
      Tangent out;
      if (t[0]) out = matmul(*t[0], x(1));
      if (t[1]) out = out ? add(*out, matmul(x(0), *t[1])) : matmul(x(0), *t[1]);
      return out;
    }
    case OpKind::kTranspose:
      return transpose(first());
    case OpKind::kTanh:
      return mul(first(), offset(neg(square(y)), 1.0));
    case OpKind::kExp:
      return mul(first(), y);
    case OpKind::kLog:
      return mul(first(), reciprocal(x(0)));
    case OpKind::kSin:
      return mul(first(), cos(x(0)));
    case OpKind::kCos:
      return neg(mul(first(), sin(x(0))));
    case OpKind::kSigmoid:
      return mul(first(), mul(y, offset(neg(y), 1.0)));
    case OpKind::kSoftplus:
      return mul(first(), sigmoid(x(0)));
    case OpKind::kSqrt:
      return mul(first(), scale(reciprocal(y), 0.5));
    case OpKind::kSquare:
      return mul(first(), scale(x(0), 2.0));
    case OpKind::kReciprocal:
      return neg(mul(first(), square(y)));
    case OpKind::kSum:
      return sum(first());
    case OpKind::kSumRows:
      return sum_rows(first());
    case OpKind::kMean:
      return mean(first());
    case OpKind::kConcatCols: {
      std::vector<Value> parts;
      parts.reserve(inputs.size());
      for (std::size_t i = 0; i < inputs.size(); ++i) parts.push_back(t[i] ? *t[i] : zeros_like(x(i)));
      return concat_cols(parts);
    }
    case OpKind::kSliceCols:
      return slice_cols(first(), attrs.a, attrs.b);
    case OpKind::kScale:
      return scale(first(), attrs.scalar);
    case OpKind::kOffset:
      return first();
    case OpKind::kBroadcast:
      return broadcast(first(), attrs.a, attrs.b);
    case OpKind::kRowNorm:
      // Not differentiable at zero rows; norms only appear in losses.
      throw NoTangentRuleError(std::string("jvp: op '") + op_name(kind) +
                               "' on the path has no tangent rule");
  }
  throw NoTangentRuleError("jvp: unknown op");
}

}  // namespace detail

// Directional derivatives (d outputs / d inputs) . tangents, recorded on the
// tape. A missing tangent (nullopt) is zero. Outputs independent of every
// input get a zero constant.
inline std::vector<Value> jvp(Tape& tape, const std::vector<Value>& outputs,
                              const std::vector<Value>& inputs,
                              const std::vector<std::optional<Value>>& tangents) {
  if (inputs.size() != tangents.size())
    throw Error("jvp: " + std::to_string(inputs.size()) + " inputs but " +
                std::to_string(tangents.size()) + " tangents");
  if (outputs.empty()) return {};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!tape.contains(inputs[i])) throw Error("jvp: input is not on this tape");
    if (tangents[i] && tangents[i]->shape() != inputs[i].shape())
      throw ShapeError("jvp: tangent shape " + to_string(tangents[i]->shape()) +
                       " does not match input shape " + to_string(inputs[i].shape()));
  }
  NodeId hi = 0;
  for (const Value& o : outputs) {
    if (!tape.contains(o)) throw Error("jvp: output is not on this tape");
    hi = std::max(hi, o.id());
  }
  NodeId lo = hi + 1;
  for (const Value& v : inputs) lo = std::min(lo, v.id());

  std::vector<detail::Tangent> tan(hi + 1);
  std::vector<bool> pinned(hi + 1, false);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].id() > hi) continue;
    pinned[inputs[i].id()] = true;
    if (tangents[i]) tan[inputs[i].id()] = tangents[i];
  }

  for (NodeId id = lo; id <= hi && lo <= hi; ++id) {
    if (pinned[id]) continue;
    const std::vector<NodeId> node_inputs = tape.node(id).inputs;
    std::vector<detail::Tangent> in_t;
    in_t.reserve(node_inputs.size());
    bool any = false;
    for (NodeId in : node_inputs) {
      in_t.push_back(in >= lo ? tan[in] : std::nullopt);
      any = any || in_t.back().has_value();
    }
    if (!any) continue;
    tan[id] = detail::tangent_rule(tape, id, in_t);
  }

  std::vector<Value> out;
  out.reserve(outputs.size());
  for (const Value& o : outputs) {
    out.push_back(tan[o.id()] ? *tan[o.id()] : tape.constant(Matrix(o.rows(), o.cols())));
  }
  return out;
}

inline Value jvp(Tape& tape, Value output, const std::vector<Value>& inputs,
                 const std::vector<std::optional<Value>>& tangents) {
  return jvp(tape, std::vector<Value>{output}, inputs, tangents).front();
}

// Tangent given as one value whose columns are the inputs' columns laid side
// by side.
inline Value jvp(Tape& tape, Value output, const std::vector<Value>& inputs, Value tangent) {
  std::size_t total = 0;
  for (const Value& v : inputs) {
    if (v.rows() != tangent.rows())
      throw ShapeError("jvp: tangent rows " + std::to_string(tangent.rows()) +
                       " != input rows " + std::to_string(v.rows()));
    total += v.cols();
  }
  if (total != tangent.cols())
    throw ShapeError("jvp: tangent has " + std::to_string(tangent.cols()) +
                     " columns, inputs have " + std::to_string(total));
  std::vector<std::optional<Value>> parts;
  std::size_t offset = 0;
  for (const Value& v : inputs) {
    parts.emplace_back(inputs.size() == 1 ? tangent
                                          : slice_cols(tangent, offset, offset + v.cols()));
    offset += v.cols();
  }
  return jvp(tape, output, inputs, parts);
}

// Per-row Jacobian columns of a batched map. Row b of the inputs produces
// row b of the output; entry j of the result (shape B x n) holds column j of
// every row's n x d Jacobian, d being the total input width. One JVP per
// input column.
inline std::vector<Value> batch_jacobian_columns(Tape& tape, Value output,
                                                 const std::vector<Value>& inputs) {
  std::vector<Value> columns;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::size_t rows = inputs[i].rows(), cols = inputs[i].cols();
    for (std::size_t j = 0; j < cols; ++j) {
      Matrix basis(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) basis(r, j) = 1.0;
      std::vector<std::optional<Value>> tangents(inputs.size());
      tangents[i] = tape.constant(std::move(basis));
      columns.push_back(jvp(tape, output, inputs, tangents));
    }
  }
  return columns;
}

// n x d Jacobian of a single-row output (1 x n) w.r.t. single-row inputs,
// assembled from d basis JVPs; differentiable like any other tape value.
inline Value jacobian(Tape& tape, Value output, const std::vector<Value>& inputs) {
  if (output.rows() != 1) throw ShapeError("jacobian: output must be a single row");
  for (const Value& v : inputs)
    if (v.rows() != 1) throw ShapeError("jacobian: inputs must be single rows");
  std::vector<Value> columns = batch_jacobian_columns(tape, output, inputs);
  if (columns.empty()) throw ShapeError("jacobian: no input columns");
  for (Value& c : columns) c = transpose(c);
  return concat_cols(columns);
}

}  // namespace mbmix::ad

#endif  // MBMIX_AD_JVP_HPP_
