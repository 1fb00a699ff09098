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

#ifndef MBMIX_AD_OPS_HPP_
#define MBMIX_AD_OPS_HPP_

#include <vector>

#include "mbmix/ad/tape.hpp"

namespace mbmix::ad {

namespace detail {
inline Tape& tape_of(Value v) {
  if (!v.valid()) throw Error("operation on an unbound value");
  return *v.tape();
}
inline Value unary(OpKind k, Value x, OpAttrs attrs = {}) {
  return tape_of(x).record(k, {x}, attrs);
}
inline Value binary(OpKind k, Value x, Value y) { return tape_of(x).record(k, {x, y}); }
}  // namespace detail

inline Value add(Value x, Value y) { return detail::binary(OpKind::kAdd, x, y); }
inline Value sub(Value x, Value y) { return detail::binary(OpKind::kSub, x, y); }
inline Value mul(Value x, Value y) { return detail::binary(OpKind::kMul, x, y); }
inline Value matmul(Value x, Value y) { return detail::binary(OpKind::kMatmul, x, y); }
inline Value transpose(Value x) { return detail::unary(OpKind::kTranspose, x); }
inline Value tanh(Value x) { return detail::unary(OpKind::kTanh, x); }
inline Value exp(Value x) { return detail::unary(OpKind::kExp, x); }
inline Value log(Value x) { return detail::unary(OpKind::kLog, x); }
inline Value sin(Value x) { return detail::unary(OpKind::kSin, x); }
inline Value cos(Value x) { return detail::unary(OpKind::kCos, x); }
inline Value sigmoid(Value x) { return detail::unary(OpKind::kSigmoid, x); }
inline Value softplus(Value x) { return detail::unary(OpKind::kSoftplus, x); }
inline Value sqrt(Value x) { return detail::unary(OpKind::kSqrt, x); }
inline Value square(Value x) { return detail::unary(OpKind::kSquare, x); }
inline Value reciprocal(Value x) { return detail::unary(OpKind::kReciprocal, x); }
inline Value sum(Value x) { return detail::unary(OpKind::kSum, x); }
inline Value sum_rows(Value x) { return detail::unary(OpKind::kSumRows, x); }
inline Value mean(Value x) { return detail::unary(OpKind::kMean, x); }
inline Value row_norm(Value x) { return detail::unary(OpKind::kRowNorm, x); }
inline Value scale(Value x, double c) { return detail::unary(OpKind::kScale, x, {c, 0, 0}); }
inline Value offset(Value x, double c) { return detail::unary(OpKind::kOffset, x, {c, 0, 0}); }
inline Value neg(Value x) { return scale(x, -1.0); }

inline Value slice_cols(Value x, std::size_t begin, std::size_t end) {
  return detail::unary(OpKind::kSliceCols, x, {0.0, begin, end});
}

inline Value broadcast(Value x, std::size_t rows, std::size_t cols) {
  if (x.rows() == rows && x.cols() == cols) return x;
  return detail::unary(OpKind::kBroadcast, x, {0.0, rows, cols});
}

inline Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (parts.size() == 1) return parts.front();
  return detail::tape_of(parts.front()).record(OpKind::kConcatCols, parts);
}

// x + b with b broadcast over the leading (batch) dimension.
inline Value add_rowwise(Value x, Value b) { return add(x, broadcast(b, x.rows(), x.cols())); }
// x * b with b broadcast over rows (1xC) or columns (Rx1).
inline Value mul_broadcast(Value x, Value b) { return mul(x, broadcast(b, x.rows(), x.cols())); }

inline Value operator+(Value x, Value y) { return add(x, y); }
inline Value operator-(Value x, Value y) { return sub(x, y); }
inline Value operator*(Value x, Value y) { return mul(x, y); }
inline Value operator-(Value x) { return neg(x); }
inline Value operator*(Value x, double c) { return scale(x, c); }
inline Value operator*(double c, Value x) { return scale(x, c); }
inline Value operator+(Value x, double c) { return offset(x, c); }
inline Value operator+(double c, Value x) { return offset(x, c); }
inline Value operator-(Value x, double c) { return offset(x, -c); }
inline Value operator-(double c, Value x) { return offset(neg(x), c); }

}  // namespace mbmix::ad

#endif  // MBMIX_AD_OPS_HPP_
