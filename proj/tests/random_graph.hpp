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

// Random compositions of primitives for gradient-check properties. The
// structure depends only on the seed, so the same graph can be rebuilt on a
// fresh tape at perturbed inputs.

#ifndef MBMIX_TESTS_RANDOM_GRAPH_HPP_
#define MBMIX_TESTS_RANDOM_GRAPH_HPP_

#include <random>
#include <vector>

#include "mbmix/ad/ad.hpp"

namespace mbmix::testing {

struct RandomGraphInputs {
  Matrix x;  // 3x4
  Matrix w;  // 4x4
};

inline RandomGraphInputs random_graph_inputs(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::normal_distribution<double> n(0.0, 0.7);
  RandomGraphInputs in{Matrix(3, 4), Matrix(4, 4)};
  for (double& v : in.x.data) v = n(rng);
  for (double& v : in.w.data) v = n(rng);
  return in;
}

// Builds a scalar function of (x, w) with `depth` random ops.
inline ad::Value random_graph(std::uint64_t seed, int depth, ad::Value x, ad::Value w) {
  using namespace mbmix::ad;
  std::mt19937_64 rng(seed);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  std::vector<Value> pool{x};
  auto any = [&] { return pool[pick(static_cast<int>(pool.size()))]; };
  Value cur = x;
  for (int d = 0; d < depth; ++d) {
    Value next;
    switch (pick(16)) {
      case 0: next = tanh(cur); break;
      case 1: next = sin(cur); break;
      case 2: next = cos(cur); break;
      case 3: next = sigmoid(cur); break;
      case 4: next = softplus(cur); break;
      case 5: next = exp(scale(tanh(cur), 0.5)); break;
      case 6: next = square(tanh(cur)); break;
      case 7: next = add(cur, any()); break;
      case 8: next = sub(cur, any()); break;
      case 9: next = mul(cur, any()); break;
      case 10: next = matmul(cur, w); break;
      case 11: next = log(offset(softplus(cur), 0.5)); break;
      case 12: next = sqrt(offset(square(cur), 1.0)); break;
      case 13: next = reciprocal(offset(square(cur), 1.0)); break;
      case 14: {
        Value left = slice_cols(cur, 0, 2), right = slice_cols(cur, 2, 4);
        next = concat_cols({right, tanh(left)});
        break;
      }
      default: {
        Value rows = broadcast(sum_rows(cur), 3, 4);
        next = add(scale(rows, 0.25), transpose(transpose(cur)));
        break;
      }
    }
    cur = next;
    pool.push_back(cur);
  }
  switch (pick(3)) {
    case 0: return sum(cur);
    case 1: return mean(mul(cur, cur));
    default: return sum(row_norm(offset(cur, 0.1)));
  }
}

}  // namespace mbmix::testing

#endif  // MBMIX_TESTS_RANDOM_GRAPH_HPP_
