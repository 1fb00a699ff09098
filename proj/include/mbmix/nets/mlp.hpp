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

// Tanh multilayer perceptrons evaluated on a tape.

#ifndef MBMIX_NETS_MLP_HPP_
#define MBMIX_NETS_MLP_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "mbmix/ad/ad.hpp"
#include "mbmix/rng.hpp"

namespace mbmix::nets {

enum class OutputTransform { kIdentity, kTanh, kSoftmax };

inline std::string to_string(OutputTransform t) {
  switch (t) {
    case OutputTransform::kIdentity: return "identity";
    case OutputTransform::kTanh: return "tanh";
    case OutputTransform::kSoftmax: return "softmax";
  }
  return "?";
}

inline OutputTransform output_transform_from_string(const std::string& s) {
  if (s == "identity") return OutputTransform::kIdentity;
  if (s == "tanh") return OutputTransform::kTanh;
  if (s == "softmax") return OutputTransform::kSoftmax;
  throw Error("unknown output transform '" + s + "'");
}

// Layer l maps width[l] -> width[l+1]; params holds W_l (in x out) then b_l
// (1 x out) for every layer. Hidden layers use tanh.
struct Mlp {
  std::vector<std::size_t> widths;
  OutputTransform output = OutputTransform::kIdentity;
  std::vector<Matrix> params;

  std::size_t num_layers() const { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
  }
  const Matrix& weight(std::size_t l) const { return params[2 * l]; }
  const Matrix& bias(std::size_t l) const { return params[2 * l + 1]; }
  Matrix& weight(std::size_t l) { return params[2 * l]; }
  Matrix& bias(std::size_t l) { return params[2 * l + 1]; }
};

// Orthogonal matrix of the given shape scaled by gain (QR of a Gaussian).
inline Matrix orthogonal_init(std::size_t rows, std::size_t cols, double gain, Rng& rng) {
  const bool tall = rows >= cols;
  const Eigen::Index n = static_cast<Eigen::Index>(tall ? rows : cols);
  const Eigen::Index k = static_cast<Eigen::Index>(tall ? cols : rows);
  Eigen::MatrixXd g(n, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Eigen::Index j = 0; j < k; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      out(i, j) = gain * (tall ? q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))
                               : q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
  return out;
}

// Orthogonal weights, zero biases; the last layer uses output_gain.
inline Mlp make_mlp(std::vector<std::size_t> widths, OutputTransform output, Rng& rng,
                    double output_gain = 1.0, double hidden_gain = 1.0) {
  if (widths.size() < 2) throw Error("make_mlp: need at least input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw Error("make_mlp: zero layer width");
  Mlp net;
  net.widths = std::move(widths);
  net.output = output;
  for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
    const bool last = l + 2 == net.widths.size();
    net.params.push_back(
        orthogonal_init(net.widths[l], net.widths[l + 1], last ? output_gain : hidden_gain, rng));
    net.params.emplace_back(1, net.widths[l + 1]);
  }
  return net;
}

// Puts parameters on the tape; trainable ones become variables.
inline std::vector<ad::Value> bind(const std::vector<Matrix>& params, ad::Tape& tape,
                                   bool trainable) {
  std::vector<ad::Value> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(trainable ? tape.variable(p) : tape.constant(p));
  return out;
}

// Gradients of bound parameters, in parameter order.
inline std::vector<Matrix> collect_grads(const ad::GradMap& grads,
                                         const std::vector<ad::Value>& bound) {
  std::vector<Matrix> out;
  out.reserve(bound.size());
  for (const auto& v : bound) out.push_back(grads[v]);
  return out;
}

inline std::vector<double> flatten(const std::vector<Matrix>& ms) {
  std::vector<double> flat;
  for (const auto& m : ms) flat.insert(flat.end(), m.data.begin(), m.data.end());
  return flat;
}

inline void unflatten(const std::vector<double>& flat, std::vector<Matrix>& ms) {
  std::size_t k = 0;
  for (auto& m : ms) {
    if (k + m.size() > flat.size()) throw ShapeError("unflatten: flat vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(k),
              flat.begin() + static_cast<std::ptrdiff_t>(k + m.size()), m.data.begin());
    k += m.size();
  }
  if (k != flat.size()) throw ShapeError("unflatten: flat vector too long");
}

inline ad::Value softmax_rows(ad::Value z) {
  using namespace ad;
  // Row max as a constant shift; softmax is invariant to it.
  const Matrix& zv = z.value();
  Matrix shift(zv.rows, 1);
  for (std::size_t r = 0; r < zv.rows; ++r) {
    double m = zv(r, 0);
    for (std::size_t c = 1; c < zv.cols; ++c) m = std::max(m, zv(r, c));
    shift(r, 0) = m;
  }
  Tape& tape = *z.tape();
  Value e = exp(sub(z, broadcast(tape.constant(std::move(shift)), zv.rows, zv.cols)));
  return mul(e, broadcast(reciprocal(sum_rows(e)), zv.rows, zv.cols));
}

// input is B x widths[0]; result is B x widths.back().
inline ad::Value forward(const Mlp& net, const std::vector<ad::Value>& bound, ad::Value input) {
  using namespace ad;
  if (input.cols() != net.input_dim())
    throw ShapeError("mlp forward: input width " + std::to_string(input.cols()) +
                     " != first layer width " + std::to_string(net.input_dim()));
  if (bound.size() != net.params.size()) throw Error("mlp forward: wrong parameter binding");
  Value h = input;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    h = add_rowwise(matmul(h, bound[2 * l]), bound[2 * l + 1]);
    if (l + 1 < net.num_layers()) h = tanh(h);
  }
  switch (net.output) {
    case OutputTransform::kIdentity: return h;
    case OutputTransform::kTanh: return tanh(h);
    case OutputTransform::kSoftmax: return softmax_rows(h);
  }
  return h;
}

// Convenience: parameters enter the tape as constants.
inline ad::Value forward(const Mlp& net, ad::Value input, ad::Tape& tape) {
  return forward(net, bind(net.params, tape, false), input);
}

}  // namespace mbmix::nets

#endif  // MBMIX_NETS_MLP_HPP_
