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

// Dense row-major 64-bit matrices and the kernels the tape is built on.

#ifndef MBMIX_AD_MATRIX_HPP_
#define MBMIX_AD_MATRIX_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbmix {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ")";
}

// Rank-2 array; vectors are 1xN rows, batches stack samples as rows.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
      throw ShapeError("matrix data length " + std::to_string(data.size()) +
                       " does not match shape " + to_string(Shape{r, c}));
    }
  }
  // Nested-list construction, one inner list per row.
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows = init.size();
    cols = rows ? init.begin()->size() : 0;
    data.reserve(rows * cols);
    for (const auto& row : init) {
      if (row.size() != cols) throw ShapeError("ragged matrix initializer");
      data.insert(data.end(), row.begin(), row.end());
    }
  }

  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix row(std::vector<double> v) {
    const std::size_t n = v.size();
    return Matrix(1, n, std::move(v));
  }
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  Shape shape() const { return {rows, cols}; }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Matrix& m) {
  os << "[";
  for (std::size_t r = 0; r < m.rows; ++r) {
    os << (r ? "; " : "");
    for (std::size_t c = 0; c < m.cols; ++c) os << (c ? " " : "") << m(r, c);
  }
  return os << "]";
}

namespace kernels {

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t c = 0; c < a.cols; ++c) out(c, r) = a(r, c);
  return out;
}

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* out_row = &out.data[i * n];
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.data[i * a.cols + k];
      if (aik == 0.0) continue;
      const double* b_row = &b.data[k * n];
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* a_row = &a.data[i * a.cols];
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* b_row = &b.data[j * b.cols];
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a_row[k] * b_row[k];
      out.data[i * b.rows + j] = acc;
    }
  }
  return out;
}

// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix out(a.cols, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* a_row = &a.data[k * a.cols];
    const double* b_row = &b.data[k * n];
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      double* out_row = &out.data[i * n];
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

inline void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = f(a.data[i]);
  return out;
}

template <typename F>
Matrix zip(const Matrix& a, const Matrix& b, F f) {
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    out.data[i] = f(a.data[i], b.data[i]);
  return out;
}

inline double sum(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data) acc += v;
  return acc;
}

inline double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data) acc += v * v;
  return std::sqrt(acc);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

inline Matrix row_slice(const Matrix& a, std::size_t begin, std::size_t end) {
  Matrix out(end - begin, a.cols);
  std::copy(a.data.begin() + begin * a.cols, a.data.begin() + end * a.cols,
            out.data.begin());
  return out;
}

inline Matrix col_slice(const Matrix& a, std::size_t begin, std::size_t end) {
  Matrix out(a.rows, end - begin);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = a(r, c);
  return out;
}

inline Matrix concat_rows(const std::vector<Matrix>& parts) {
  if (parts.empty()) return {};
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols != parts.front().cols)
      throw ShapeError("concat_rows: column count mismatch");
    rows += p.rows;
  }
  Matrix out(rows, parts.front().cols);
  auto it = out.data.begin();
  for (const auto& p : parts) it = std::copy(p.data.begin(), p.data.end(), it);
  return out;
}

}  // namespace kernels
}  // namespace mbmix

#endif  // MBMIX_AD_MATRIX_HPP_
