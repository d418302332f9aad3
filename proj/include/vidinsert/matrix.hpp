// Copyright 2026 The vidinsert Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VIDINSERT_MATRIX_HPP_
#define VIDINSERT_MATRIX_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <span>
#include <vector>

#include "vidinsert/error.hpp"

namespace vidinsert {

// Row-major dense matrix.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) {
    return std::span<T>(data_).subspan(r * cols_, cols_);
  }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols_, cols_);
  }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool bitwise_equal(const Matrix& o) const {
    return same_shape(o) &&
           std::memcmp(data_.data(), o.data_.data(), sizeof(T) * size()) == 0;
  }
  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  // Rows [begin, begin + count) as a new matrix.
  Matrix slice_rows(std::size_t begin, std::size_t count) const {
    Matrix out(count, cols_);
    std::copy_n(data_.begin() + begin * cols_, count * cols_, out.data_.begin());
    return out;
  }
  void set_rows(std::size_t begin, const Matrix& src) {
    detail::check_axis("matrix cols", src.cols_, cols_);
    if (begin + src.rows_ > rows_) throw DimensionError("row range overflow");
    std::copy(src.data_.begin(), src.data_.end(),
              data_.begin() + begin * cols_);
  }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    for (std::size_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// out = a * b, with out zeroed first.
template <typename T>
void matmul(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out) {
  detail::check_axis("matmul inner", a.cols(), b.rows());
  if (out.rows() != a.rows() || out.cols() != b.cols()) {
    out = Matrix<T>(a.rows(), b.cols());
  } else {
    out.fill(T(0));
  }
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* o = out.data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      const T* bk = b.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * bk[j];
    }
  }
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> out;
  matmul(a, b, out);
  return out;
}

// acc += a^T * b (gradient of a weight used as x * W).
template <typename T>
void matmul_at_b_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& acc) {
  detail::check_axis("matmul rows", a.rows(), b.rows());
  detail::check_axis("acc rows", acc.rows(), a.cols());
  detail::check_axis("acc cols", acc.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const T* br = b.data() + r * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T ari = a(r, i);
      T* o = acc.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += ari * br[j];
    }
  }
}

// out = a * b^T.
template <typename T>
Matrix<T> matmul_a_bt(const Matrix<T>& a, const Matrix<T>& b) {
  detail::check_axis("matmul inner", a.cols(), b.cols());
  Matrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      T s = T(0);
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace vidinsert

#endif  // VIDINSERT_MATRIX_HPP_
