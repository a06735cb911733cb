// Copyright 2026 spoofbench authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "spoofbench/common.hpp"

#if defined(SPOOFBENCH_USE_CBLAS)
#include <cblas.h>
#endif

namespace spoofbench {

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense float32 tensor, row-major. Copies share the underlying buffer;
// operations allocate fresh outputs and never mutate published inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        buf_(std::make_shared<std::vector<float>>(static_cast<size_t>(numel_of(shape_)), 0.0f)) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, float v) {
    Tensor t(std::move(shape));
    std::fill(t.data(), t.data() + t.numel(), v);
    return t;
  }

  static Tensor from(Shape shape, std::vector<float> values) {
    if (numel_of(shape) != static_cast<int64_t>(values.size()))
      throw ShapeError("Tensor::from: " + shape_str(shape) + " does not hold " +
                       std::to_string(values.size()) + " values");
    Tensor t;
    t.shape_ = std::move(shape);
    t.buf_ = std::make_shared<std::vector<float>>(std::move(values));
    return t;
  }

  bool defined() const { return buf_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return buf_ ? static_cast<int64_t>(buf_->size()) : 0; }

  float* data() { return buf_->data(); }
  const float* data() const { return buf_->data(); }
  float& operator[](int64_t i) { return (*buf_)[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return (*buf_)[static_cast<size_t>(i)]; }

  // Shares the buffer; only the shape changes.
  Tensor reshaped(Shape shape) const {
    if (numel_of(shape) != numel())
      throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.buf_ = buf_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.buf_ = std::make_shared<std::vector<float>>(*buf_);
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    const float* p = data();
    for (int64_t i = 0; i < numel(); ++i)
      if (!std::isfinite(p[i])) return false;
    return true;
  }

  float min_value() const {
    const float* p = data();
    float m = p[0];
    for (int64_t i = 1; i < numel(); ++i) m = std::min(m, p[i]);
    return m;
  }

  float max_value() const {
    const float* p = data();
    float m = p[0];
    for (int64_t i = 1; i < numel(); ++i) m = std::max(m, p[i]);
    return m;
  }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<float>> buf_;
};

// C = alpha * op(A) * op(B) + beta * C, row-major. A is m x k after
// transposition, B is k x n, C is m x n.
inline void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
                 const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
                 int64_t ldc) {
#if defined(SPOOFBENCH_USE_CBLAS)
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb), beta,
              c, static_cast<int>(ldc));
#else
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) {
        float av = trans_a ? a[p * lda + i] : a[i * lda + p];
        float bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
        acc += static_cast<double>(av) * static_cast<double>(bv);
      }
      c[i * ldc + j] = alpha * static_cast<float>(acc) + beta * c[i * ldc + j];
    }
  }
#endif
}

}  // namespace spoofbench
