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

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "spoofbench/common.hpp"
#include "spoofbench/tensor.hpp"

namespace spoofbench {
namespace nn {

// Gradient recording is on by default and can be suspended per thread.
inline bool& grad_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

class Node {
 public:
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::string name;  // non-empty for parameters
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void()> backprop;  // pulls this->grad into inputs' grads

  void accumulate(const Tensor& g) {
    if (!g.same_shape(value))
      throw ShapeError("gradient shape " + shape_str(g.shape()) + " does not match value " +
                       shape_str(value.shape()));
    if (!grad.defined()) grad = Tensor::zeros(value.shape());
    float* dst = grad.data();
    const float* src = g.data();
    for (int64_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
  }
  void zero_grad() {
    if (grad.defined()) std::fill(grad.data(), grad.data() + grad.numel(), 0.0f);
  }
};

using NodePtr = std::shared_ptr<Node>;

// Value-semantics handle onto a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false, std::string name = {}) {
    node_ = std::make_shared<Node>();
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->name = std::move(name);
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  // Mutates the shared node, not this handle, so it is usable on const views.
  void set_requires_grad(bool v) const { node_->requires_grad = v; }
  const std::string& name() const { return node_->name; }
  NodePtr node() const { return node_; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t numel() const { return node_->value.numel(); }
  void zero_grad() { node_->zero_grad(); }

  // Same value, no history.
  Var detached() const { return Var(node_->value, false); }

 private:
  NodePtr node_;
};

inline Var make_param(Tensor t, std::string name) { return Var(std::move(t), true, std::move(name)); }
inline Var make_const(Tensor t) { return Var(std::move(t), false); }

// Shared plumbing for every op below: construct the output node, and attach
// the backward closure only when the tape is recording. The closure factory
// receives the raw output node; closures capture input Vars by value, which
// keeps the upstream graph alive for the backward sweep.
template <typename F>
inline Var record_op(Tensor value, std::vector<Var> inputs, F&& make_backprop) {
  Var out(std::move(value));
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const Var& v : inputs)
    if (v.defined() && v.node()->requires_grad) needs = true;
  if (!needs) return out;
  out.node()->requires_grad = true;
  for (const Var& v : inputs)
    if (v.defined()) out.node()->inputs.push_back(v.node());
  out.node()->backprop = make_backprop(out.node().get());
  return out;
}

// Reverse-mode sweep from a scalar root. Iterative topological order; no
// recursion so deep graphs (long sequences) are safe.
inline void backward(const Var& root) {
  if (!root.defined()) throw Error("backward: undefined root");
  if (root.numel() != 1) throw Error("backward: root must be a scalar");
  if (!root.node()->requires_grad) throw Error("backward: root does not require grad");

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx].get();
      ++idx;
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad = Tensor::full(root.node()->value.shape(), 1.0f);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && node->grad.defined()) node->backprop();
  }
}

// ---------------------------------------------------------------------------
// Elementwise ops.
// ---------------------------------------------------------------------------

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw ShapeError(std::string(op) + ": expected matching shapes, got " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

inline Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const float* pa = a.value().data();
  const float* pb = b.value().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
  return record_op(std::move(out), {a, b}, [a, b](Node* n) {
    return [a, b, n]() {
      a.node()->accumulate(n->grad);
      b.node()->accumulate(n->grad);
    };
  });
}

inline Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const float* pa = a.value().data();
  const float* pb = b.value().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] - pb[i];
  return record_op(std::move(out), {a, b}, [a, b](Node* n) {
    return [a, b, n]() {
      a.node()->accumulate(n->grad);
      Tensor neg = Tensor::zeros(n->grad.shape());
      for (int64_t i = 0; i < neg.numel(); ++i) neg.data()[i] = -n->grad.data()[i];
      b.node()->accumulate(neg);
    };
  });
}

inline Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const float* pa = a.value().data();
  const float* pb = b.value().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
  return record_op(std::move(out), {a, b}, [a, b](Node* n) {
    return [a, b, n]() {
      Tensor ga = Tensor::zeros(n->grad.shape());
      Tensor gb = Tensor::zeros(n->grad.shape());
      const float* g = n->grad.data();
      const float* pa2 = a.value().data();
      const float* pb2 = b.value().data();
      for (int64_t i = 0; i < ga.numel(); ++i) {
        ga.data()[i] = g[i] * pb2[i];
        gb.data()[i] = g[i] * pa2[i];
      }
      a.node()->accumulate(ga);
      b.node()->accumulate(gb);
    };
  });
}

inline Var scale(const Var& a, float c) {
  Tensor out = Tensor::zeros(a.shape());
  const float* pa = a.value().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * c;
  return record_op(std::move(out), {a}, [a, c](Node* n) {
    return [a, c, n]() {
      Tensor g = Tensor::zeros(n->grad.shape());
      for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] = n->grad.data()[i] * c;
      a.node()->accumulate(g);
    };
  });
}

inline Var relu(const Var& a) {
  Tensor out = Tensor::zeros(a.shape());
  const float* pa = a.value().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] > 0.0f ? pa[i] : 0.0f;
  return record_op(std::move(out), {a}, [a](Node* n) {
    return [a, n]() {
      Tensor g = Tensor::zeros(n->grad.shape());
      const float* pa2 = a.value().data();
      for (int64_t i = 0; i < g.numel(); ++i)
        g.data()[i] = pa2[i] > 0.0f ? n->grad.data()[i] : 0.0f;
      a.node()->accumulate(g);
    };
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out = Tensor::zeros(a.shape());
  const float* pa = a.value().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i)
    po[i] = 1.0f / (1.0f + std::exp(-pa[i]));
  return record_op(std::move(out), {a}, [a](Node* n) {
    return [a, n]() {
      Tensor g = Tensor::zeros(n->grad.shape());
      const float* y = n->value.data();
      for (int64_t i = 0; i < g.numel(); ++i)
        g.data()[i] = n->grad.data()[i] * y[i] * (1.0f - y[i]);
      a.node()->accumulate(g);
    };
  });
}

inline Var tanh_op(const Var& a) {
  Tensor out = Tensor::zeros(a.shape());
  const float* pa = a.value().data();
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = std::tanh(pa[i]);
  return record_op(std::move(out), {a}, [a](Node* n) {
    return [a, n]() {
      Tensor g = Tensor::zeros(n->grad.shape());
      const float* y = n->value.data();
      for (int64_t i = 0; i < g.numel(); ++i)
        g.data()[i] = n->grad.data()[i] * (1.0f - y[i] * y[i]);
      a.node()->accumulate(g);
    };
  });
}

// Exact GELU (erf form).
inline Var gelu(const Var& a) {
  Tensor out = Tensor::zeros(a.shape());
  const float* pa = a.value().data();
  float* po = out.data();
  constexpr float kInvSqrt2 = 0.70710678118654752f;
  for (int64_t i = 0; i < out.numel(); ++i)
    po[i] = 0.5f * pa[i] * (1.0f + std::erf(pa[i] * kInvSqrt2));
  return record_op(std::move(out), {a}, [a](Node* n) {
    return [a, n]() {
      Tensor g = Tensor::zeros(n->grad.shape());
      const float* x = a.value().data();
      constexpr float kInvSqrt2 = 0.70710678118654752f;
      constexpr float kInvSqrt2Pi = 0.39894228040143268f;
      for (int64_t i = 0; i < g.numel(); ++i) {
        const float cdf = 0.5f * (1.0f + std::erf(x[i] * kInvSqrt2));
        const float pdf = kInvSqrt2Pi * std::exp(-0.5f * x[i] * x[i]);
        g.data()[i] = n->grad.data()[i] * (cdf + x[i] * pdf);
      }
      a.node()->accumulate(g);
    };
  });
}

// Max-feature-map: channels [0,k) take the elementwise max with channels
// [k,2k). Works on [B, 2k, ...] tensors.
inline Var mfm(const Var& a) {
  const Shape& s = a.shape();
  if (s.size() < 2 || s[1] % 2 != 0)
    throw ShapeError("mfm: expected [B, 2k, ...], got " + shape_str(s));
  const int64_t b = s[0], c2 = s[1], c = c2 / 2;
  int64_t inner = 1;
  for (size_t i = 2; i < s.size(); ++i) inner *= s[i];
  Shape out_shape = s;
  out_shape[1] = c;
  Tensor out = Tensor::zeros(out_shape);
  const float* pa = a.value().data();
  float* po = out.data();
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ci = 0; ci < c; ++ci)
      for (int64_t k = 0; k < inner; ++k) {
        const float lo = pa[(bi * c2 + ci) * inner + k];
        const float hi = pa[(bi * c2 + ci + c) * inner + k];
        po[(bi * c + ci) * inner + k] = lo >= hi ? lo : hi;
      }
  return record_op(std::move(out), {a}, [a, b, c, c2, inner](Node* n) {
    return [a, b, c, c2, inner, n]() {
      Tensor g = Tensor::zeros(a.shape());
      const float* pa2 = a.value().data();
      const float* gy = n->grad.data();
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t ci = 0; ci < c; ++ci)
          for (int64_t k = 0; k < inner; ++k) {
            const float lo = pa2[(bi * c2 + ci) * inner + k];
            const float hi = pa2[(bi * c2 + ci + c) * inner + k];
            const int64_t which = lo >= hi ? 0 : 1;  // ties route to the first half
            g.data()[(bi * c2 + ci + which * c) * inner + k] = gy[(bi * c + ci) * inner + k];
          }
      a.node()->accumulate(g);
    };
  });
}

// ---------------------------------------------------------------------------
// Shape ops.
// ---------------------------------------------------------------------------

inline Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().clone().reshaped(std::move(shape));
  return record_op(std::move(out), {a}, [a](Node* n) {
    return [a, n]() { a.node()->accumulate(n->grad.reshaped(a.shape())); };
  });
}

// [B, M, N] -> [B, N, M].
inline Var transpose_12(const Var& a) {
  const Shape& s = a.shape();
  if (s.size() != 3) throw ShapeError("transpose_12: expected rank-3, got " + shape_str(s));
  const int64_t b = s[0], m = s[1], n = s[2];
  Tensor out = Tensor::zeros({b, n, m});
  const float* pa = a.value().data();
  float* po = out.data();
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j)
        po[(bi * n + j) * m + i] = pa[(bi * m + i) * n + j];
  return record_op(std::move(out), {a}, [a, b, m, n](Node* nd) {
    return [a, b, m, n, nd]() {
      Tensor g = Tensor::zeros({b, m, n});
      const float* gy = nd->grad.data();
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t j = 0; j < n; ++j)
          for (int64_t i = 0; i < m; ++i)
            g.data()[(bi * m + i) * n + j] = gy[(bi * n + j) * m + i];
      a.node()->accumulate(g);
    };
  });
}

// [A, B, C, D] -> [A, C, B, D]; self-inverse.
inline Var permute_0213(const Var& x) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("permute_0213: expected rank-4, got " + shape_str(s));
  const int64_t a = s[0], b = s[1], c = s[2], d = s[3];
  Tensor out = Tensor::zeros({a, c, b, d});
  const float* px = x.value().data();
  float* po = out.data();
  for (int64_t ai = 0; ai < a; ++ai)
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t ci = 0; ci < c; ++ci)
        std::copy(px + ((ai * b + bi) * c + ci) * d, px + ((ai * b + bi) * c + ci) * d + d,
                  po + ((ai * c + ci) * b + bi) * d);
  return record_op(std::move(out), {x}, [x, a, b, c, d](Node* n) {
    return [x, a, b, c, d, n]() {
      Tensor g = Tensor::zeros({a, b, c, d});
      const float* gy = n->grad.data();
      for (int64_t ai = 0; ai < a; ++ai)
        for (int64_t ci = 0; ci < c; ++ci)
          for (int64_t bi = 0; bi < b; ++bi)
            std::copy(gy + ((ai * c + ci) * b + bi) * d, gy + ((ai * c + ci) * b + bi) * d + d,
                      g.data() + ((ai * b + bi) * c + ci) * d);
      x.node()->accumulate(g);
    };
  });
}

// Columns [start, start+len) of a [R, C] matrix.
inline Var slice_cols(const Var& a, int64_t start, int64_t len) {
  const Shape& s = a.shape();
  if (s.size() != 2) throw ShapeError("slice_cols: expected rank-2, got " + shape_str(s));
  const int64_t r = s[0], c = s[1];
  if (start < 0 || len <= 0 || start + len > c) throw ShapeError("slice_cols: range out of bounds");
  Tensor out = Tensor::zeros({r, len});
  const float* pa = a.value().data();
  float* po = out.data();
  for (int64_t i = 0; i < r; ++i)
    std::copy(pa + i * c + start, pa + i * c + start + len, po + i * len);
  return record_op(std::move(out), {a}, [a, r, c, start, len](Node* n) {
    return [a, r, c, start, len, n]() {
      Tensor g = Tensor::zeros({r, c});
      const float* gy = n->grad.data();
      for (int64_t i = 0; i < r; ++i)
        std::copy(gy + i * len, gy + (i + 1) * len, g.data() + i * c + start);
      a.node()->accumulate(g);
    };
  });
}

inline Var concat_cols(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[0] != sb[0])
    throw ShapeError("concat_cols: expected [R,*] pairs, got " + shape_str(sa) + " vs " +
                     shape_str(sb));
  const int64_t r = sa[0], ca = sa[1], cb = sb[1];
  Tensor out = Tensor::zeros({r, ca + cb});
  const float* pa = a.value().data();
  const float* pb = b.value().data();
  float* po = out.data();
  for (int64_t i = 0; i < r; ++i) {
    std::copy(pa + i * ca, pa + (i + 1) * ca, po + i * (ca + cb));
    std::copy(pb + i * cb, pb + (i + 1) * cb, po + i * (ca + cb) + ca);
  }
  return record_op(std::move(out), {a, b}, [a, b, r, ca, cb](Node* n) {
    return [a, b, r, ca, cb, n]() {
      Tensor ga = Tensor::zeros({r, ca});
      Tensor gb = Tensor::zeros({r, cb});
      const float* gy = n->grad.data();
      for (int64_t i = 0; i < r; ++i) {
        std::copy(gy + i * (ca + cb), gy + i * (ca + cb) + ca, ga.data() + i * ca);
        std::copy(gy + i * (ca + cb) + ca, gy + (i + 1) * (ca + cb), gb.data() + i * cb);
      }
      a.node()->accumulate(ga);
      b.node()->accumulate(gb);
    };
  });
}

// Token t of a [B, T, D] sequence.
inline Var select_token(const Var& a, int64_t t) {
  const Shape& s = a.shape();
  if (s.size() != 3) throw ShapeError("select_token: expected rank-3, got " + shape_str(s));
  const int64_t b = s[0], tt = s[1], d = s[2];
  if (t < 0 || t >= tt) throw ShapeError("select_token: index out of range");
  Tensor out = Tensor::zeros({b, d});
  const float* pa = a.value().data();
  for (int64_t bi = 0; bi < b; ++bi)
    std::copy(pa + (bi * tt + t) * d, pa + (bi * tt + t) * d + d, out.data() + bi * d);
  return record_op(std::move(out), {a}, [a, b, tt, d, t](Node* n) {
    return [a, b, tt, d, t, n]() {
      Tensor g = Tensor::zeros({b, tt, d});
      const float* gy = n->grad.data();
      for (int64_t bi = 0; bi < b; ++bi)
        std::copy(gy + bi * d, gy + (bi + 1) * d, g.data() + (bi * tt + t) * d);
      a.node()->accumulate(g);
    };
  });
}

// Prepends a learned token to every sequence in the batch.
inline Var prepend_token(const Var& x, const Var& token) {
  const Shape& s = x.shape();
  if (s.size() != 3 || token.shape().size() != 1 || token.shape()[0] != s[2])
    throw ShapeError("prepend_token: expected x [B,T,D] and token [D], got " + shape_str(s) +
                     " and " + shape_str(token.shape()));
  const int64_t b = s[0], t = s[1], d = s[2];
  Tensor out = Tensor::zeros({b, t + 1, d});
  const float* px = x.value().data();
  const float* pt = token.value().data();
  for (int64_t bi = 0; bi < b; ++bi) {
    std::copy(pt, pt + d, out.data() + bi * (t + 1) * d);
    std::copy(px + bi * t * d, px + (bi + 1) * t * d, out.data() + (bi * (t + 1) + 1) * d);
  }
  return record_op(std::move(out), {x, token}, [x, token, b, t, d](Node* n) {
    return [x, token, b, t, d, n]() {
      Tensor gx = Tensor::zeros({b, t, d});
      Tensor gt = Tensor::zeros({d});
      const float* gy = n->grad.data();
      for (int64_t bi = 0; bi < b; ++bi) {
        for (int64_t k = 0; k < d; ++k) gt.data()[k] += gy[bi * (t + 1) * d + k];
        std::copy(gy + (bi * (t + 1) + 1) * d, gy + (bi + 1) * (t + 1) * d,
                  gx.data() + bi * t * d);
      }
      x.node()->accumulate(gx);
      token.node()->accumulate(gt);
    };
  });
}

// x [B, T, D] + p [T, D], broadcast over the batch.
inline Var add_positional(const Var& x, const Var& p) {
  const Shape& s = x.shape();
  if (s.size() != 3 || p.shape() != Shape{s[1], s[2]})
    throw ShapeError("add_positional: expected x [B,T,D] and p [T,D], got " + shape_str(s) +
                     " and " + shape_str(p.shape()));
  const int64_t b = s[0], td = s[1] * s[2];
  Tensor out = Tensor::zeros(s);
  const float* px = x.value().data();
  const float* pp = p.value().data();
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t i = 0; i < td; ++i) out.data()[bi * td + i] = px[bi * td + i] + pp[i];
  return record_op(std::move(out), {x, p}, [x, p, b, td](Node* n) {
    return [x, p, b, td, n]() {
      x.node()->accumulate(n->grad);
      Tensor gp = Tensor::zeros(p.shape());
      const float* gy = n->grad.data();
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t i = 0; i < td; ++i) gp.data()[i] += gy[bi * td + i];
      p.node()->accumulate(gp);
    };
  });
}

// ---------------------------------------------------------------------------
// Linear algebra.
// ---------------------------------------------------------------------------

// x [N, in] * w^T [in, out] + b -> [N, out].
inline Var linear(const Var& x, const Var& w, const Var& b = Var()) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 2 || sw.size() != 2 || sx[1] != sw[1])
    throw ShapeError("linear: expected x [N,in] and w [out,in], got " + shape_str(sx) + " and " +
                     shape_str(sw));
  const int64_t n = sx[0], in = sx[1], out_dim = sw[0];
  if (b.defined() && b.shape() != Shape{out_dim})
    throw ShapeError("linear: bias shape " + shape_str(b.shape()) + " does not match out " +
                     std::to_string(out_dim));
  Tensor out = Tensor::zeros({n, out_dim});
  gemm(false, true, n, out_dim, in, 1.0f, x.value().data(), in, w.value().data(), in, 0.0f,
       out.data(), out_dim);
  if (b.defined()) {
    const float* pb = b.value().data();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < out_dim; ++j) out.data()[i * out_dim + j] += pb[j];
  }
  return record_op(std::move(out), {x, w, b}, [x, w, b, n, in, out_dim](Node* nd) {
    return [x, w, b, n, in, out_dim, nd]() {
      const float* gy = nd->grad.data();
      if (x.node()->requires_grad) {
        Tensor gx = Tensor::zeros({n, in});
        gemm(false, false, n, in, out_dim, 1.0f, gy, out_dim, w.value().data(), in, 0.0f,
             gx.data(), in);
        x.node()->accumulate(gx);
      }
      if (w.node()->requires_grad) {
        Tensor gw = Tensor::zeros({out_dim, in});
        gemm(true, false, out_dim, in, n, 1.0f, gy, out_dim, x.value().data(), in, 0.0f,
             gw.data(), in);
        w.node()->accumulate(gw);
      }
      if (b.defined() && b.node()->requires_grad) {
        Tensor gb = Tensor::zeros({out_dim});
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < out_dim; ++j) gb.data()[j] += gy[i * out_dim + j];
        b.node()->accumulate(gb);
      }
    };
  });
}

// Batched matmul with optional transposes: [B, m, k] x [B, k, n] -> [B, m, n].
inline Var bmm(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0])
    throw ShapeError("bmm: expected matching rank-3 batches, got " + shape_str(sa) + " vs " +
                     shape_str(sb));
  const int64_t batch = sa[0];
  const int64_t m = trans_a ? sa[2] : sa[1];
  const int64_t ka = trans_a ? sa[1] : sa[2];
  const int64_t kb = trans_b ? sb[2] : sb[1];
  const int64_t n = trans_b ? sb[1] : sb[2];
  if (ka != kb)
    throw ShapeError("bmm: inner dims disagree, " + shape_str(sa) + " vs " + shape_str(sb));
  const int64_t lda = sa[2], ldb = sb[2];
  Tensor out = Tensor::zeros({batch, m, n});
  for (int64_t bi = 0; bi < batch; ++bi)
    gemm(trans_a, trans_b, m, n, ka, 1.0f, a.value().data() + bi * sa[1] * sa[2], lda,
         b.value().data() + bi * sb[1] * sb[2], ldb, 0.0f, out.data() + bi * m * n, n);
  return record_op(std::move(out), {a, b},
                   [a, b, batch, m, n, ka, trans_a, trans_b](Node* nd) {
    return [a, b, batch, m, n, ka, trans_a, trans_b, nd]() {
      const Shape& sa2 = a.shape();
      const Shape& sb2 = b.shape();
      const float* gy = nd->grad.data();
      if (a.node()->requires_grad) {
        Tensor ga = Tensor::zeros(sa2);
        for (int64_t bi = 0; bi < batch; ++bi) {
          const float* g = gy + bi * m * n;
          const float* pb = b.value().data() + bi * sb2[1] * sb2[2];
          float* pa = ga.data() + bi * sa2[1] * sa2[2];
          if (!trans_a) {
            // dA = dY * B^T (or dY * B when B was transposed)
            gemm(false, !trans_b, m, ka, n, 1.0f, g, n, pb, sb2[2], 0.0f, pa, sa2[2]);
          } else {
            // A was transposed: dA = (B * dY^T) arranged as [k, m] -> stored [sa1, sa2]
            gemm(trans_b, true, ka, m, n, 1.0f, pb, sb2[2], g, n, 0.0f, pa, sa2[2]);
          }
        }
        a.node()->accumulate(ga);
      }
      if (b.node()->requires_grad) {
        Tensor gb = Tensor::zeros(sb2);
        for (int64_t bi = 0; bi < batch; ++bi) {
          const float* g = gy + bi * m * n;
          const float* pa = a.value().data() + bi * sa2[1] * sa2[2];
          float* pbo = gb.data() + bi * sb2[1] * sb2[2];
          if (!trans_b) {
            gemm(!trans_a, false, ka, n, m, 1.0f, pa, sa2[2], g, n, 0.0f, pbo, sb2[2]);
          } else {
            gemm(true, trans_a, n, ka, m, 1.0f, g, n, pa, sa2[2], 0.0f, pbo, sb2[2]);
          }
        }
        b.node()->accumulate(gb);
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Reductions and normalizations.
// ---------------------------------------------------------------------------

inline Var mean_all(const Var& a) {
  const int64_t n = a.numel();
  Tensor out = Tensor::zeros({1});
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += a.value().data()[i];
  out.data()[0] = static_cast<float>(acc / static_cast<double>(n));
  return record_op(std::move(out), {a}, [a, n](Node* nd) {
    return [a, n, nd]() {
      Tensor g = Tensor::full(a.shape(), nd->grad.data()[0] / static_cast<float>(n));
      a.node()->accumulate(g);
    };
  });
}

// Global average pool: [B, C, H, W] -> [B, C].
inline Var mean_hw(const Var& a) {
  const Shape& s = a.shape();
  if (s.size() != 4) throw ShapeError("mean_hw: expected rank-4, got " + shape_str(s));
  const int64_t b = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out = Tensor::zeros({b, c});
  const float* pa = a.value().data();
  for (int64_t i = 0; i < b * c; ++i) {
    double acc = 0.0;
    for (int64_t k = 0; k < hw; ++k) acc += pa[i * hw + k];
    out.data()[i] = static_cast<float>(acc / static_cast<double>(hw));
  }
  return record_op(std::move(out), {a}, [a, b, c, hw](Node* nd) {
    return [a, b, c, hw, nd]() {
      Tensor g = Tensor::zeros(a.shape());
      const float* gy = nd->grad.data();
      for (int64_t i = 0; i < b * c; ++i) {
        const float v = gy[i] / static_cast<float>(hw);
        for (int64_t k = 0; k < hw; ++k) g.data()[i * hw + k] = v;
      }
      a.node()->accumulate(g);
    };
  });
}

// Mean over the height axis: [B, C, H, W] -> [B, C, W].
inline Var mean_height(const Var& a) {
  const Shape& s = a.shape();
  if (s.size() != 4) throw ShapeError("mean_height: expected rank-4, got " + shape_str(s));
  const int64_t b = s[0], c = s[1], h = s[2], w = s[3];
  Tensor out = Tensor::zeros({b, c, w});
  const float* pa = a.value().data();
  for (int64_t bc = 0; bc < b * c; ++bc)
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int64_t y = 0; y < h; ++y) acc += pa[(bc * h + y) * w + x];
      out.data()[bc * w + x] = static_cast<float>(acc / static_cast<double>(h));
    }
  return record_op(std::move(out), {a}, [a, b, c, h, w](Node* nd) {
    return [a, b, c, h, w, nd]() {
      Tensor g = Tensor::zeros(a.shape());
      const float* gy = nd->grad.data();
      for (int64_t bc = 0; bc < b * c; ++bc)
        for (int64_t x = 0; x < w; ++x) {
          const float v = gy[bc * w + x] / static_cast<float>(h);
          for (int64_t y = 0; y < h; ++y) g.data()[(bc * h + y) * w + x] = v;
        }
      a.node()->accumulate(g);
    };
  });
}

// Row-wise softmax on [N, T].
inline Var softmax_rows(const Var& a) {
  const Shape& s = a.shape();
  if (s.size() != 2) throw ShapeError("softmax_rows: expected rank-2, got " + shape_str(s));
  const int64_t n = s[0], t = s[1];
  Tensor out = Tensor::zeros(s);
  const float* pa = a.value().data();
  for (int64_t i = 0; i < n; ++i) {
    float mx = pa[i * t];
    for (int64_t j = 1; j < t; ++j) mx = std::max(mx, pa[i * t + j]);
    double denom = 0.0;
    for (int64_t j = 0; j < t; ++j) denom += std::exp(static_cast<double>(pa[i * t + j] - mx));
    for (int64_t j = 0; j < t; ++j)
      out.data()[i * t + j] =
          static_cast<float>(std::exp(static_cast<double>(pa[i * t + j] - mx)) / denom);
  }
  return record_op(std::move(out), {a}, [a, n, t](Node* nd) {
    return [a, n, t, nd]() {
      Tensor g = Tensor::zeros(a.shape());
      const float* y = nd->value.data();
      const float* gy = nd->grad.data();
      for (int64_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int64_t j = 0; j < t; ++j) dot += static_cast<double>(gy[i * t + j]) * y[i * t + j];
        for (int64_t j = 0; j < t; ++j)
          g.data()[i * t + j] = y[i * t + j] * (gy[i * t + j] - static_cast<float>(dot));
      }
      a.node()->accumulate(g);
    };
  });
}

// Layer normalization over the last dimension of [N, D].
inline Var layer_norm(const Var& x, const Var& gamma, const Var& beta, float eps = 1e-5f) {
  const Shape& s = x.shape();
  if (s.size() != 2) throw ShapeError("layer_norm: expected rank-2, got " + shape_str(s));
  const int64_t n = s[0], d = s[1];
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
    throw ShapeError("layer_norm: gamma/beta must be [D]");
  Tensor out = Tensor::zeros(s);
  Tensor xhat = Tensor::zeros(s);
  Tensor inv_std = Tensor::zeros({n});
  const float* px = x.value().data();
  const float* pg = gamma.value().data();
  const float* pb = beta.value().data();
  for (int64_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += px[i * d + j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double c = px[i * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const float istd = static_cast<float>(1.0 / std::sqrt(var + eps));
    inv_std.data()[i] = istd;
    for (int64_t j = 0; j < d; ++j) {
      const float xh = (px[i * d + j] - static_cast<float>(mean)) * istd;
      xhat.data()[i * d + j] = xh;
      out.data()[i * d + j] = xh * pg[j] + pb[j];
    }
  }
  return record_op(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, xhat, inv_std, n, d](Node* nd) {
    return [x, gamma, beta, xhat, inv_std, n, d, nd]() {
      const float* gy = nd->grad.data();
      const float* xh = xhat.data();
      const float* pg = gamma.value().data();
      if (gamma.node()->requires_grad || beta.node()->requires_grad) {
        Tensor ggamma = Tensor::zeros({d});
        Tensor gbeta = Tensor::zeros({d});
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < d; ++j) {
            ggamma.data()[j] += gy[i * d + j] * xh[i * d + j];
            gbeta.data()[j] += gy[i * d + j];
          }
        if (gamma.node()->requires_grad) gamma.node()->accumulate(ggamma);
        if (beta.node()->requires_grad) beta.node()->accumulate(gbeta);
      }
      if (x.node()->requires_grad) {
        Tensor gx = Tensor::zeros({n, d});
        for (int64_t i = 0; i < n; ++i) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            const double gj = static_cast<double>(gy[i * d + j]) * pg[j];
            sum_g += gj;
            sum_gx += gj * xh[i * d + j];
          }
          sum_g /= static_cast<double>(d);
          sum_gx /= static_cast<double>(d);
          const float istd = inv_std.data()[i];
          for (int64_t j = 0; j < d; ++j) {
            const double gj = static_cast<double>(gy[i * d + j]) * pg[j];
            gx.data()[i * d + j] =
                static_cast<float>((gj - sum_g - xh[i * d + j] * sum_gx) * istd);
          }
        }
        x.node()->accumulate(gx);
      }
    };
  });
}

// Batch normalization over (B, H, W) per channel, batch statistics. The
// caller harvests batch_mean/batch_var for running-stat updates.
inline Var batch_norm2d_train(const Var& x, const Var& gamma, const Var& beta,
                              Tensor* batch_mean_out, Tensor* batch_var_out, float eps = 1e-5f) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("batch_norm2d: expected rank-4, got " + shape_str(s));
  const int64_t b = s[0], c = s[1], hw = s[2] * s[3];
  const int64_t m = b * hw;  // reduction size per channel
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
    throw ShapeError("batch_norm2d: gamma/beta must be [C]");

  Tensor mean = Tensor::zeros({c}), var = Tensor::zeros({c}), inv_std = Tensor::zeros({c});
  const float* px = x.value().data();
  for (int64_t ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t k = 0; k < hw; ++k) acc += px[(bi * c + ci) * hw + k];
    mean.data()[ci] = static_cast<float>(acc / static_cast<double>(m));
  }
  for (int64_t ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    const double mu = mean.data()[ci];
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t k = 0; k < hw; ++k) {
        const double d = px[(bi * c + ci) * hw + k] - mu;
        acc += d * d;
      }
    var.data()[ci] = static_cast<float>(acc / static_cast<double>(m));
    inv_std.data()[ci] = static_cast<float>(1.0 / std::sqrt(var.data()[ci] + eps));
  }
  if (batch_mean_out) *batch_mean_out = mean;
  if (batch_var_out) *batch_var_out = var;

  Tensor out = Tensor::zeros(s);
  Tensor xhat = Tensor::zeros(s);
  const float* pg = gamma.value().data();
  const float* pb = beta.value().data();
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ci = 0; ci < c; ++ci)
      for (int64_t k = 0; k < hw; ++k) {
        const int64_t idx = (bi * c + ci) * hw + k;
        const float xh = (px[idx] - mean.data()[ci]) * inv_std.data()[ci];
        xhat.data()[idx] = xh;
        out.data()[idx] = xh * pg[ci] + pb[ci];
      }
  return record_op(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, xhat, inv_std, b, c, hw, m](Node* nd) {
    return [x, gamma, beta, xhat, inv_std, b, c, hw, m, nd]() {
      const float* gy = nd->grad.data();
      const float* xh = xhat.data();
      const float* pg = gamma.value().data();
      Tensor ggamma = Tensor::zeros({c});
      Tensor gbeta = Tensor::zeros({c});
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t ci = 0; ci < c; ++ci)
          for (int64_t k = 0; k < hw; ++k) {
            const int64_t idx = (bi * c + ci) * hw + k;
            ggamma.data()[ci] += gy[idx] * xh[idx];
            gbeta.data()[ci] += gy[idx];
          }
      if (gamma.node()->requires_grad) gamma.node()->accumulate(ggamma);
      if (beta.node()->requires_grad) beta.node()->accumulate(gbeta);
      if (x.node()->requires_grad) {
        Tensor gx = Tensor::zeros(x.shape());
        for (int64_t ci = 0; ci < c; ++ci) {
          const double mean_g = gbeta.data()[ci] / static_cast<double>(m);
          const double mean_gx = ggamma.data()[ci] / static_cast<double>(m);
          const double scale = static_cast<double>(pg[ci]) * inv_std.data()[ci];
          for (int64_t bi = 0; bi < b; ++bi)
            for (int64_t k = 0; k < hw; ++k) {
              const int64_t idx = (bi * c + ci) * hw + k;
              gx.data()[idx] = static_cast<float>(
                  scale * (gy[idx] - mean_g - xh[idx] * mean_gx));
            }
        }
        x.node()->accumulate(gx);
      }
    };
  });
}

// Evaluation-mode batch norm: a per-channel affine map using running stats.
inline Var batch_norm2d_eval(const Var& x, const Var& gamma, const Var& beta,
                             const Tensor& running_mean, const Tensor& running_var,
                             float eps = 1e-5f) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("batch_norm2d: expected rank-4, got " + shape_str(s));
  const int64_t b = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out = Tensor::zeros(s);
  Tensor inv_std = Tensor::zeros({c});
  for (int64_t ci = 0; ci < c; ++ci)
    inv_std.data()[ci] = static_cast<float>(1.0 / std::sqrt(running_var.data()[ci] + eps));
  const float* px = x.value().data();
  const float* pg = gamma.value().data();
  const float* pb = beta.value().data();
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ci = 0; ci < c; ++ci) {
      const float a = pg[ci] * inv_std.data()[ci];
      const float o = pb[ci] - a * running_mean.data()[ci];
      for (int64_t k = 0; k < hw; ++k) {
        const int64_t idx = (bi * c + ci) * hw + k;
        out.data()[idx] = a * px[idx] + o;
      }
    }
  return record_op(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, inv_std, running_mean, b, c, hw](Node* nd) {
    return [x, gamma, beta, inv_std, running_mean, b, c, hw, nd]() {
      const float* gy = nd->grad.data();
      const float* px2 = x.value().data();
      const float* pg = gamma.value().data();
      if (x.node()->requires_grad) {
        Tensor gx = Tensor::zeros(x.shape());
        for (int64_t bi = 0; bi < b; ++bi)
          for (int64_t ci = 0; ci < c; ++ci) {
            const float a = pg[ci] * inv_std.data()[ci];
            for (int64_t k = 0; k < hw; ++k) {
              const int64_t idx = (bi * c + ci) * hw + k;
              gx.data()[idx] = gy[idx] * a;
            }
          }
        x.node()->accumulate(gx);
      }
      if (gamma.node()->requires_grad || beta.node()->requires_grad) {
        Tensor ggamma = Tensor::zeros({c});
        Tensor gbeta = Tensor::zeros({c});
        for (int64_t bi = 0; bi < b; ++bi)
          for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t k = 0; k < hw; ++k) {
              const int64_t idx = (bi * c + ci) * hw + k;
              const float xh = (px2[idx] - running_mean.data()[ci]) * inv_std.data()[ci];
              ggamma.data()[ci] += gy[idx] * xh;
              gbeta.data()[ci] += gy[idx];
            }
        if (gamma.node()->requires_grad) gamma.node()->accumulate(ggamma);
        if (beta.node()->requires_grad) beta.node()->accumulate(gbeta);
      }
    };
  });
}

// ---------------------------------------------------------------------------
// Losses (fused, scalar output).
// ---------------------------------------------------------------------------

// Mean softmax cross-entropy over [B, C] logits with integer labels.
inline Var cross_entropy_loss(const Var& logits, const std::vector<int>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw ShapeError("cross_entropy: expected [B,C], got " + shape_str(s));
  const int64_t b = s[0], c = s[1];
  if (static_cast<int64_t>(labels.size()) != b)
    throw ShapeError("cross_entropy: label count " + std::to_string(labels.size()) +
                     " does not match batch " + std::to_string(b));
  for (int l : labels)
    if (l < 0 || l >= c) throw Error("cross_entropy: label out of range");

  Tensor probs = Tensor::zeros(s);
  const float* pl = logits.value().data();
  double loss = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    float mx = pl[i * c];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, pl[i * c + j]);
    double denom = 0.0;
    for (int64_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(pl[i * c + j] - mx));
    for (int64_t j = 0; j < c; ++j)
      probs.data()[i * c + j] =
          static_cast<float>(std::exp(static_cast<double>(pl[i * c + j] - mx)) / denom);
    loss -= std::log(std::max(1e-30, static_cast<double>(probs.data()[i * c + labels[static_cast<size_t>(i)]])));
  }
  Tensor out = Tensor::zeros({1});
  out.data()[0] = static_cast<float>(loss / static_cast<double>(b));
  return record_op(std::move(out), {logits}, [logits, probs, labels, b, c](Node* nd) {
    return [logits, probs, labels, b, c, nd]() {
      Tensor g = Tensor::zeros(logits.shape());
      const float gscale = nd->grad.data()[0] / static_cast<float>(b);
      for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < c; ++j) {
          const float onehot = labels[static_cast<size_t>(i)] == j ? 1.0f : 0.0f;
          g.data()[i * c + j] = gscale * (probs.data()[i * c + j] - onehot);
        }
      logits.node()->accumulate(g);
    };
  });
}

// Mean binary cross-entropy with logits on a single-logit head; each sample's
// term is multiplied by its class weight (1, 1 for the unweighted case).
inline Var bce_logits_loss(const Var& logits, const std::vector<int>& labels, double w_real = 1.0,
                           double w_fake = 1.0) {
  const Shape& s = logits.shape();
  const int64_t b = s[0];
  if (!((s.size() == 2 && s[1] == 1) || s.size() == 1))
    throw ShapeError("bce: expected [B,1] or [B] logits, got " + shape_str(s));
  if (static_cast<int64_t>(labels.size()) != b)
    throw ShapeError("bce: label count " + std::to_string(labels.size()) +
                     " does not match batch " + std::to_string(b));
  if (w_real <= 0.0 || w_fake <= 0.0) throw Error("bce: class weights must be positive");

  const float* pl = logits.value().data();
  double loss = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    const double z = pl[i];
    const double y = labels[static_cast<size_t>(i)];
    const double w = labels[static_cast<size_t>(i)] == 1 ? w_fake : w_real;
    // softplus(z) - y*z, computed stably.
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += w * (softplus - y * z);
  }
  Tensor out = Tensor::zeros({1});
  out.data()[0] = static_cast<float>(loss / static_cast<double>(b));
  return record_op(std::move(out), {logits}, [logits, labels, b, w_real, w_fake](Node* nd) {
    return [logits, labels, b, w_real, w_fake, nd]() {
      Tensor g = Tensor::zeros(logits.shape());
      const float* pl2 = logits.value().data();
      const float gscale = nd->grad.data()[0] / static_cast<float>(b);
      for (int64_t i = 0; i < b; ++i) {
        const double sig = 1.0 / (1.0 + std::exp(-static_cast<double>(pl2[i])));
        const double y = labels[static_cast<size_t>(i)];
        const double w = labels[static_cast<size_t>(i)] == 1 ? w_fake : w_real;
        g.data()[i] = gscale * static_cast<float>(w * (sig - y));
      }
      logits.node()->accumulate(g);
    };
  });
}

}  // namespace nn
}  // namespace spoofbench
