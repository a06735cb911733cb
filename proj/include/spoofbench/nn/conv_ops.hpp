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
#include <cstdint>
#include <limits>
#include <vector>

#include "spoofbench/nn/autograd.hpp"

namespace spoofbench {
namespace nn {
namespace detail {

// Unpacks one sample [C, H, W] into a [C*kh*kw, oh*ow] patch matrix.
inline void im2col(const float* x, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw,
                   int64_t stride, int64_t pad_h, int64_t pad_w, int64_t oh, int64_t ow,
                   float* col) {
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t ky = 0; ky < kh; ++ky)
      for (int64_t kx = 0; kx < kw; ++kx) {
        float* row = col + ((ci * kh + ky) * kw + kx) * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * stride - pad_h + ky;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * ow, row + (oy + 1) * ow, 0.0f);
            continue;
          }
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * stride - pad_w + kx;
            row[oy * ow + ox] = (ix < 0 || ix >= w) ? 0.0f : x[(ci * h + iy) * w + ix];
          }
        }
      }
}

// Scatter-add inverse of im2col.
inline void col2im(const float* col, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw,
                   int64_t stride, int64_t pad_h, int64_t pad_w, int64_t oh, int64_t ow,
                   float* x) {
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t ky = 0; ky < kh; ++ky)
      for (int64_t kx = 0; kx < kw; ++kx) {
        const float* row = col + ((ci * kh + ky) * kw + kx) * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * stride - pad_h + ky;
          if (iy < 0 || iy >= h) continue;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * stride - pad_w + kx;
            if (ix >= 0 && ix < w) x[(ci * h + iy) * w + ix] += row[oy * ow + ox];
          }
        }
      }
}

inline int64_t conv_out_len(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace detail

// 2-D convolution with independent height/width padding, x [B,C,H,W] *
// w [O,C,kh,kw] (+ b [O]) -> [B,O,H',W']. Backward recomputes the patch
// matrix instead of caching it; that trades a second im2col pass for a much
// smaller live graph.
inline Var conv2d_hw(const Var& x, const Var& w, const Var& b, int64_t stride, int64_t pad_h,
                     int64_t pad_w) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 4 || sw.size() != 4 || sx[1] != sw[1])
    throw ShapeError("conv2d: expected x [B,C,H,W] and w [O,C,kh,kw], got " + shape_str(sx) +
                     " and " + shape_str(sw));
  const int64_t batch = sx[0], c = sx[1], h = sx[2], wd = sx[3];
  const int64_t o = sw[0], kh = sw[2], kw = sw[3];
  if (stride < 1 || pad_h < 0 || pad_w < 0) throw ShapeError("conv2d: invalid stride/pad");
  const int64_t oh = detail::conv_out_len(h, kh, stride, pad_h);
  const int64_t ow = detail::conv_out_len(wd, kw, stride, pad_w);
  if (oh < 1 || ow < 1)
    throw ShapeError("conv2d: kernel " + shape_str(sw) + " does not fit input " + shape_str(sx));
  if (b.defined() && b.shape() != Shape{o})
    throw ShapeError("conv2d: bias must be [" + std::to_string(o) + "]");

  const int64_t ckk = c * kh * kw;
  Tensor out = Tensor::zeros({batch, o, oh, ow});
  std::vector<float> col(static_cast<size_t>(ckk * oh * ow));
  for (int64_t bi = 0; bi < batch; ++bi) {
    detail::im2col(x.value().data() + bi * c * h * wd, c, h, wd, kh, kw, stride, pad_h, pad_w,
                   oh, ow, col.data());
    gemm(false, false, o, oh * ow, ckk, 1.0f, w.value().data(), ckk, col.data(), oh * ow, 0.0f,
         out.data() + bi * o * oh * ow, oh * ow);
  }
  if (b.defined()) {
    const float* pb = b.value().data();
    for (int64_t bi = 0; bi < batch; ++bi)
      for (int64_t oi = 0; oi < o; ++oi) {
        float* dst = out.data() + (bi * o + oi) * oh * ow;
        for (int64_t k = 0; k < oh * ow; ++k) dst[k] += pb[oi];
      }
  }
  return record_op(std::move(out), {x, w, b},
                   [x, w, b, batch, c, h, wd, o, kh, kw, stride, pad_h, pad_w, oh, ow,
                    ckk](Node* nd) {
    return [x, w, b, batch, c, h, wd, o, kh, kw, stride, pad_h, pad_w, oh, ow, ckk, nd]() {
      const float* gy = nd->grad.data();
      const bool need_x = x.node()->requires_grad;
      const bool need_w = w.node()->requires_grad;
      Tensor gx = need_x ? Tensor::zeros(x.shape()) : Tensor();
      Tensor gw = need_w ? Tensor::zeros(w.shape()) : Tensor();
      std::vector<float> col(static_cast<size_t>(ckk * oh * ow));
      for (int64_t bi = 0; bi < batch; ++bi) {
        const float* g = gy + bi * o * oh * ow;
        if (need_w) {
          detail::im2col(x.value().data() + bi * c * h * wd, c, h, wd, kh, kw, stride, pad_h,
                         pad_w, oh, ow, col.data());
          gemm(false, true, o, ckk, oh * ow, 1.0f, g, oh * ow, col.data(), oh * ow, 1.0f,
               gw.data(), ckk);
        }
        if (need_x) {
          gemm(true, false, ckk, oh * ow, o, 1.0f, w.value().data(), ckk, g, oh * ow, 0.0f,
               col.data(), oh * ow);
          detail::col2im(col.data(), c, h, wd, kh, kw, stride, pad_h, pad_w, oh, ow,
                         gx.data() + bi * c * h * wd);
        }
      }
      if (need_x) x.node()->accumulate(gx);
      if (need_w) w.node()->accumulate(gw);
      if (b.defined() && b.node()->requires_grad) {
        Tensor gb = Tensor::zeros({o});
        for (int64_t bi = 0; bi < batch; ++bi)
          for (int64_t oi = 0; oi < o; ++oi) {
            const float* g = gy + (bi * o + oi) * oh * ow;
            double acc = 0.0;
            for (int64_t k = 0; k < oh * ow; ++k) acc += g[k];
            gb.data()[oi] += static_cast<float>(acc);
          }
        b.node()->accumulate(gb);
      }
    };
  });
}

inline Var conv2d(const Var& x, const Var& w, const Var& b = Var(), int64_t stride = 1,
                  int64_t pad = 0) {
  return conv2d_hw(x, w, b, stride, pad, pad);
}

// 1-D convolution, x [B,C,T] * w [O,C,k] (+ b [O]) -> [B,O,T']; time padding
// only, routed through the 2-D path as a one-row image.
inline Var conv1d(const Var& x, const Var& w, const Var& b = Var(), int64_t stride = 1,
                  int64_t pad = 0) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 3 || sw.size() != 3 || sx[1] != sw[1])
    throw ShapeError("conv1d: expected x [B,C,T] and w [O,C,k], got " + shape_str(sx) + " and " +
                     shape_str(sw));
  Var x4 = reshape(x, {sx[0], sx[1], int64_t{1}, sx[2]});
  Var w4 = reshape(w, {sw[0], sw[1], int64_t{1}, sw[2]});
  Var y = conv2d_hw(x4, w4, b, stride, 0, pad);
  const Shape& sy = y.shape();
  return reshape(y, {sy[0], sy[1], sy[3]});
}

// Max pooling with optional zero-exclusion padding (padded cells never win).
inline Var maxpool2d(const Var& x, int64_t k, int64_t stride, int64_t pad = 0) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("maxpool2d: expected rank-4, got " + shape_str(s));
  if (k < 1 || stride < 1 || pad < 0 || pad >= k) throw ShapeError("maxpool2d: invalid geometry");
  const int64_t b = s[0], c = s[1], h = s[2], w = s[3];
  const int64_t oh = detail::conv_out_len(h, k, stride, pad);
  const int64_t ow = detail::conv_out_len(w, k, stride, pad);
  if (oh < 1 || ow < 1)
    throw ShapeError("maxpool2d: window does not fit input " + shape_str(s));
  Tensor out = Tensor::zeros({b, c, oh, ow});
  std::vector<int32_t> argmax(static_cast<size_t>(b * c * oh * ow));
  const float* px = x.value().data();
  for (int64_t bc = 0; bc < b * c; ++bc) {
    const float* plane = px + bc * h * w;
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        int32_t best_idx = -1;
        for (int64_t ky = 0; ky < k; ++ky) {
          const int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int64_t kx = 0; kx < k; ++kx) {
            const int64_t ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            const float v = plane[iy * w + ix];
            if (v > best) {
              best = v;
              best_idx = static_cast<int32_t>(iy * w + ix);
            }
          }
        }
        out.data()[(bc * oh + oy) * ow + ox] = best_idx < 0 ? 0.0f : best;
        argmax[static_cast<size_t>((bc * oh + oy) * ow + ox)] = best_idx;
      }
  }
  return record_op(std::move(out), {x}, [x, argmax, b, c, h, w, oh, ow](Node* nd) {
    return [x, argmax, b, c, h, w, oh, ow, nd]() {
      Tensor g = Tensor::zeros(x.shape());
      const float* gy = nd->grad.data();
      for (int64_t bc = 0; bc < b * c; ++bc)
        for (int64_t i = 0; i < oh * ow; ++i) {
          const int32_t idx = argmax[static_cast<size_t>(bc * oh * ow + i)];
          if (idx >= 0) g.data()[bc * h * w + idx] += gy[bc * oh * ow + i];
        }
      x.node()->accumulate(g);
    };
  });
}

}  // namespace nn
}  // namespace spoofbench
