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

#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "spoofbench/nn/autograd.hpp"
#include "spoofbench/nn/conv_ops.hpp"

namespace spoofbench {
namespace nn {

enum class Init {
  kZeros,
  kOnes,
  kUniform,      // U(a, b)
  kNormal,       // N(a, b^2)
  kKaimingConv,  // N(0, sqrt(2 / fan_in)), fan_in from [O,C,kh,kw] or [O,C,k]
  kXavier,       // U(+-sqrt(6 / (fan_in + fan_out))) from [out, in]
};

// Owns every parameter and persistent buffer of one model, in creation order.
// Each parameter is initialized from its own stream, seeded by the registry
// seed mixed with the parameter name, so values do not depend on creation
// order or on the shapes of unrelated parameters.
class ParamRegistry {
 public:
  explicit ParamRegistry(uint64_t seed) : seed_(seed) {}

  Var param(const std::string& name, Shape shape, Init init, double a = 0.0, double b = 0.0) {
    if (!names_.insert(name).second) throw Error("duplicate parameter name: " + name);
    Tensor t = Tensor::zeros(shape);
    Rng rng(seed_ ^ fnv1a64(name));
    float* p = t.data();
    const int64_t n = t.numel();
    switch (init) {
      case Init::kZeros:
        break;
      case Init::kOnes:
        std::fill(p, p + n, 1.0f);
        break;
      case Init::kUniform:
        for (int64_t i = 0; i < n; ++i) p[i] = static_cast<float>(rng.uniform(a, b));
        break;
      case Init::kNormal:
        for (int64_t i = 0; i < n; ++i) p[i] = static_cast<float>(a + b * rng.normal());
        break;
      case Init::kKaimingConv: {
        int64_t fan_in = 1;
        for (size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (int64_t i = 0; i < n; ++i) p[i] = static_cast<float>(std * rng.normal());
        break;
      }
      case Init::kXavier: {
        if (shape.size() != 2) throw Error("xavier init expects [out, in]: " + name);
        const double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
        for (int64_t i = 0; i < n; ++i) p[i] = static_cast<float>(rng.uniform(-bound, bound));
        break;
      }
    }
    Var v = make_param(std::move(t), name);
    params_.emplace_back(name, v);
    return v;
  }

  Tensor buffer(const std::string& name, Shape shape, float fill) {
    if (!names_.insert(name).second) throw Error("duplicate buffer name: " + name);
    Tensor t = Tensor::full(std::move(shape), fill);
    buffers_.emplace_back(name, t);
    return t;
  }

  const std::vector<std::pair<std::string, Var>>& params() const { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& buffers() const { return buffers_; }
  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::vector<std::pair<std::string, Var>> params_;
  std::vector<std::pair<std::string, Tensor>> buffers_;
  std::unordered_set<std::string> names_;
};

struct LinearLayer {
  Var w, b;
  LinearLayer() = default;
  LinearLayer(ParamRegistry& reg, const std::string& prefix, int64_t in, int64_t out,
              bool bias = true) {
    w = reg.param(prefix + ".weight", {out, in}, Init::kXavier);
    if (bias) b = reg.param(prefix + ".bias", {out}, Init::kZeros);
  }
  Var forward(const Var& x) const { return linear(x, w, b); }
};

struct Conv2dLayer {
  Var w, b;
  int64_t stride = 1, pad = 0;
  Conv2dLayer() = default;
  Conv2dLayer(ParamRegistry& reg, const std::string& prefix, int64_t in_ch, int64_t out_ch,
              int64_t k, int64_t stride_, int64_t pad_, bool bias = true)
      : stride(stride_), pad(pad_) {
    w = reg.param(prefix + ".weight", {out_ch, in_ch, k, k}, Init::kKaimingConv);
    if (bias) b = reg.param(prefix + ".bias", {out_ch}, Init::kZeros);
  }
  Var forward(const Var& x) const { return conv2d(x, w, b, stride, pad); }
};

struct Conv1dLayer {
  Var w, b;
  int64_t stride = 1, pad = 0;
  Conv1dLayer() = default;
  Conv1dLayer(ParamRegistry& reg, const std::string& prefix, int64_t in_ch, int64_t out_ch,
              int64_t k, int64_t stride_, int64_t pad_, bool bias = true)
      : stride(stride_), pad(pad_) {
    w = reg.param(prefix + ".weight", {out_ch, in_ch, k}, Init::kKaimingConv);
    if (bias) b = reg.param(prefix + ".bias", {out_ch}, Init::kZeros);
  }
  Var forward(const Var& x) const { return conv1d(x, w, b, stride, pad); }
};

// Batch norm with running statistics. Normalization uses biased batch
// variance; the running-variance update uses the unbiased estimate, matching
// the common convention. Running buffers are updated in place so every handle
// (layer, registry, checkpoint writer) observes the same values.
struct BatchNorm2d {
  Var gamma, beta;
  Tensor running_mean, running_var;
  float momentum = 0.1f;
  float eps = 1e-5f;

  BatchNorm2d() = default;
  BatchNorm2d(ParamRegistry& reg, const std::string& prefix, int64_t channels) {
    gamma = reg.param(prefix + ".weight", {channels}, Init::kOnes);
    beta = reg.param(prefix + ".bias", {channels}, Init::kZeros);
    running_mean = reg.buffer(prefix + ".running_mean", {channels}, 0.0f);
    running_var = reg.buffer(prefix + ".running_var", {channels}, 1.0f);
  }

  Var forward(const Var& x, bool training) {
    if (!training) return batch_norm2d_eval(x, gamma, beta, running_mean, running_var, eps);
    Tensor bm, bv;
    Var y = batch_norm2d_train(x, gamma, beta, &bm, &bv, eps);
    const Shape& s = x.shape();
    const double m = static_cast<double>(s[0]) * s[2] * s[3];
    const double unbias = m > 1.0 ? m / (m - 1.0) : 1.0;
    for (int64_t i = 0; i < running_mean.numel(); ++i) {
      running_mean.data()[i] =
          (1.0f - momentum) * running_mean.data()[i] + momentum * bm.data()[i];
      running_var.data()[i] = (1.0f - momentum) * running_var.data()[i] +
                              momentum * static_cast<float>(bv.data()[i] * unbias);
    }
    return y;
  }
};

struct LayerNormLayer {
  Var gamma, beta;
  float eps = 1e-5f;
  LayerNormLayer() = default;
  LayerNormLayer(ParamRegistry& reg, const std::string& prefix, int64_t dim) {
    gamma = reg.param(prefix + ".weight", {dim}, Init::kOnes);
    beta = reg.param(prefix + ".bias", {dim}, Init::kZeros);
  }
  // x is [N, D] (flatten sequences before calling).
  Var forward(const Var& x) const { return layer_norm(x, gamma, beta, eps); }
};

// Standard multi-head self-attention on [B, T, D].
struct MultiHeadSelfAttention {
  LinearLayer q, k, v, out;
  int64_t dim = 0, heads = 0;

  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(ParamRegistry& reg, const std::string& prefix, int64_t dim_,
                         int64_t heads_)
      : dim(dim_), heads(heads_) {
    if (dim % heads != 0) throw Error("attention dim must divide heads");
    q = LinearLayer(reg, prefix + ".q", dim, dim);
    k = LinearLayer(reg, prefix + ".k", dim, dim);
    v = LinearLayer(reg, prefix + ".v", dim, dim);
    out = LinearLayer(reg, prefix + ".out", dim, dim);
  }

  Var forward(const Var& x) const {
    const Shape& s = x.shape();
    if (s.size() != 3 || s[2] != dim)
      throw ShapeError("attention: expected [B,T," + std::to_string(dim) + "], got " +
                       shape_str(s));
    const int64_t b = s[0], t = s[1], dh = dim / heads;
    Var flat = reshape(x, {b * t, dim});
    auto heads_of = [&](const LinearLayer& proj) {
      Var y = proj.forward(flat);                       // [B*T, D]
      y = reshape(y, {b, t, heads, dh});
      y = permute_0213(y);                              // [B, H, T, dh]
      return reshape(y, {b * heads, t, dh});
    };
    Var qh = heads_of(q), kh = heads_of(k), vh = heads_of(v);
    Var scores = scale(bmm(qh, kh, false, true), 1.0f / std::sqrt(static_cast<float>(dh)));
    Var attn = reshape(softmax_rows(reshape(scores, {b * heads * t, t})), {b * heads, t, t});
    Var ctx = bmm(attn, vh);                            // [B*H, T, dh]
    ctx = reshape(permute_0213(reshape(ctx, {b, heads, t, dh})), {b * t, dim});
    return reshape(out.forward(ctx), {b, t, dim});
  }
};

// Pre-norm transformer encoder block.
struct TransformerBlock {
  LayerNormLayer ln1, ln2;
  MultiHeadSelfAttention attn;
  LinearLayer fc1, fc2;
  int64_t dim = 0;

  TransformerBlock() = default;
  TransformerBlock(ParamRegistry& reg, const std::string& prefix, int64_t dim_, int64_t heads,
                   int64_t mlp_dim)
      : dim(dim_) {
    ln1 = LayerNormLayer(reg, prefix + ".ln1", dim);
    ln2 = LayerNormLayer(reg, prefix + ".ln2", dim);
    attn = MultiHeadSelfAttention(reg, prefix + ".attn", dim, heads);
    fc1 = LinearLayer(reg, prefix + ".mlp.fc1", dim, mlp_dim);
    fc2 = LinearLayer(reg, prefix + ".mlp.fc2", mlp_dim, dim);
  }

  Var forward(const Var& x) const {
    const Shape& s = x.shape();
    const int64_t b = s[0], t = s[1];
    Var h = reshape(ln1.forward(reshape(x, {b * t, dim})), {b, t, dim});
    Var y = add(x, attn.forward(h));
    Var m = ln2.forward(reshape(y, {b * t, dim}));
    m = fc2.forward(gelu(fc1.forward(m)));
    return add(y, reshape(m, {b, t, dim}));
  }
};

// Single-direction LSTM over a list of [B, D] steps; gate order i, f, g, o.
struct LstmCell {
  Var w_ih, w_hh, bias;
  int64_t in_dim = 0, hidden = 0;

  LstmCell() = default;
  LstmCell(ParamRegistry& reg, const std::string& prefix, int64_t in_dim_, int64_t hidden_)
      : in_dim(in_dim_), hidden(hidden_) {
    w_ih = reg.param(prefix + ".w_ih", {4 * hidden, in_dim}, Init::kXavier);
    w_hh = reg.param(prefix + ".w_hh", {4 * hidden, hidden}, Init::kXavier);
    bias = reg.param(prefix + ".bias", {4 * hidden}, Init::kZeros);
  }

  // Returns the final hidden state.
  Var run(const std::vector<Var>& steps) const {
    if (steps.empty()) throw ShapeError("lstm: empty sequence");
    const int64_t b = steps[0].shape()[0];
    Var h = make_const(Tensor::zeros({b, hidden}));
    Var c = make_const(Tensor::zeros({b, hidden}));
    for (const Var& x : steps) {
      if (x.shape() != Shape{b, in_dim})
        throw ShapeError("lstm: expected step [" + std::to_string(b) + "," +
                         std::to_string(in_dim) + "], got " + shape_str(x.shape()));
      Var gates = add(linear(x, w_ih, bias), linear(h, w_hh));
      Var i = sigmoid(slice_cols(gates, 0, hidden));
      Var f = sigmoid(slice_cols(gates, hidden, hidden));
      Var g = tanh_op(slice_cols(gates, 2 * hidden, hidden));
      Var o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
      c = add(mul(f, c), mul(i, g));
      h = mul(o, tanh_op(c));
    }
    return h;
  }
};

// Bidirectional LSTM; returns [B, 2*hidden], the concatenated final states of
// the forward and backward passes.
struct BiLstm {
  LstmCell fwd, bwd;

  BiLstm() = default;
  BiLstm(ParamRegistry& reg, const std::string& prefix, int64_t in_dim, int64_t hidden) {
    fwd = LstmCell(reg, prefix + ".fwd", in_dim, hidden);
    bwd = LstmCell(reg, prefix + ".bwd", in_dim, hidden);
  }

  Var run(const std::vector<Var>& steps) const {
    std::vector<Var> rev(steps.rbegin(), steps.rend());
    return concat_cols(fwd.run(steps), bwd.run(rev));
  }
};

// Additive (Bahdanau-style) attention pooling over time: h [B, T, C] ->
// context [B, C]. Weights are a softmax, so each row sums to one.
struct AdditiveAttention {
  Var w, b, v;
  int64_t channels = 0, attn_dim = 0;

  AdditiveAttention() = default;
  AdditiveAttention(ParamRegistry& reg, const std::string& prefix, int64_t channels_,
                    int64_t attn_dim_)
      : channels(channels_), attn_dim(attn_dim_) {
    w = reg.param(prefix + ".w", {attn_dim, channels}, Init::kXavier);
    b = reg.param(prefix + ".b", {attn_dim}, Init::kZeros);
    v = reg.param(prefix + ".v", {1, attn_dim}, Init::kXavier);
  }

  struct Result {
    Var context;  // [B, C]
    Var weights;  // [B, T]
  };

  Result forward(const Var& h) const {
    const Shape& s = h.shape();
    if (s.size() != 3 || s[2] != channels)
      throw ShapeError("additive attention: expected [B,T," + std::to_string(channels) +
                       "], got " + shape_str(s));
    const int64_t bsz = s[0], t = s[1];
    Var proj = tanh_op(linear(reshape(h, {bsz * t, channels}), w, b));
    Var scores = reshape(linear(proj, v), {bsz, t});
    Var alphas = softmax_rows(scores);
    Var ctx = reshape(bmm(reshape(alphas, {bsz, int64_t{1}, t}), h), {bsz, channels});
    return {ctx, alphas};
  }
};

}  // namespace nn
}  // namespace spoofbench
