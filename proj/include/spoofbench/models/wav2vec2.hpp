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

#include "spoofbench/models/base.hpp"

namespace spoofbench {

// Waveform encoder in the wav2vec 2.0 base layout: a seven-layer strided
// conv feature extractor (512 channels, overall stride 320), a projection to
// 768, and 12 transformer layers. The encoder is always frozen; training only
// touches the classifier on the time-pooled features.
class Wav2Vec2Model : public Model {
 public:
  static constexpr int64_t kConvCh = 512;
  static constexpr int64_t kDim = 768;
  static constexpr int64_t kLayers = 12;
  static constexpr int64_t kHeads = 12;
  static constexpr int64_t kMlpDim = 3072;

  Wav2Vec2Model(ModelSpec spec, uint64_t seed) : Model(spec, seed) {
    const int64_t kernels[7] = {10, 3, 3, 3, 3, 2, 2};
    const int64_t strides[7] = {5, 2, 2, 2, 2, 2, 2};
    for (int i = 0; i < 7; ++i)
      convs_.emplace_back(reg_, "backbone.conv" + std::to_string(i + 1),
                          i == 0 ? 1 : kConvCh, kConvCh, kernels[i], strides[i], 0, false);
    feat_ln_ = nn::LayerNormLayer(reg_, "backbone.feat_ln", kConvCh);
    proj_ = nn::LinearLayer(reg_, "backbone.proj", kConvCh, kDim);
    for (int64_t i = 0; i < kLayers; ++i)
      blocks_.emplace_back(reg_, "backbone.block" + std::to_string(i + 1), kDim, kHeads, kMlpDim);
    final_ln_ = nn::LayerNormLayer(reg_, "backbone.ln", kDim);
    head_ = nn::LinearLayer(reg_, "head.fc", kDim, 2);
    apply_freeze();
  }

  BatchOutput forward(const Batch& in, bool) override {
    detail::require_input(in.wave, 2, "WAV2VEC2_BASE", "[B,T]");
    const Shape& s = in.wave.shape();
    const int64_t b = s[0], t = s[1];
    if (t < 400)
      throw ShapeError("WAV2VEC2_BASE: expected input [B,T] with T >= 400 samples, got " +
                       shape_str(s));
    nn::Var h = nn::make_const(in.wave.reshaped({b, int64_t{1}, t}));
    for (const auto& c : convs_) h = nn::gelu(c.forward(h));
    const int64_t frames = h.shape()[2];
    nn::Var seq = nn::transpose_12(h);  // [B, frames, 512]
    seq = nn::reshape(seq, {b * frames, kConvCh});
    seq = proj_.forward(feat_ln_.forward(seq));
    nn::Var tokens = nn::reshape(seq, {b, frames, kDim});
    for (auto& blk : blocks_) tokens = blk.forward(tokens);
    nn::Var flat = final_ln_.forward(nn::reshape(tokens, {b * frames, kDim}));
    // Mean over time: [B, frames, 768] -> [B, 768].
    nn::Var pooled = nn::mean_height(
        nn::reshape(flat, {b, int64_t{1}, frames, kDim}));
    pooled = nn::reshape(pooled, {b, kDim});
    BatchOutput out;
    out.penultimate = pooled;
    out.logits = head_.forward(pooled);
    return out;
  }

  const nn::LinearLayer& head() const override { return head_; }

 private:
  std::vector<nn::Conv1dLayer> convs_;
  nn::LayerNormLayer feat_ln_;
  nn::LinearLayer proj_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNormLayer final_ln_;
  nn::LinearLayer head_;
};

}  // namespace spoofbench
