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

// Light CNN trunk: four conv stages, each a conv followed by a max-feature-map
// (which halves the channel count) and a 2x2 max pool. Channels run
// 64 -> 96 -> 128 -> 192 before halving, so the trunk emits 96 feature maps.
struct LcnnTrunk {
  nn::Conv2dLayer conv1, conv2, conv3, conv4;

  LcnnTrunk() = default;
  LcnnTrunk(nn::ParamRegistry& reg, const std::string& prefix) {
    conv1 = nn::Conv2dLayer(reg, prefix + ".conv1", 1, 64, 5, 1, 2);
    conv2 = nn::Conv2dLayer(reg, prefix + ".conv2", 32, 96, 3, 1, 1);
    conv3 = nn::Conv2dLayer(reg, prefix + ".conv3", 48, 128, 3, 1, 1);
    conv4 = nn::Conv2dLayer(reg, prefix + ".conv4", 64, 192, 3, 1, 1);
  }

  // [B, 1, H, W] -> [B, 96, H/16, W/16].
  nn::Var forward(const nn::Var& x) const {
    nn::Var h = nn::maxpool2d(nn::mfm(conv1.forward(x)), 2, 2);
    h = nn::maxpool2d(nn::mfm(conv2.forward(h)), 2, 2);
    h = nn::maxpool2d(nn::mfm(conv3.forward(h)), 2, 2);
    h = nn::maxpool2d(nn::mfm(conv4.forward(h)), 2, 2);
    return h;
  }
};

class LcnnModel : public Model {
 public:
  LcnnModel(ModelSpec spec, uint64_t seed) : Model(spec, seed) {
    trunk_ = LcnnTrunk(reg_, "backbone");
    head_ = nn::LinearLayer(reg_, "head.fc", 96, 2);
    apply_freeze();
  }

  BatchOutput forward(const Batch& in, bool) override {
    detail::require_input(in.mel, 4, "LCNN", "[B,1,n_mels,n_frames]");
    nn::Var x = nn::make_const(in.mel);
    nn::Var feats = nn::mean_hw(trunk_.forward(x));  // [B, 96]
    BatchOutput out;
    out.penultimate = feats;
    out.logits = head_.forward(feats);
    return out;
  }

  const nn::LinearLayer& head() const override { return head_; }

 private:
  LcnnTrunk trunk_;
  nn::LinearLayer head_;
};

// LCNN trunk followed by additive attention over the time axis instead of a
// global pool: feature maps are averaged over frequency, attended over time,
// and the attention context feeds the classifier.
class LcnnAttentionModel : public Model {
 public:
  static constexpr int64_t kAttnDim = 64;

  LcnnAttentionModel(ModelSpec spec, uint64_t seed) : Model(spec, seed) {
    trunk_ = LcnnTrunk(reg_, "backbone");
    attn_ = nn::AdditiveAttention(reg_, "head.attn", 96, kAttnDim);
    head_ = nn::LinearLayer(reg_, "head.fc", 96, 2);
    apply_freeze();
  }

  BatchOutput forward(const Batch& in, bool) override {
    detail::require_input(in.mel, 4, "LCNN_ATTENTION", "[B,1,n_mels,n_frames]");
    nn::Var x = nn::make_const(in.mel);
    nn::Var maps = trunk_.forward(x);                  // [B, 96, H', T]
    nn::Var seq = nn::transpose_12(nn::mean_height(maps));  // [B, T, 96]
    return from_sequence(attn_.forward(seq));
  }

  // The attention stage is part of the trainable head, so the frozen split
  // point is the per-frame feature sequence, not the pooled context.
  Tensor encode_frozen(const Batch& in) override {
    nn::NoGradGuard ng;
    detail::require_input(in.mel, 4, "LCNN_ATTENTION", "[B,1,n_mels,n_frames]");
    nn::Var x = nn::make_const(in.mel);
    return nn::transpose_12(nn::mean_height(trunk_.forward(x))).value();
  }

  BatchOutput forward_frozen_tail(const nn::Var& seq, bool) override {
    return from_sequence(attn_.forward(seq));
  }

  const nn::LinearLayer& head() const override { return head_; }

 private:
  BatchOutput from_sequence(const nn::AdditiveAttention::Result& att) {
    BatchOutput out;
    out.penultimate = att.context;
    out.attention = att.weights;
    out.logits = head_.forward(att.context);
    return out;
  }

  LcnnTrunk trunk_;
  nn::AdditiveAttention attn_;
  nn::LinearLayer head_;
};

}  // namespace spoofbench
