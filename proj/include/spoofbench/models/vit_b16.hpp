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

// ViT-B/16: 16x16 patch embedding of a 224x224 image (196 patches), a class
// token, learned positional embeddings, 12 pre-norm transformer layers of
// width 768 with 12 heads and a 3072-wide MLP, and a classifier on the final
// class-token state.
class VitB16Model : public Model {
 public:
  static constexpr int64_t kPatch = 16;
  static constexpr int64_t kDim = 768;
  static constexpr int64_t kLayers = 12;
  static constexpr int64_t kHeads = 12;
  static constexpr int64_t kMlpDim = 3072;
  static constexpr int64_t kTokens = 197;  // 14*14 patches + class token

  VitB16Model(ModelSpec spec, uint64_t seed) : Model(spec, seed) {
    patch_ = nn::Conv2dLayer(reg_, "backbone.patch", 3, kDim, kPatch, kPatch, 0);
    cls_ = reg_.param("backbone.cls", {kDim}, nn::Init::kNormal, 0.0, 0.02);
    pos_ = reg_.param("backbone.pos", {kTokens, kDim}, nn::Init::kNormal, 0.0, 0.02);
    for (int64_t i = 0; i < kLayers; ++i)
      blocks_.emplace_back(reg_, "backbone.block" + std::to_string(i + 1), kDim, kHeads, kMlpDim);
    final_ln_ = nn::LayerNormLayer(reg_, "backbone.ln", kDim);
    head_ = nn::LinearLayer(reg_, "head.fc", kDim, 2);
    apply_freeze();
  }

  BatchOutput forward(const Batch& in, bool) override {
    detail::require_input(in.images, 4, "VIT_B16", "[B,3,224,224]");
    const Shape& s = in.images.shape();
    if (s[1] != 3 || s[2] != 224 || s[3] != 224)
      throw ShapeError("VIT_B16: expected input [B,3,224,224], got " + shape_str(s));
    const int64_t b = s[0];
    nn::Var x = nn::make_const(in.images);
    nn::Var p = patch_.forward(x);  // [B, 768, 14, 14]
    p = nn::transpose_12(nn::reshape(p, {b, kDim, (kTokens - 1)}));  // [B, 196, 768]
    nn::Var tokens = nn::add_positional(nn::prepend_token(p, cls_), pos_);
    for (auto& blk : blocks_) tokens = blk.forward(tokens);
    nn::Var cls_state = nn::select_token(tokens, 0);     // [B, 768]
    nn::Var feats = final_ln_.forward(cls_state);
    BatchOutput out;
    out.penultimate = feats;
    out.logits = head_.forward(feats);
    return out;
  }

  const nn::LinearLayer& head() const override { return head_; }

 private:
  nn::Conv2dLayer patch_;
  nn::Var cls_, pos_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNormLayer final_ln_;
  nn::LinearLayer head_;
};

}  // namespace spoofbench
