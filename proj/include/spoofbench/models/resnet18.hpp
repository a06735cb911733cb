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

// Two 3x3 convs with identity (or 1x1 strided) shortcut.
struct BasicBlock {
  nn::Conv2dLayer conv1, conv2;
  nn::BatchNorm2d bn1, bn2;
  nn::Conv2dLayer down_conv;
  nn::BatchNorm2d down_bn;
  bool has_down = false;

  BasicBlock() = default;
  BasicBlock(nn::ParamRegistry& reg, const std::string& prefix, int64_t in_ch, int64_t out_ch,
             int64_t stride) {
    conv1 = nn::Conv2dLayer(reg, prefix + ".conv1", in_ch, out_ch, 3, stride, 1, false);
    bn1 = nn::BatchNorm2d(reg, prefix + ".bn1", out_ch);
    conv2 = nn::Conv2dLayer(reg, prefix + ".conv2", out_ch, out_ch, 3, 1, 1, false);
    bn2 = nn::BatchNorm2d(reg, prefix + ".bn2", out_ch);
    has_down = stride != 1 || in_ch != out_ch;
    if (has_down) {
      down_conv = nn::Conv2dLayer(reg, prefix + ".down.conv", in_ch, out_ch, 1, stride, 0, false);
      down_bn = nn::BatchNorm2d(reg, prefix + ".down.bn", out_ch);
    }
  }

  nn::Var forward(const nn::Var& x, bool training) {
    nn::Var h = nn::relu(bn1.forward(conv1.forward(x), training));
    h = bn2.forward(conv2.forward(h), training);
    nn::Var sc = has_down ? down_bn.forward(down_conv.forward(x), training) : x;
    return nn::relu(nn::add(h, sc));
  }

  void set_bn_momentum(float m) {
    bn1.momentum = m;
    bn2.momentum = m;
    if (has_down) down_bn.momentum = m;
  }
};

// 18-layer residual trunk on 3-channel 224x224 input, pooled to [B, 512].
struct ResNet18Trunk {
  nn::Conv2dLayer stem;
  nn::BatchNorm2d stem_bn;
  std::vector<BasicBlock> blocks;

  ResNet18Trunk() = default;
  ResNet18Trunk(nn::ParamRegistry& reg, const std::string& prefix) {
    stem = nn::Conv2dLayer(reg, prefix + ".stem.conv", 3, 64, 7, 2, 3, false);
    stem_bn = nn::BatchNorm2d(reg, prefix + ".stem.bn", 64);
    const int64_t chans[4] = {64, 128, 256, 512};
    int64_t in_ch = 64;
    for (int stage = 0; stage < 4; ++stage)
      for (int blk = 0; blk < 2; ++blk) {
        const int64_t stride = (stage > 0 && blk == 0) ? 2 : 1;
        blocks.emplace_back(reg,
                            prefix + ".stage" + std::to_string(stage + 1) + ".block" +
                                std::to_string(blk + 1),
                            in_ch, chans[stage], stride);
        in_ch = chans[stage];
      }
  }

  nn::Var forward(const nn::Var& x, bool training) {
    nn::Var h = nn::relu(stem_bn.forward(stem.forward(x), training));
    h = nn::maxpool2d(h, 3, 2, 1);
    for (BasicBlock& b : blocks) h = b.forward(h, training);
    return nn::mean_hw(h);  // [B, 512]
  }

  void set_bn_momentum(float m) {
    stem_bn.momentum = m;
    for (BasicBlock& b : blocks) b.set_bn_momentum(m);
  }
};

class ResNet18Model : public Model {
 public:
  ResNet18Model(ModelSpec spec, uint64_t seed) : Model(spec, seed) {
    trunk_ = ResNet18Trunk(reg_, "backbone");
    head_ = nn::LinearLayer(reg_, "head.fc", 512, 1);
    apply_freeze();
  }

  BatchOutput forward(const Batch& in, bool training) override {
    detail::require_input(in.images, 4, "RESNET18", "[B,3,224,224]");
    const Shape& s = in.images.shape();
    if (s[1] != 3 || s[2] != 224 || s[3] != 224)
      throw ShapeError("RESNET18: expected input [B,3,224,224], got " + shape_str(s));
    nn::Var x = nn::make_const(in.images);
    nn::Var feats = trunk_.forward(x, training);
    BatchOutput out;
    out.penultimate = feats;
    out.logits = head_.forward(feats);
    return out;
  }

  void calibrate(const Batch& in) override {
    nn::NoGradGuard ng;
    trunk_.set_bn_momentum(1.0f);
    forward(in, /*training=*/true);
    trunk_.set_bn_momentum(0.1f);
  }

  const nn::LinearLayer& head() const override { return head_; }

 private:
  ResNet18Trunk trunk_;
  nn::LinearLayer head_;
};

}  // namespace spoofbench
