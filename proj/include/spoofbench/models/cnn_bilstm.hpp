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

#include "spoofbench/models/resnet18.hpp"

namespace spoofbench {

// Residual trunk applied to each sliding-window image, followed by a
// bidirectional LSTM over the window sequence; the concatenated final states
// of both directions feed a single-logit classifier.
class CnnBiLstmModel : public Model {
 public:
  static constexpr int64_t kHidden = 128;

  CnnBiLstmModel(ModelSpec spec, uint64_t seed) : Model(spec, seed) {
    trunk_ = ResNet18Trunk(reg_, "backbone");
    lstm_ = nn::BiLstm(reg_, "head.lstm", 512, kHidden);
    head_ = nn::LinearLayer(reg_, "head.fc", 2 * kHidden, 1);
    apply_freeze();
  }

  BatchOutput forward(const Batch& in, bool training) override {
    return from_sequence(encode_windows(in, training));
  }

  // The recurrent stage is trainable, so the frozen split point is the
  // per-window trunk feature sequence.
  Tensor encode_frozen(const Batch& in) override {
    nn::NoGradGuard ng;
    return encode_windows(in, /*training=*/false).value();
  }

  BatchOutput forward_frozen_tail(const nn::Var& seq3, bool) override {
    return from_sequence(seq3);
  }

  void calibrate(const Batch& in) override {
    nn::NoGradGuard ng;
    trunk_.set_bn_momentum(1.0f);
    encode_windows(in, /*training=*/true);
    trunk_.set_bn_momentum(0.1f);
  }

  const nn::LinearLayer& head() const override { return head_; }

 private:
  nn::Var encode_windows(const Batch& in, bool training) {
    detail::require_input(in.windows, 5, "CNN_BILSTM", "[B,T,3,224,224]");
    const Shape& s = in.windows.shape();
    if (s[1] < 1 || s[2] != 3 || s[3] != 224 || s[4] != 224)
      throw ShapeError("CNN_BILSTM: expected input [B,T,3,224,224], got " + shape_str(s));
    const int64_t b = s[0], t = s[1];
    nn::Var x = nn::make_const(in.windows.reshaped({b * t, s[2], s[3], s[4]}));
    nn::Var feats = trunk_.forward(x, training);              // [B*T, 512]
    return nn::reshape(feats, {b, t, int64_t{512}});          // [B, T, 512]
  }

  BatchOutput from_sequence(const nn::Var& seq3) {
    const int64_t t = seq3.shape()[1];
    std::vector<nn::Var> steps;
    steps.reserve(static_cast<size_t>(t));
    for (int64_t i = 0; i < t; ++i) steps.push_back(nn::select_token(seq3, i));
    nn::Var pooled = lstm_.run(steps);  // [B, 256]
    BatchOutput out;
    out.penultimate = pooled;
    out.logits = head_.forward(pooled);
    return out;
  }

  ResNet18Trunk trunk_;
  nn::BiLstm lstm_;
  nn::LinearLayer head_;
};

}  // namespace spoofbench
