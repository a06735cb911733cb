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
#include <memory>
#include <string>
#include <vector>

#include "spoofbench/nn/layers.hpp"
#include "spoofbench/nn/optim.hpp"

namespace spoofbench {

enum class Architecture {
  kLcnn = 0,
  kLcnnAttention = 1,
  kResNet18 = 2,
  kVitB16 = 3,
  kCnnBiLstm = 4,
  kWav2Vec2Base = 5,
};

inline const char* architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kLcnn: return "LCNN";
    case Architecture::kLcnnAttention: return "LCNN_ATTENTION";
    case Architecture::kResNet18: return "RESNET18";
    case Architecture::kVitB16: return "VIT_B16";
    case Architecture::kCnnBiLstm: return "CNN_BILSTM";
    case Architecture::kWav2Vec2Base: return "WAV2VEC2_BASE";
  }
  throw Error("unknown architecture enum value");
}

inline Architecture parse_architecture(const std::string& s) {
  for (int i = 0; i <= 5; ++i) {
    const auto a = static_cast<Architecture>(i);
    if (s == architecture_name(a)) return a;
  }
  throw Error("unknown architecture: " + s);
}

// What a model consumes per clip.
enum class InputKind {
  kMel1ch = 0,         // [1, n_mels, n_frames] normalized mel spectrogram
  kImage3ch = 1,       // [3, 224, 224] rendered spectrogram image
  kImageSequence = 2,  // [T, 3, 224, 224] sliding-window image sequence
  kRawWaveform = 3,    // [T] 16 kHz samples
};

inline const char* input_kind_name(InputKind k) {
  switch (k) {
    case InputKind::kMel1ch: return "MEL_1CH";
    case InputKind::kImage3ch: return "IMAGE_3CH";
    case InputKind::kImageSequence: return "IMAGE_SEQUENCE";
    case InputKind::kRawWaveform: return "RAW_WAVEFORM";
  }
  throw Error("unknown input kind enum value");
}

enum class HeadKind {
  kTwoLogit = 0,  // [B, 2] class logits, score = sigmoid(z1 - z0)
  kOneLogit = 1,  // [B, 1] logit of the fake class, score = sigmoid(z)
};

inline const char* head_kind_name(HeadKind k) {
  return k == HeadKind::kTwoLogit ? "TWO_LOGIT" : "ONE_LOGIT";
}

// The input kind and head shape are properties of the architecture, not
// configuration; they are derived, never stored.
inline InputKind input_kind_of(Architecture a) {
  switch (a) {
    case Architecture::kLcnn:
    case Architecture::kLcnnAttention: return InputKind::kMel1ch;
    case Architecture::kResNet18:
    case Architecture::kVitB16: return InputKind::kImage3ch;
    case Architecture::kCnnBiLstm: return InputKind::kImageSequence;
    case Architecture::kWav2Vec2Base: return InputKind::kRawWaveform;
  }
  throw Error("unknown architecture enum value");
}

inline HeadKind head_kind_of(Architecture a) {
  switch (a) {
    case Architecture::kResNet18:
    case Architecture::kCnnBiLstm: return HeadKind::kOneLogit;
    default: return HeadKind::kTwoLogit;
  }
}

// Whether the architecture models the clip as an ordered sequence (attention
// over time, recurrence, or a transformer over frames) rather than a single
// pooled representation.
inline bool sequence_modeling(Architecture a) {
  switch (a) {
    case Architecture::kLcnnAttention:
    case Architecture::kCnnBiLstm:
    case Architecture::kWav2Vec2Base: return true;
    default: return false;
  }
}

struct ModelSpec {
  Architecture arch = Architecture::kLcnn;
  bool pretrained_backbone = false;
  bool frozen_backbone = false;

  InputKind input_kind() const { return input_kind_of(arch); }
  HeadKind head_kind() const { return head_kind_of(arch); }

  // WAV2VEC2_BASE is used as a fixed feature extractor; its encoder never
  // unfreezes regardless of what the caller asked for.
  ModelSpec normalized() const {
    ModelSpec s = *this;
    if (s.arch == Architecture::kWav2Vec2Base) s.frozen_backbone = true;
    return s;
  }

  bool operator==(const ModelSpec& o) const {
    return arch == o.arch && pretrained_backbone == o.pretrained_backbone &&
           frozen_backbone == o.frozen_backbone;
  }
};

// Reference configuration: the image and speech backbones start from
// pretrained weights, the compact spectrogram CNNs train from scratch, and
// only the wav2vec2 encoder stays frozen. Tests run with
// pretrained_backbone=false so they work offline.
inline ModelSpec default_model_spec(Architecture a) {
  ModelSpec spec;
  spec.arch = a;
  spec.pretrained_backbone =
      a == Architecture::kResNet18 || a == Architecture::kVitB16 ||
      a == Architecture::kCnnBiLstm || a == Architecture::kWav2Vec2Base;
  spec.frozen_backbone = a == Architecture::kWav2Vec2Base;
  return spec;
}

// One mini-batch. Only the member matching the model's input kind is read.
struct Batch {
  Tensor mel;      // [B, 1, n_mels, n_frames]
  Tensor images;   // [B, 3, 224, 224]
  Tensor windows;  // [B, T, 3, 224, 224]
  Tensor wave;     // [B, T]
};

struct BatchOutput {
  nn::Var logits;       // [B, 2] or [B, 1] per head kind
  nn::Var penultimate;  // features feeding the final linear head
  nn::Var attention;    // [B, T] softmax weights, when the model has them
};

namespace detail {

inline void require_input(const Tensor& t, size_t rank, const char* model, const char* expected) {
  if (!t.defined() || t.shape().size() != rank)
    throw ShapeError(std::string(model) + ": expected input " + expected + ", got " +
                     (t.defined() ? shape_str(t.shape()) : std::string("<missing>")));
}

}  // namespace detail

class Model {
 public:
  explicit Model(ModelSpec spec, uint64_t seed) : reg_(seed), spec_(spec.normalized()) {}
  virtual ~Model() = default;

  Architecture architecture() const { return spec_.arch; }
  const ModelSpec& spec() const { return spec_; }
  uint64_t seed() const { return reg_.seed(); }

  virtual BatchOutput forward(const Batch& in, bool training) = 0;

  // Final linear head, exposed so callers can rebuild logits from cached
  // penultimate features.
  virtual const nn::LinearLayer& head() const = 0;

  const std::vector<std::pair<std::string, nn::Var>>& named_parameters() const {
    return reg_.params();
  }
  const std::vector<std::pair<std::string, Tensor>>& named_buffers() const {
    return reg_.buffers();
  }
  std::vector<nn::Var> parameters() const {
    std::vector<nn::Var> out;
    for (const auto& [name, v] : reg_.params()) out.push_back(v);
    return out;
  }
  std::vector<nn::Var> trainable_parameters() const {
    std::vector<nn::Var> out;
    for (const auto& [name, v] : reg_.params())
      if (v.requires_grad()) out.push_back(v);
    return out;
  }
  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, v] : reg_.params()) n += v.numel();
    return n;
  }

  // Fake-class probability per clip; no graph is recorded.
  std::vector<double> scores(const Batch& in) {
    nn::NoGradGuard ng;
    BatchOutput out = forward(in, /*training=*/false);
    return logits_to_scores(out.logits.value(), spec_.head_kind());
  }

  // Split forward for frozen-backbone training: encode_frozen runs the
  // gradient-exempt stage in inference mode with no graph recorded, so its
  // output can be computed once per clip and cached; forward_frozen_tail
  // resumes from that tensor through the trainable parameters. The default
  // split point is the penultimate feature vector; architectures whose
  // trainable stage consumes more than that vector override both. In
  // inference mode, composing the two stages reproduces forward() exactly.
  virtual Tensor encode_frozen(const Batch& in) {
    nn::NoGradGuard ng;
    return forward(in, /*training=*/false).penultimate.value();
  }

  virtual BatchOutput forward_frozen_tail(const nn::Var& encoded, bool /*training*/) {
    BatchOutput out;
    out.penultimate = encoded;
    out.logits = head().forward(encoded);
    return out;
  }

  // Recomputes input-dependent normalization statistics (batch-norm running
  // mean and variance) from one representative batch; parameters are not
  // touched. A randomly initialized frozen backbone otherwise keeps its init
  // statistics, and inference-mode activations then sit far from the
  // training-mode scale. Models without such statistics ignore the call.
  virtual void calibrate(const Batch& /*in*/) {}

  static std::vector<double> logits_to_scores(const Tensor& logits, HeadKind kind) {
    const Shape& s = logits.shape();
    if (s.size() != 2) throw ShapeError("logits must be rank-2, got " + shape_str(s));
    std::vector<double> out(static_cast<size_t>(s[0]));
    for (int64_t i = 0; i < s[0]; ++i) {
      double z;
      if (kind == HeadKind::kTwoLogit) {
        if (s[1] != 2) throw ShapeError("expected [B,2] logits, got " + shape_str(s));
        z = static_cast<double>(logits.data()[i * 2 + 1]) - logits.data()[i * 2];
      } else {
        if (s[1] != 1) throw ShapeError("expected [B,1] logits, got " + shape_str(s));
        z = logits.data()[i];
      }
      out[static_cast<size_t>(i)] = 1.0 / (1.0 + std::exp(-z));
    }
    return out;
  }

 protected:
  // Marks every parameter outside head.* as non-trainable.
  void apply_freeze() {
    if (!spec_.frozen_backbone) return;
    for (const auto& [name, v] : reg_.params())
      if (name.rfind("head.", 0) != 0) v.set_requires_grad(false);
  }

  nn::ParamRegistry reg_;
  ModelSpec spec_;
};

}  // namespace spoofbench
