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
#include <filesystem>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nlohmann/json.hpp"
#include "spoofbench/corpus.hpp"
#include "spoofbench/evalkit.hpp"
#include "spoofbench/frontend.hpp"
#include "spoofbench/models.hpp"

namespace spoofbench {

enum class LossKind { kCrossEntropy = 0, kBce = 1, kWeightedBce = 2 };

inline const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::kCrossEntropy: return "CROSS_ENTROPY";
    case LossKind::kBce: return "BCE";
    case LossKind::kWeightedBce: return "WEIGHTED_BCE";
  }
  throw Error("unknown loss kind enum value");
}

inline LossKind parse_loss_kind(const std::string& s) {
  for (int i = 0; i <= 2; ++i) {
    const auto k = static_cast<LossKind>(i);
    if (s == loss_kind_name(k)) return k;
  }
  throw Error("unknown loss kind: " + s);
}

// One experiment's hyperparameters. Optimizer internals beyond the name and
// learning rate stay at their conventional defaults but are part of the
// config so a resolved config file fully describes the run.
struct TrainConfig {
  nn::OptimKind optimizer = nn::OptimKind::kAdam;
  double learning_rate = 1e-4;
  int64_t batch_size = 32;
  int64_t max_epochs = 2;
  LossKind loss = LossKind::kCrossEntropy;
  // Consecutive non-improving validation epochs tolerated before stopping;
  // 0 disables early stopping.
  int64_t early_stop_patience = 3;
  uint64_t seed = 0;
  // (REAL weight, FAKE weight) for WEIGHTED_BCE; when absent they are
  // derived from the training-split class frequencies.
  std::optional<std::pair<double, double>> class_weights;
  // Every clip is cropped or padded to this length before feature extraction.
  double clip_duration_s = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // ADAMW only

  void validate() const {
    if (!std::isfinite(learning_rate) || learning_rate <= 0.0)
      throw Error("train config: learning_rate must be positive");
    if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
    if (max_epochs < 1) throw Error("train config: max_epochs must be >= 1");
    if (early_stop_patience < 0) throw Error("train config: early_stop_patience must be >= 0");
    if (!(clip_duration_s > 0.0)) throw Error("train config: clip_duration_s must be positive");
    if (class_weights) {
      const auto& [w_real, w_fake] = *class_weights;
      if (!std::isfinite(w_real) || !std::isfinite(w_fake) || w_real <= 0.0 || w_fake <= 0.0)
        throw Error("train config: class weights must be positive");
    }
  }

  nn::OptimConfig optim_config() const {
    nn::OptimConfig oc;
    oc.kind = optimizer;
    oc.lr = learning_rate;
    oc.beta1 = beta1;
    oc.beta2 = beta2;
    oc.eps = eps;
    oc.weight_decay = weight_decay;
    return oc;
  }

  // Frontend settings implied by this config; the clip duration here is
  // authoritative, everything else comes from `base`.
  FrontendConfig frontend_config(FrontendConfig base = {}) const {
    base.duration_s = clip_duration_s;
    return base;
  }
};

// Published per-architecture defaults.
inline TrainConfig default_config(Architecture a) {
  TrainConfig c;
  switch (a) {
    case Architecture::kLcnn:
      c.optimizer = nn::OptimKind::kAdam;
      c.learning_rate = 1e-4;
      c.batch_size = 32;
      c.max_epochs = 2;
      c.loss = LossKind::kCrossEntropy;
      return c;
    case Architecture::kLcnnAttention:
      c.optimizer = nn::OptimKind::kAdam;
      c.learning_rate = 1e-4;
      c.batch_size = 16;
      c.max_epochs = 14;
      c.loss = LossKind::kCrossEntropy;
      return c;
    case Architecture::kResNet18:
      c.optimizer = nn::OptimKind::kAdam;
      c.learning_rate = 1e-4;
      c.batch_size = 32;
      c.max_epochs = 3;
      c.loss = LossKind::kBce;
      return c;
    case Architecture::kVitB16:
      c.optimizer = nn::OptimKind::kAdam;
      c.learning_rate = 1e-4;
      c.batch_size = 8;
      c.max_epochs = 3;
      c.loss = LossKind::kCrossEntropy;
      return c;
    case Architecture::kCnnBiLstm:
      c.optimizer = nn::OptimKind::kAdam;
      c.learning_rate = 1e-4;
      c.batch_size = 8;
      c.max_epochs = 10;
      c.loss = LossKind::kWeightedBce;
      return c;
    case Architecture::kWav2Vec2Base:
      c.optimizer = nn::OptimKind::kAdamW;
      c.learning_rate = 5e-5;
      c.batch_size = 4;
      c.max_epochs = 1;
      c.loss = LossKind::kCrossEntropy;
      return c;
  }
  throw Error("unknown architecture enum value");
}

// ---------------------------------------------------------------------------
// Loss computation. Label 1 = FAKE is the positive class everywhere.
// ---------------------------------------------------------------------------

// Inverse-frequency balancing: w_c = N_total / (2 * N_c), so a balanced set
// yields (1, 1) and the minority class is weighted up.
inline std::pair<double, double> derive_class_weights(const std::vector<int>& labels) {
  int64_t n_fake = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error("class weights: labels must be 0 or 1");
    n_fake += l;
  }
  const int64_t n = static_cast<int64_t>(labels.size());
  const int64_t n_real = n - n_fake;
  if (n_real == 0 || n_fake == 0)
    throw Error(std::string("cannot derive class weights: no ") +
                (n_real == 0 ? "REAL" : "FAKE") + " examples in the training split");
  return {static_cast<double>(n) / (2.0 * static_cast<double>(n_real)),
          static_cast<double>(n) / (2.0 * static_cast<double>(n_fake))};
}

inline nn::Var compute_loss(LossKind kind, const nn::Var& logits, const std::vector<int>& labels,
                            const std::optional<std::pair<double, double>>& class_weights = {}) {
  if (!logits.defined() || logits.shape().size() != 2)
    throw Error("compute_loss: logits must be rank-2");
  const Shape& s = logits.shape();
  if (static_cast<int64_t>(labels.size()) != s[0])
    throw Error("compute_loss: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(s[0]) + " logit rows");
  for (int l : labels)
    if (l != 0 && l != 1) throw Error("compute_loss: labels must be 0 or 1");
  if (class_weights && kind != LossKind::kWeightedBce)
    throw Error(std::string("compute_loss: class weights are only valid with WEIGHTED_BCE, got ") +
                loss_kind_name(kind));

  switch (kind) {
    case LossKind::kCrossEntropy:
      if (s[1] != 2)
        throw Error("compute_loss: CROSS_ENTROPY expects [B,2] logits, got " + shape_str(s));
      return nn::cross_entropy_loss(logits, labels);
    case LossKind::kBce:
      if (s[1] != 1) throw Error("compute_loss: BCE expects [B,1] logits, got " + shape_str(s));
      return nn::bce_logits_loss(logits, labels);
    case LossKind::kWeightedBce: {
      if (s[1] != 1)
        throw Error("compute_loss: WEIGHTED_BCE expects [B,1] logits, got " + shape_str(s));
      if (!class_weights)
        throw Error(
            "compute_loss: WEIGHTED_BCE needs class weights (pass them or derive them from the "
            "training split)");
      return nn::bce_logits_loss(logits, labels, class_weights->first, class_weights->second);
    }
  }
  throw Error("unknown loss kind enum value");
}

// ---------------------------------------------------------------------------
// Clip encoding: corpus records -> per-clip model input tensors.
// ---------------------------------------------------------------------------

struct TrainExample {
  std::string clip_id;
  int label = 0;  // 1 = FAKE
  Tensor input;   // layout per InputKind, without the batch axis
};

struct SplitData {
  std::vector<TrainExample> train, val, test;

  const std::vector<TrainExample>& of(Split s) const {
    switch (s) {
      case Split::kTrain: return train;
      case Split::kVal: return val;
      case Split::kTest: return test;
    }
    throw Error("unknown split enum value");
  }
};

inline Tensor encode_clip(const ClipRecord& rec, InputKind kind, const FrontendConfig& cfg) {
  if (kind == InputKind::kRawWaveform) {
    AudioClip clip = load_and_resample(rec.audio_path.string(), cfg.target_hz);
    clip = fix_duration(clip, cfg.duration_s);
    Tensor wave = Tensor::zeros({clip.length()});
    std::copy(clip.samples.begin(), clip.samples.end(), wave.data());
    return wave;
  }
  const MelSpectrogram mel = mel_from_file(rec.audio_path.string(), cfg);
  switch (kind) {
    case InputKind::kMel1ch:
      return mel.values.reshaped({int64_t{1}, mel.n_mels(), mel.n_frames()});
    case InputKind::kImage3ch:
      return to_image(mel, cfg.standardize_image).values;
    case InputKind::kImageSequence: {
      const auto windows =
          window_sequence(mel, cfg.win_frames, cfg.stride_frames, cfg.standardize_image);
      const int64_t t = static_cast<int64_t>(windows.size());
      Tensor out = Tensor::zeros({t, 3, kImageSize, kImageSize});
      const int64_t per = 3 * kImageSize * kImageSize;
      for (int64_t i = 0; i < t; ++i) {
        const Tensor& w = windows[static_cast<size_t>(i)].values;
        std::copy(w.data(), w.data() + per, out.data() + i * per);
      }
      return out;
    }
    default: throw Error("unknown input kind enum value");
  }
}

inline SplitData encode_corpus(const std::vector<ClipRecord>& records,
                               const SplitAssignment& splits, InputKind kind,
                               const FrontendConfig& cfg) {
  SplitData data;
  for (const ClipRecord& rec : records) {
    TrainExample ex;
    ex.clip_id = rec.clip_id;
    ex.label = static_cast<int>(rec.label);
    ex.input = encode_clip(rec, kind, cfg);
    switch (splits.at(rec.clip_id)) {
      case Split::kTrain: data.train.push_back(std::move(ex)); break;
      case Split::kVal: data.val.push_back(std::move(ex)); break;
      case Split::kTest: data.test.push_back(std::move(ex)); break;
    }
  }
  return data;
}

namespace detail {

inline Tensor stack_rows(const std::vector<Tensor>& items, const std::vector<int64_t>& idx) {
  if (idx.empty()) throw Error("stack_rows: empty selection");
  const Shape item = items[static_cast<size_t>(idx[0])].shape();
  Shape out_shape{static_cast<int64_t>(idx.size())};
  out_shape.insert(out_shape.end(), item.begin(), item.end());
  Tensor out = Tensor::zeros(out_shape);
  const int64_t per = items[static_cast<size_t>(idx[0])].numel();
  for (size_t i = 0; i < idx.size(); ++i) {
    const Tensor& t = items[static_cast<size_t>(idx[i])];
    if (t.shape() != item)
      throw Error("stack_rows: shape " + shape_str(t.shape()) + " differs from " +
                  shape_str(item));
    std::copy(t.data(), t.data() + per, out.data() + static_cast<int64_t>(i) * per);
  }
  return out;
}

}  // namespace detail

// Stacks the selected examples into one batch for the given input kind.
inline Batch collate(const std::vector<TrainExample>& examples, const std::vector<int64_t>& idx,
                     InputKind kind) {
  std::vector<Tensor> inputs;
  inputs.reserve(examples.size());
  for (const TrainExample& ex : examples) inputs.push_back(ex.input);
  Tensor stacked = detail::stack_rows(inputs, idx);

  const size_t rank = stacked.shape().size();
  Batch batch;
  switch (kind) {
    case InputKind::kMel1ch:
      if (rank != 4) throw ShapeError("collate: MEL_1CH needs [1,n_mels,n_frames] inputs");
      batch.mel = stacked;
      return batch;
    case InputKind::kImage3ch:
      if (rank != 4) throw ShapeError("collate: IMAGE_3CH needs [3,224,224] inputs");
      batch.images = stacked;
      return batch;
    case InputKind::kImageSequence:
      if (rank != 5) throw ShapeError("collate: IMAGE_SEQUENCE needs [T,3,224,224] inputs");
      batch.windows = stacked;
      return batch;
    case InputKind::kRawWaveform:
      if (rank != 2) throw ShapeError("collate: RAW_WAVEFORM needs [T] inputs");
      batch.wave = stacked;
      return batch;
  }
  throw Error("unknown input kind enum value");
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int64_t best_epoch = 0;  // 1-based index into epochs
  bool stopped_early = false;
};

// Early stopping on validation accuracy: improvement means strictly higher
// accuracy (min_delta 0), so ties keep the earlier best epoch. Stops once
// `patience` consecutive epochs fail to improve; patience 0 runs to
// max_epochs.
class EarlyStopper {
 public:
  explicit EarlyStopper(int64_t patience) : patience_(patience) {}

  // Feeds one epoch's validation accuracy; true means stop after this epoch.
  bool observe(double val_acc) {
    ++epoch_;
    if (epoch_ == 1 || val_acc > best_acc_) {
      best_acc_ = val_acc;
      best_epoch_ = epoch_;
      wait_ = 0;
      return false;
    }
    ++wait_;
    return patience_ > 0 && wait_ >= patience_;
  }

  int64_t best_epoch() const { return best_epoch_; }
  double best_accuracy() const { return best_acc_; }

 private:
  int64_t patience_ = 0;
  int64_t epoch_ = 0;
  int64_t wait_ = 0;
  int64_t best_epoch_ = 0;
  double best_acc_ = 0.0;
};

struct EvalResult {
  double loss = 0.0;           // example-weighted mean loss
  double accuracy = 0.0;       // at score threshold 0.5
  std::vector<double> scores;  // per example, input order
};

namespace detail {

// Per-clip outputs of the frozen stage (or raw inputs for unfrozen models),
// computed once so epochs only pay for the trainable stage.
struct EncodedSplit {
  std::vector<Tensor> feats;
  std::vector<int> labels;
};

inline std::vector<int64_t> iota_idx(int64_t n) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), int64_t{0});
  return idx;
}

inline EncodedSplit encode_frozen_split(Model& model, const std::vector<TrainExample>& examples,
                                        int64_t batch_size) {
  const InputKind kind = model.spec().input_kind();
  const int64_t n = static_cast<int64_t>(examples.size());
  EncodedSplit out;
  out.feats.reserve(static_cast<size_t>(n));
  out.labels.reserve(static_cast<size_t>(n));
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t count = std::min(batch_size, n - start);
    std::vector<int64_t> idx(static_cast<size_t>(count));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor feats = model.encode_frozen(collate(examples, idx, kind));
    const Shape& fs = feats.shape();
    Shape item(fs.begin() + 1, fs.end());
    const int64_t per = feats.numel() / fs[0];
    for (int64_t i = 0; i < count; ++i) {
      Tensor row = Tensor::zeros(item);
      std::copy(feats.data() + i * per, feats.data() + (i + 1) * per, row.data());
      out.feats.push_back(std::move(row));
      out.labels.push_back(examples[static_cast<size_t>(start + i)].label);
    }
  }
  return out;
}

// Logits for one batch, through the cached frozen stage or the full model.
inline nn::Var batch_logits(Model& model, const std::vector<TrainExample>& examples,
                            const EncodedSplit* encoded, const std::vector<int64_t>& idx,
                            bool training) {
  if (encoded)
    return model
        .forward_frozen_tail(nn::make_const(stack_rows(encoded->feats, idx)), training)
        .logits;
  return model.forward(collate(examples, idx, model.spec().input_kind()), training).logits;
}

inline std::vector<int> batch_labels(const std::vector<TrainExample>& examples,
                                     const EncodedSplit* encoded,
                                     const std::vector<int64_t>& idx) {
  std::vector<int> labels;
  labels.reserve(idx.size());
  for (int64_t i : idx)
    labels.push_back(encoded ? encoded->labels[static_cast<size_t>(i)]
                             : examples[static_cast<size_t>(i)].label);
  return labels;
}

// Fixed-order evaluation in inference mode. Must batch exactly like training
// evaluation so repeated calls reproduce results bitwise.
inline EvalResult evaluate_batches(Model& model, const std::vector<TrainExample>& examples,
                                   const EncodedSplit* encoded, const TrainConfig& config,
                                   const std::optional<std::pair<double, double>>& weights) {
  nn::NoGradGuard ng;
  const int64_t n =
      encoded ? static_cast<int64_t>(encoded->feats.size()) : static_cast<int64_t>(examples.size());
  if (n == 0) throw Error("evaluate: empty example set");
  EvalResult result;
  result.scores.reserve(static_cast<size_t>(n));
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (int64_t start = 0; start < n; start += config.batch_size) {
    const int64_t count = std::min(config.batch_size, n - start);
    std::vector<int64_t> idx(static_cast<size_t>(count));
    std::iota(idx.begin(), idx.end(), start);
    const nn::Var logits = batch_logits(model, examples, encoded, idx, /*training=*/false);
    const std::vector<int> labels = batch_labels(examples, encoded, idx);
    loss_sum +=
        static_cast<double>(compute_loss(config.loss, logits, labels, weights).value().data()[0]) *
        static_cast<double>(count);
    const auto scores = Model::logits_to_scores(logits.value(), model.spec().head_kind());
    for (int64_t i = 0; i < count; ++i) {
      const double s = scores[static_cast<size_t>(i)];
      if ((s >= 0.5 ? 1 : 0) == labels[static_cast<size_t>(i)]) ++correct;
      result.scores.push_back(s);
    }
  }
  result.loss = loss_sum / static_cast<double>(n);
  result.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

}  // namespace detail

// Resolved WEIGHTED_BCE class weights: explicit config values win, otherwise
// training-split frequencies. Other losses use none.
inline std::optional<std::pair<double, double>> resolve_class_weights(
    const TrainConfig& config, const std::vector<TrainExample>& train_examples) {
  if (config.loss != LossKind::kWeightedBce) return std::nullopt;
  if (config.class_weights) return config.class_weights;
  std::vector<int> labels;
  labels.reserve(train_examples.size());
  for (const TrainExample& ex : train_examples) labels.push_back(ex.label);
  return derive_class_weights(labels);
}

// Loss and accuracy (threshold 0.5) over one example set, batched like the
// training loop's validation pass. `weights` must be the resolved training
// weights when the loss is WEIGHTED_BCE.
inline EvalResult evaluate_split(Model& model, const std::vector<TrainExample>& examples,
                                 const TrainConfig& config,
                                 const std::optional<std::pair<double, double>>& weights = {}) {
  if (model.spec().frozen_backbone) {
    const auto encoded = detail::encode_frozen_split(model, examples, config.batch_size);
    return detail::evaluate_batches(model, examples, &encoded, config, weights);
  }
  return detail::evaluate_batches(model, examples, nullptr, config, weights);
}

// One-pass normalization-statistics calibration on a representative example
// set. Run this before training a frozen backbone that was never fit to data;
// models without such statistics are unaffected.
inline void calibrate_model(Model& model, const std::vector<TrainExample>& examples) {
  if (examples.empty()) throw Error("calibrate_model: empty example set");
  model.calibrate(collate(examples, detail::iota_idx(static_cast<int64_t>(examples.size())),
                          model.spec().input_kind()));
}

namespace detail {

struct ModelSnapshot {
  std::vector<Tensor> params;
  std::vector<Tensor> buffers;

  void capture(const Model& model) {
    params.clear();
    buffers.clear();
    for (const auto& [name, v] : model.named_parameters()) params.push_back(v.value().clone());
    for (const auto& [name, t] : model.named_buffers()) buffers.push_back(t.clone());
  }

  void restore(Model& model) const {
    if (params.empty() && buffers.empty()) return;
    size_t i = 0;
    for (const auto& [name, v] : model.named_parameters()) {
      const Tensor& src = params[i++];
      Tensor dst = v.value();  // handle copy, shares the model's storage
      std::copy(src.data(), src.data() + src.numel(), dst.data());
    }
    size_t j = 0;
    for (const auto& [name, t] : model.named_buffers()) {
      const Tensor& src = buffers[j++];
      Tensor dst = t;
      std::copy(src.data(), src.data() + src.numel(), dst.data());
    }
  }
};

inline void check_loss_head(const Model& model, LossKind loss) {
  const HeadKind head = model.spec().head_kind();
  const bool two_logit_loss = loss == LossKind::kCrossEntropy;
  if (two_logit_loss != (head == HeadKind::kTwoLogit))
    throw Error(std::string("loss ") + loss_kind_name(loss) + " does not fit a " +
                head_kind_name(head) + " head (" + architecture_name(model.architecture()) + ")");
}

}  // namespace detail

// Epoch training with seeded shuffles, per-epoch validation, best-checkpoint
// retention (highest validation accuracy, ties to the earliest epoch), and
// early stopping. On return the model holds the best epoch's parameters and
// buffers, not the last; evaluating it on VAL with evaluate_split reproduces
// history.epochs[best_epoch-1].val_acc exactly. Frozen backbones are encoded
// once up front and run in inference mode throughout, so their parameters
// and statistics never change.
inline TrainHistory train(Model& model, const SplitData& data, const TrainConfig& config) {
  config.validate();
  if (data.train.empty()) throw Error("train: TRAIN split is empty");
  if (data.val.empty()) throw Error("train: VAL split is empty");
  detail::check_loss_head(model, config.loss);
  const auto weights = resolve_class_weights(config, data.train);

  const bool frozen = model.spec().frozen_backbone;
  detail::EncodedSplit enc_train, enc_val;
  if (frozen) {
    enc_train = detail::encode_frozen_split(model, data.train, config.batch_size);
    enc_val = detail::encode_frozen_split(model, data.val, config.batch_size);
  }
  const detail::EncodedSplit* train_enc = frozen ? &enc_train : nullptr;
  const detail::EncodedSplit* val_enc = frozen ? &enc_val : nullptr;

  nn::Optimizer opt(model.trainable_parameters(), config.optim_config());
  Rng rng(config.seed);
  const int64_t n = static_cast<int64_t>(data.train.size());
  std::vector<int64_t> order = detail::iota_idx(n);

  TrainHistory history;
  EarlyStopper stopper(config.early_stop_patience);
  detail::ModelSnapshot best;

  for (int64_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(rng.below(static_cast<uint64_t>(i + 1)))]);

    double loss_sum = 0.0;
    int64_t batch_index = 0;
    for (int64_t start = 0; start < n; start += config.batch_size) {
      ++batch_index;
      const int64_t count = std::min(config.batch_size, n - start);
      const std::vector<int64_t> idx(order.begin() + start, order.begin() + start + count);
      const nn::Var logits =
          detail::batch_logits(model, data.train, train_enc, idx, /*training=*/true);
      const nn::Var loss =
          compute_loss(config.loss, logits, detail::batch_labels(data.train, train_enc, idx),
                       weights);
      const double loss_value = static_cast<double>(loss.value().data()[0]);
      if (!std::isfinite(loss_value))
        throw DivergenceError("training diverged: non-finite loss at epoch " +
                                  std::to_string(epoch) + ", batch " + std::to_string(batch_index),
                              static_cast<int>(epoch), static_cast<int>(batch_index));
      opt.zero_grad();
      nn::backward(loss);
      opt.step();
      loss_sum += loss_value * static_cast<double>(count);
    }

    const EvalResult val = detail::evaluate_batches(model, data.val, val_enc, config, weights);
    // A step can blow the parameters up after the last finite train loss; the
    // validation pass sees the post-step model, so gate on it too. The loss
    // alone is not enough: the probability clamp inside the loss maps NaN
    // logits to a large finite value, while the scores stay NaN.
    bool val_finite = std::isfinite(val.loss);
    for (double s : val.scores)
      if (!std::isfinite(s)) {
        val_finite = false;
        break;
      }
    if (!val_finite)
      throw DivergenceError("training diverged: non-finite validation output at epoch " +
                                std::to_string(epoch),
                            static_cast<int>(epoch), 0);
    history.epochs.push_back({loss_sum / static_cast<double>(n), val.loss, val.accuracy});

    const bool stop = stopper.observe(val.accuracy);
    if (stopper.best_epoch() == epoch) best.capture(model);
    if (stop) {
      history.stopped_early = epoch < config.max_epochs;
      break;
    }
  }

  history.best_epoch = stopper.best_epoch();
  best.restore(model);
  return history;
}

// ---------------------------------------------------------------------------
// Capacity runs: step-bounded overfit on a single example set.
// ---------------------------------------------------------------------------

struct OverfitResult {
  int64_t steps = 0;
  double accuracy = 0.0;  // on the training examples, threshold 0.5
};

// Optimizes on shuffled batches of `examples` until the set is fit to
// `target_accuracy` (checked after each full pass) or `max_steps` optimizer
// steps have run. Accuracy is measured in inference mode on the same set.
inline OverfitResult overfit_steps(Model& model, const std::vector<TrainExample>& examples,
                                   const TrainConfig& config, int64_t max_steps,
                                   double target_accuracy = 0.95) {
  config.validate();
  if (examples.empty()) throw Error("overfit_steps: empty example set");
  if (max_steps < 1) throw Error("overfit_steps: max_steps must be >= 1");
  detail::check_loss_head(model, config.loss);
  const auto weights = resolve_class_weights(config, examples);

  const bool frozen = model.spec().frozen_backbone;
  detail::EncodedSplit encoded;
  if (frozen) encoded = detail::encode_frozen_split(model, examples, config.batch_size);
  const detail::EncodedSplit* enc = frozen ? &encoded : nullptr;

  nn::Optimizer opt(model.trainable_parameters(), config.optim_config());
  Rng rng(config.seed);
  const int64_t n = static_cast<int64_t>(examples.size());
  std::vector<int64_t> order = detail::iota_idx(n);

  OverfitResult result;
  int64_t pass = 0;
  while (result.steps < max_steps) {
    ++pass;
    int64_t batch_index = 0;
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(rng.below(static_cast<uint64_t>(i + 1)))]);
    for (int64_t start = 0; start < n && result.steps < max_steps;
         start += config.batch_size) {
      ++batch_index;
      const int64_t count = std::min(config.batch_size, n - start);
      const std::vector<int64_t> idx(order.begin() + start, order.begin() + start + count);
      const nn::Var logits = detail::batch_logits(model, examples, enc, idx, /*training=*/true);
      const nn::Var loss =
          compute_loss(config.loss, logits, detail::batch_labels(examples, enc, idx), weights);
      if (!std::isfinite(static_cast<double>(loss.value().data()[0])))
        throw DivergenceError("overfit run diverged: non-finite loss at step " +
                                  std::to_string(result.steps + 1),
                              static_cast<int>(pass), static_cast<int>(batch_index));
      opt.zero_grad();
      nn::backward(loss);
      opt.step();
      ++result.steps;
    }
    result.accuracy =
        detail::evaluate_batches(model, examples, enc, config, weights).accuracy;
    if (result.accuracy >= target_accuracy) return result;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Run directory: config.resolved, history.csv, best.ckpt, test_scores.tsv.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json resolved_config_json(const Model& model, const SplitData& data,
                                                   const TrainConfig& config,
                                                   const FrontendConfig& fe) {
  const auto weights = resolve_class_weights(config, data.train);
  int64_t trainable = 0;
  for (const auto& [name, v] : model.named_parameters())
    if (v.requires_grad()) trainable += v.numel();

  nlohmann::ordered_json j;
  j["model"] = {
      {"architecture", architecture_name(model.architecture())},
      {"pretrained_backbone", model.spec().pretrained_backbone},
      {"frozen_backbone", model.spec().frozen_backbone},
      {"input_kind", input_kind_name(model.spec().input_kind())},
      {"head", head_kind_name(model.spec().head_kind())},
      {"sequence_modeling", sequence_modeling(model.architecture())},
      {"seed", model.seed()},
      {"parameters", model.parameter_count()},
      {"trainable_parameters", trainable},
  };
  j["frontend"] = {
      {"target_hz", fe.target_hz},     {"clip_duration_s", fe.duration_s},
      {"n_mels", fe.n_mels},           {"n_fft", fe.n_fft},
      {"hop", fe.hop},                 {"win_frames", fe.win_frames},
      {"stride_frames", fe.stride_frames},
      {"standardize_image", fe.standardize_image},
  };
  nlohmann::ordered_json t;
  t["optimizer"] = nn::optim_kind_name(config.optimizer);
  t["learning_rate"] = config.learning_rate;
  t["batch_size"] = config.batch_size;
  t["max_epochs"] = config.max_epochs;
  t["loss"] = loss_kind_name(config.loss);
  t["early_stop_patience"] = config.early_stop_patience;
  t["seed"] = config.seed;
  if (weights)
    t["class_weights"] = {{"real", weights->first}, {"fake", weights->second}};
  else
    t["class_weights"] = nullptr;
  t["beta1"] = config.beta1;
  t["beta2"] = config.beta2;
  t["eps"] = config.eps;
  if (config.optimizer == nn::OptimKind::kAdamW) t["weight_decay"] = config.weight_decay;
  j["train"] = t;
  j["data"] = {
      {"train_clips", data.train.size()},
      {"val_clips", data.val.size()},
      {"test_clips", data.test.size()},
  };
  return j;
}

// Trains, restores the best epoch, scores the TEST split, and writes the run
// directory. Reruns with identical inputs produce byte-identical files.
inline TrainHistory run_experiment(Model& model, const SplitData& data, const TrainConfig& config,
                                   const std::filesystem::path& run_dir,
                                   const FrontendConfig& fe = {}) {
  std::error_code ec;
  std::filesystem::create_directories(run_dir, ec);
  if (!std::filesystem::is_directory(run_dir))
    throw IoError("cannot create run directory: " + run_dir.string());

  const TrainHistory history = train(model, data, config);

  write_text_file(run_dir / "config.resolved",
                  resolved_config_json(model, data, config, fe).dump(2) + "\n");

  std::ostringstream csv;
  csv.precision(17);
  csv << "epoch,train_loss,val_loss,val_acc\n";
  for (size_t i = 0; i < history.epochs.size(); ++i) {
    const EpochStats& e = history.epochs[i];
    csv << (i + 1) << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_acc << '\n';
  }
  write_text_file(run_dir / "history.csv", csv.str());

  save_checkpoint(model, run_dir / "best.ckpt");

  if (!data.test.empty()) {
    const auto weights = resolve_class_weights(config, data.train);
    const EvalResult test = evaluate_split(model, data.test, config, weights);
    std::vector<ScoredClip> rows;
    rows.reserve(data.test.size());
    for (size_t i = 0; i < data.test.size(); ++i)
      rows.push_back({data.test[i].clip_id, data.test[i].label, test.scores[i]});
    write_score_file(run_dir / "test_scores.tsv", rows);
  }
  return history;
}

}  // namespace spoofbench
