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
#include <string>
#include <vector>

#include "spoofbench/corpus.hpp"
#include "spoofbench/evalkit.hpp"
#include "spoofbench/frontend.hpp"
#include "spoofbench/nn/layers.hpp"

namespace spoofbench {

// Pretrained audio backbones evaluated as real/fake scorers without any task
// training. The backbones carry no spoofing classes, so two explicit scoring
// rules make them executable: PROJECTION (first principal axis of the batch
// embedding matrix) for every backend, and CLASS_PRIOR (one minus the speech
// probability mass) for the two backends with a native class vocabulary.

enum class ZeroShotBackendId {
  kWav2Vec2Xlsr53 = 0,
  kWhisperSmall = 1,
  kWhisperMedium = 2,
  kPannsCnn14 = 3,
  kWavlmBasePlus = 4,
  kAst = 5,
};

inline const char* zero_shot_backend_name(ZeroShotBackendId id) {
  switch (id) {
    case ZeroShotBackendId::kWav2Vec2Xlsr53: return "WAV2VEC2_XLSR_53";
    case ZeroShotBackendId::kWhisperSmall: return "WHISPER_SMALL";
    case ZeroShotBackendId::kWhisperMedium: return "WHISPER_MEDIUM";
    case ZeroShotBackendId::kPannsCnn14: return "PANNS_CNN14";
    case ZeroShotBackendId::kWavlmBasePlus: return "WAVLM_BASE_PLUS";
    case ZeroShotBackendId::kAst: return "AST";
  }
  throw Error("unknown zero-shot backend enum value");
}

inline ZeroShotBackendId parse_zero_shot_backend(const std::string& s) {
  for (int i = 0; i <= 5; ++i) {
    const auto id = static_cast<ZeroShotBackendId>(i);
    if (s == zero_shot_backend_name(id)) return id;
  }
  throw Error("unknown zero-shot backend: " + s);
}

enum class ScoringRule { kProjection = 0, kClassPrior = 1 };

inline const char* scoring_rule_name(ScoringRule r) {
  switch (r) {
    case ScoringRule::kProjection: return "PROJECTION";
    case ScoringRule::kClassPrior: return "CLASS_PRIOR";
  }
  throw Error("unknown scoring rule enum value");
}

inline ScoringRule parse_scoring_rule(const std::string& s) {
  if (s == "PROJECTION") return ScoringRule::kProjection;
  if (s == "CLASS_PRIOR") return ScoringRule::kClassPrior;
  throw Error("unknown scoring rule: " + s);
}

// Native embedding width of the published backbone.
inline int64_t embedding_dim_of(ZeroShotBackendId id) {
  switch (id) {
    case ZeroShotBackendId::kWav2Vec2Xlsr53: return 1024;
    case ZeroShotBackendId::kWhisperSmall: return 768;
    case ZeroShotBackendId::kWhisperMedium: return 1024;
    case ZeroShotBackendId::kPannsCnn14: return 2048;
    case ZeroShotBackendId::kWavlmBasePlus: return 768;
    case ZeroShotBackendId::kAst: return 768;
  }
  throw Error("unknown zero-shot backend enum value");
}

// Backends trained with an audio-event vocabulary (and therefore eligible for
// CLASS_PRIOR scoring).
inline bool has_class_vocabulary(ZeroShotBackendId id) {
  return id == ZeroShotBackendId::kPannsCnn14 || id == ZeroShotBackendId::kAst;
}

// AudioSet-sized vocabulary; the ontology keeps the human-speech entries in
// one leading block, which is all the speech-mass rule needs.
constexpr int64_t kClassVocabSize = 527;
constexpr int64_t kSpeechClassCount = 14;

// All zero-shot backends consume 16 kHz audio.
constexpr int kZeroShotRateHz = 16000;

struct ZeroShotBackend {
  ZeroShotBackendId id = ZeroShotBackendId::kWav2Vec2Xlsr53;
  int64_t embedding_dim = 0;
  ScoringRule scoring_rule = ScoringRule::kProjection;
};

inline ZeroShotBackend make_backend(ZeroShotBackendId id,
                                    ScoringRule rule = ScoringRule::kProjection) {
  if (rule == ScoringRule::kClassPrior && !has_class_vocabulary(id))
    throw Error(std::string("scoring rule CLASS_PRIOR needs a class vocabulary, which ") +
                zero_shot_backend_name(id) + " does not have");
  return {id, embedding_dim_of(id), rule};
}

// ---------------------------------------------------------------------------
// Batch scoring rules.
// ---------------------------------------------------------------------------

inline double batch_median(std::vector<double> v) {
  if (v.empty()) throw Error("median of an empty set");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Projects each embedding onto the first principal axis of the centered batch
// matrix (power iteration), with the sign fixed so the batch median is <= 0.
// Higher = more FAKE, matching the fine-tuned scoring polarity.
inline std::vector<double> projection_scores(
    const std::vector<std::vector<double>>& embeddings) {
  const size_t n = embeddings.size();
  if (n < 2) throw Error("projection scoring needs at least 2 clips, got " + std::to_string(n));
  const size_t d = embeddings[0].size();
  for (const auto& e : embeddings)
    if (e.size() != d) throw Error("projection scoring: ragged embedding matrix");

  std::vector<double> mean(d, 0.0);
  for (const auto& e : embeddings)
    for (size_t j = 0; j < d; ++j) mean[j] += e[j];
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<std::vector<double>> centered(n, std::vector<double>(d));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) centered[i][j] = embeddings[i][j] - mean[j];

  // Deterministic power iteration on the centered matrix; a zero matrix
  // (identical embeddings) keeps the start vector and scores everything 0.
  Rng rng(0x9e3779b97f4a7c15ULL);
  std::vector<double> v(d);
  double norm = 0.0;
  for (size_t j = 0; j < d; ++j) {
    v[j] = rng.normal();
    norm += v[j] * v[j];
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;

  std::vector<double> u(n);
  for (int iter = 0; iter < 200; ++iter) {
    for (size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (size_t j = 0; j < d; ++j) s += centered[i][j] * v[j];
      u[i] = s;
    }
    std::vector<double> w(d, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j) w[j] += centered[i][j] * u[i];
    double wn = 0.0;
    for (double x : w) wn += x * x;
    wn = std::sqrt(wn);
    if (wn < 1e-30) break;
    for (size_t j = 0; j < d; ++j) v[j] = w[j] / wn;
  }

  std::vector<double> scores(n);
  for (size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < d; ++j) s += centered[i][j] * v[j];
    scores[i] = s;
  }
  if (batch_median(scores) > 0.0)
    for (double& s : scores) s = -s;
  return scores;
}

// ---------------------------------------------------------------------------
// Backend encoders.
//
// Published weights are not bundled and cannot be fetched offline, so the
// weight source is explicit: "auto" resolves the published checkpoint (and
// errors in this environment, never substituting anything), while
// "builtin:<seed>" requests a deterministic seed-initialized encoder of the
// backend's family shape at desk scale, keeping the native embedding width.
// ---------------------------------------------------------------------------

class ZeroShotModel {
 public:
  ZeroShotModel(ZeroShotBackend backend, const std::string& weights)
      : backend_(backend), reg_(parse_weights_source(backend, weights)) {
    switch (family()) {
      case Family::kWaveTransformer:
        conv1d_.emplace_back(reg_, "encoder.conv1", 1, 32, 16, 8, 4);
        conv1d_.emplace_back(reg_, "encoder.conv2", 32, 64, 8, 8, 2);
        conv1d_.emplace_back(reg_, "encoder.conv3", 64, kWidth, 4, 4, 1);
        blocks_.emplace_back(reg_, "encoder.block1", kWidth, 4, 2 * kWidth);
        break;
      case Family::kMelTransformer:
        conv1d_.emplace_back(reg_, "encoder.conv1", 80, kWidth, 3, 2, 1);
        conv1d_.emplace_back(reg_, "encoder.conv2", kWidth, kWidth, 3, 2, 1);
        blocks_.emplace_back(reg_, "encoder.block1", kWidth, 4, 2 * kWidth);
        if (backend_.id == ZeroShotBackendId::kWhisperMedium)
          blocks_.emplace_back(reg_, "encoder.block2", kWidth, 4, 2 * kWidth);
        break;
      case Family::kMelCnn:
        conv2d_.emplace_back(reg_, "encoder.conv1", 1, 16, 3, 2, 1);
        conv2d_.emplace_back(reg_, "encoder.conv2", 16, 32, 3, 2, 1);
        conv2d_.emplace_back(reg_, "encoder.conv3", 32, kWidth, 3, 2, 1);
        break;
      case Family::kPatchTransformer:
        patch_embed_ = nn::LinearLayer(reg_, "encoder.patch_embed", kPatch * kPatch, kWidth);
        blocks_.emplace_back(reg_, "encoder.block1", kWidth, 4, 2 * kWidth);
        break;
    }
    proj_ = nn::LinearLayer(reg_, "proj", kWidth, backend_.embedding_dim);
    if (has_class_vocabulary(backend_.id))
      class_head_ = nn::LinearLayer(reg_, "class_head", backend_.embedding_dim, kClassVocabSize);
  }

  const ZeroShotBackend& backend() const { return backend_; }
  uint64_t seed() const { return reg_.seed(); }

  // One finite vector of the backend's native width; deterministic per clip.
  std::vector<double> embed(const AudioClip& clip) {
    nn::NoGradGuard ng;
    const Tensor e = embed_var(clip).value();
    std::vector<double> out(static_cast<size_t>(e.numel()));
    for (int64_t i = 0; i < e.numel(); ++i) {
      if (!std::isfinite(e.data()[i]))
        throw Error(std::string("zero-shot embed produced a non-finite value (") +
                    zero_shot_backend_name(backend_.id) + ")");
      out[static_cast<size_t>(i)] = static_cast<double>(e.data()[i]);
    }
    return out;
  }

  // Distribution over the native vocabulary; vocabulary backends only.
  std::vector<double> class_probs(const AudioClip& clip) {
    if (!has_class_vocabulary(backend_.id))
      throw Error(std::string(zero_shot_backend_name(backend_.id)) +
                  " has no class vocabulary");
    nn::NoGradGuard ng;
    const Tensor logits = class_head_.forward(embed_var(clip)).value();
    double mx = -1e300;
    for (int64_t i = 0; i < logits.numel(); ++i)
      mx = std::max(mx, static_cast<double>(logits.data()[i]));
    std::vector<double> probs(static_cast<size_t>(logits.numel()));
    double sum = 0.0;
    for (int64_t i = 0; i < logits.numel(); ++i) {
      probs[static_cast<size_t>(i)] = std::exp(static_cast<double>(logits.data()[i]) - mx);
      sum += probs[static_cast<size_t>(i)];
    }
    for (double& p : probs) p /= sum;
    return probs;
  }

  // CLASS_PRIOR score: one minus the speech-block probability mass.
  double class_prior_score(const AudioClip& clip) {
    const std::vector<double> probs = class_probs(clip);
    double speech = 0.0;
    for (int64_t i = 0; i < kSpeechClassCount; ++i) speech += probs[static_cast<size_t>(i)];
    return 1.0 - speech;
  }

 private:
  enum class Family { kWaveTransformer, kMelTransformer, kMelCnn, kPatchTransformer };
  static constexpr int64_t kWidth = 64;
  static constexpr int64_t kPatch = 16;

  Family family() const {
    switch (backend_.id) {
      case ZeroShotBackendId::kWav2Vec2Xlsr53:
      case ZeroShotBackendId::kWavlmBasePlus: return Family::kWaveTransformer;
      case ZeroShotBackendId::kWhisperSmall:
      case ZeroShotBackendId::kWhisperMedium: return Family::kMelTransformer;
      case ZeroShotBackendId::kPannsCnn14: return Family::kMelCnn;
      case ZeroShotBackendId::kAst: return Family::kPatchTransformer;
    }
    throw Error("unknown zero-shot backend enum value");
  }

  static uint64_t parse_weights_source(const ZeroShotBackend& backend,
                                       const std::string& weights) {
    const std::string prefix = "builtin:";
    if (weights.rfind(prefix, 0) == 0) {
      const std::string digits = weights.substr(prefix.size());
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
        throw Error("builtin weights source needs an unsigned seed: " + weights);
      return std::stoull(digits);
    }
    if (weights == "auto")
      throw WeightsUnavailableError(
          std::string("zero-shot backend ") + zero_shot_backend_name(backend.id) +
          ": published weights are not available in this environment; pass "
          "weights=builtin:<seed> for the deterministic surrogate encoder");
    throw Error("unknown weights source: " + weights + " (expected auto or builtin:<seed>)");
  }

  // [1, T, D] -> [1, D]
  static Tensor mean_tokens(const Tensor& t) {
    const int64_t n = t.dim(1), d = t.dim(2);
    Tensor out = Tensor::zeros({1, d});
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < d; ++j) out.data()[j] += t.data()[i * d + j];
    for (int64_t j = 0; j < d; ++j) out.data()[j] /= static_cast<float>(n);
    return out;
  }

  MelSpectrogram mel_input(const AudioClip& clip, int n_mels, int n_fft, int hop) const {
    return to_db_and_normalize(mel_spectrogram(clip, n_mels, n_fft, hop));
  }

  nn::Var run_blocks(nn::Var tokens) const {
    for (const nn::TransformerBlock& b : blocks_) tokens = b.forward(tokens);
    return nn::make_const(mean_tokens(tokens.value()));
  }

  nn::Var embed_var(const AudioClip& clip) {
    validate_clip(clip);
    switch (family()) {
      case Family::kWaveTransformer: {
        Tensor wave = Tensor::zeros({1, 1, clip.length()});
        std::copy(clip.samples.begin(), clip.samples.end(), wave.data());
        nn::Var x = nn::make_const(wave);
        for (const nn::Conv1dLayer& c : conv1d_) x = nn::gelu(c.forward(x));
        return proj_.forward(run_blocks(nn::transpose_12(x)));
      }
      case Family::kMelTransformer: {
        const MelSpectrogram mel = mel_input(clip, 80, 512, 256);
        nn::Var x = nn::make_const(mel.values.reshaped({1, mel.n_mels(), mel.n_frames()}));
        for (const nn::Conv1dLayer& c : conv1d_) x = nn::gelu(c.forward(x));
        return proj_.forward(run_blocks(nn::transpose_12(x)));
      }
      case Family::kMelCnn: {
        const MelSpectrogram mel = mel_input(clip, 64, 1024, 512);
        nn::Var x =
            nn::make_const(mel.values.reshaped({1, 1, mel.n_mels(), mel.n_frames()}));
        for (const nn::Conv2dLayer& c : conv2d_) x = nn::relu(c.forward(x));
        return proj_.forward(nn::mean_hw(x));
      }
      case Family::kPatchTransformer: {
        const MelSpectrogram mel = mel_input(clip, 64, 1024, 512);
        const int64_t n_mels = mel.n_mels(), n_frames = mel.n_frames();
        const int64_t rows = n_mels / kPatch;
        const int64_t cols = (n_frames + kPatch - 1) / kPatch;
        Tensor patches = Tensor::zeros({rows * cols, kPatch * kPatch});
        for (int64_t pr = 0; pr < rows; ++pr)
          for (int64_t pc = 0; pc < cols; ++pc) {
            float* dst = patches.data() + (pr * cols + pc) * kPatch * kPatch;
            for (int64_t i = 0; i < kPatch; ++i)
              for (int64_t j = 0; j < kPatch; ++j) {
                const int64_t f = pc * kPatch + j;
                dst[i * kPatch + j] =
                    f < n_frames ? mel.values.data()[(pr * kPatch + i) * n_frames + f] : 0.0f;
              }
          }
        nn::Var tok = patch_embed_.forward(nn::make_const(patches));
        tok = nn::reshape(tok, {int64_t{1}, rows * cols, kWidth});
        return proj_.forward(run_blocks(tok));
      }
    }
    throw Error("unknown zero-shot backend enum value");
  }

  ZeroShotBackend backend_;
  nn::ParamRegistry reg_;
  std::vector<nn::Conv1dLayer> conv1d_;
  std::vector<nn::Conv2dLayer> conv2d_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LinearLayer patch_embed_;
  nn::LinearLayer proj_;
  nn::LinearLayer class_head_;
};

// ---------------------------------------------------------------------------
// Batch scoring and evaluation.
// ---------------------------------------------------------------------------

// One score per clip, higher = more FAKE.
inline std::vector<double> zero_shot_score(ZeroShotModel& model,
                                           const std::vector<AudioClip>& clips) {
  if (model.backend().scoring_rule == ScoringRule::kProjection) {
    if (clips.size() < 2)
      throw Error("zero-shot projection scoring needs at least 2 clips, got " +
                  std::to_string(clips.size()));
    std::vector<std::vector<double>> embeddings;
    embeddings.reserve(clips.size());
    for (const AudioClip& clip : clips) embeddings.push_back(model.embed(clip));
    return projection_scores(embeddings);
  }
  if (clips.empty()) throw Error("zero-shot scoring: no clips");
  std::vector<double> scores;
  scores.reserve(clips.size());
  for (const AudioClip& clip : clips) scores.push_back(model.class_prior_score(clip));
  return scores;
}

struct ZeroShotResult {
  MetricsReport report;
  std::vector<ScoredClip> scores;  // TEST split, corpus order
};

// Scores the TEST split and evaluates with the hard-decision threshold at the
// batch median score.
inline ZeroShotResult evaluate_zero_shot(ZeroShotModel& model,
                                         const std::vector<ClipRecord>& records,
                                         const SplitAssignment& splits,
                                         double clip_duration_s = 5.0) {
  std::vector<const ClipRecord*> test;
  for (const ClipRecord& rec : records)
    if (splits.at(rec.clip_id) == Split::kTest) test.push_back(&rec);
  if (test.empty()) throw DegenerateInputError("zero-shot evaluation: TEST split is empty");

  std::vector<AudioClip> clips;
  clips.reserve(test.size());
  for (const ClipRecord* rec : test) {
    AudioClip clip = load_and_resample(rec->audio_path.string(), kZeroShotRateHz);
    clips.push_back(fix_duration(clip, clip_duration_s));
  }
  const std::vector<double> scores = zero_shot_score(model, clips);

  ZeroShotResult result;
  ScoreSet set;
  set.scores = scores;
  for (size_t i = 0; i < test.size(); ++i) {
    set.labels.push_back(static_cast<int>(test[i]->label));
    result.scores.push_back({test[i]->clip_id, static_cast<int>(test[i]->label), scores[i]});
  }
  result.report = evaluate_scores(set, ThresholdPolicy::fixed(batch_median(scores)));
  return result;
}

}  // namespace spoofbench
