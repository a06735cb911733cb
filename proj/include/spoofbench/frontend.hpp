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
#include <cstdio>
#include <string>
#include <vector>

#include "spoofbench/common.hpp"
#include "spoofbench/dsp.hpp"
#include "spoofbench/tensor.hpp"
#include "spoofbench/wav.hpp"

namespace spoofbench {

struct AudioClip {
  std::vector<float> samples;  // mono, in [-1, 1]
  int sample_rate_hz = 0;

  int64_t length() const { return static_cast<int64_t>(samples.size()); }
  double duration_s() const {
    return sample_rate_hz > 0 ? static_cast<double>(length()) / sample_rate_hz : 0.0;
  }
};

enum class MelScale { kPower, kDb, kDbNormalized };

struct MelSpectrogram {
  Tensor values;  // [n_mels, n_frames]
  double frame_hop_s = 0.0;
  MelScale scale = MelScale::kPower;

  int64_t n_mels() const { return values.defined() ? values.dim(0) : 0; }
  int64_t n_frames() const { return values.defined() ? values.dim(1) : 0; }
};

struct ImageTensor {
  Tensor values;  // [3, 224, 224]
};

struct FrontendConfig {
  int target_hz = 16000;
  double duration_s = 5.0;
  int n_mels = 64;
  int n_fft = 1024;
  int hop = 512;
  int win_frames = 64;      // temporal windowing for sequence models
  int stride_frames = 32;
  bool standardize_image = false;  // subtract pretraining channel statistics
};

constexpr int kImageSize = 224;

inline void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate_hz <= 0) throw Error("audio clip: sample rate must be positive");
  if (clip.samples.empty()) throw Error("audio clip: zero-length audio");
  for (float v : clip.samples) {
    if (!std::isfinite(v)) throw Error("audio clip: non-finite sample");
    if (std::fabs(v) > 1.0f + 1e-6f) throw Error("audio clip: sample out of [-1, 1]");
  }
}

// Reads a PCM WAV, downmixes stereo by channel mean, scales to [-1, 1], and
// resamples to target_hz with a band-limited polyphase filter.
inline AudioClip load_and_resample(const std::string& path, int target_hz = 16000) {
  if (target_hz <= 0) throw Error("load_and_resample: target rate must be positive");
  WavData wav = read_wav(path);
  const int64_t frames = wav.frames();
  std::vector<float> mono(static_cast<size_t>(frames));
  constexpr float kScale = 1.0f / 32768.0f;
  if (wav.channels == 1) {
    for (int64_t i = 0; i < frames; ++i)
      mono[static_cast<size_t>(i)] = static_cast<float>(wav.samples[static_cast<size_t>(i)]) * kScale;
  } else {
    for (int64_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (int c = 0; c < wav.channels; ++c)
        acc += static_cast<double>(wav.samples[static_cast<size_t>(i * wav.channels + c)]);
      mono[static_cast<size_t>(i)] = static_cast<float>(acc / wav.channels * kScale);
    }
  }
  AudioClip clip;
  clip.samples = dsp::resample_poly(mono, wav.sample_rate_hz, target_hz);
  clip.sample_rate_hz = target_hz;
  for (float& v : clip.samples) v = std::clamp(v, -1.0f, 1.0f);
  validate_clip(clip);
  return clip;
}

// Forces the clip to round(seconds * rate) samples: truncates from the front
// (keeping the initial seconds) or zero-pads at the end.
inline AudioClip fix_duration(const AudioClip& clip, double seconds = 5.0) {
  if (seconds <= 0.0) throw Error("fix_duration: seconds must be positive");
  validate_clip(clip);
  const int64_t target = static_cast<int64_t>(std::llround(seconds * clip.sample_rate_hz));
  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples.assign(static_cast<size_t>(target), 0.0f);
  const int64_t n = std::min<int64_t>(target, clip.length());
  std::copy(clip.samples.begin(), clip.samples.begin() + n, out.samples.begin());
  return out;
}

// Power-scale mel spectrogram: Hann STFT (centered, zero-padded edges) through
// a triangular filterbank spanning 0 .. rate/2. n_frames = 1 + floor(len/hop).
inline MelSpectrogram mel_spectrogram(const AudioClip& clip, int n_mels = 64, int n_fft = 1024,
                                      int hop = 512) {
  validate_clip(clip);
  if (n_mels < 64 || n_mels > 128) throw Error("mel_spectrogram: n_mels must be in [64, 128]");
  if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0)
    throw Error("mel_spectrogram: n_fft must be a power of two");
  if (hop <= 0 || hop > n_fft) throw Error("mel_spectrogram: need 0 < hop <= n_fft");

  auto power = dsp::stft_power(clip.samples, n_fft, hop);
  auto fb = dsp::mel_filterbank(n_mels, n_fft, clip.sample_rate_hz);
  const int64_t n_frames = static_cast<int64_t>(power.size());
  const int n_bins = n_fft / 2 + 1;

  MelSpectrogram mel;
  mel.values = Tensor::zeros({n_mels, n_frames});
  mel.frame_hop_s = static_cast<double>(hop) / clip.sample_rate_hz;
  mel.scale = MelScale::kPower;
  float* out = mel.values.data();
  for (int m = 0; m < n_mels; ++m) {
    const auto& row = fb[static_cast<size_t>(m)];
    for (int64_t f = 0; f < n_frames; ++f) {
      const auto& spec = power[static_cast<size_t>(f)];
      double acc = 0.0;
      for (int k = 0; k < n_bins; ++k) acc += row[static_cast<size_t>(k)] * spec[static_cast<size_t>(k)];
      out[m * n_frames + f] = static_cast<float>(acc);
    }
  }
  return mel;
}

// Power -> dB -> [0, 1]: dB = 10*log10(max(p, 1e-10)), clamped to an 80 dB
// window below the clip maximum, then per-clip min-max normalized. A constant
// matrix maps to all zeros.
inline MelSpectrogram to_db_and_normalize(const MelSpectrogram& mel) {
  if (mel.scale != MelScale::kPower) throw Error("to_db_and_normalize: input must be POWER scale");
  const int64_t n = mel.values.numel();
  MelSpectrogram out;
  out.values = Tensor::zeros(mel.values.shape());
  out.frame_hop_s = mel.frame_hop_s;
  out.scale = MelScale::kDbNormalized;

  const float* src = mel.values.data();
  float* dst = out.values.data();
  constexpr double kEps = 1e-10;
  double ref = -1e30;
  std::vector<double> db(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double v = 10.0 * std::log10(std::max(static_cast<double>(src[i]), kEps));
    db[static_cast<size_t>(i)] = v;
    ref = std::max(ref, v);
  }
  double lo = ref, hi = ref;
  for (int64_t i = 0; i < n; ++i) {
    double v = std::clamp(db[static_cast<size_t>(i)], ref - 80.0, ref);
    db[static_cast<size_t>(i)] = v;
    lo = std::min(lo, v);
  }
  const double span = hi - lo;
  if (span <= 0.0) return out;  // constant input -> all zeros
  for (int64_t i = 0; i < n; ++i)
    dst[i] = static_cast<float>((db[static_cast<size_t>(i)] - lo) / span);
  return out;
}

// Channel statistics used when standardize = true (standard pretraining values
// for 3-channel 224x224 inputs).
inline const float* image_channel_means() {
  static const float kMeans[3] = {0.485f, 0.456f, 0.406f};
  return kMeans;
}
inline const float* image_channel_stds() {
  static const float kStds[3] = {0.229f, 0.224f, 0.225f};
  return kStds;
}

// Bilinear resize to 224x224 (corners aligned) and 3-channel replication.
inline ImageTensor to_image(const MelSpectrogram& mel, bool standardize = false) {
  if (mel.scale != MelScale::kDbNormalized) throw Error("to_image: input must be DB_NORMALIZED");
  const int64_t h = mel.n_mels(), w = mel.n_frames();
  std::vector<float> src(mel.values.data(), mel.values.data() + mel.values.numel());
  std::vector<float> plane = dsp::bilinear_resize(src, h, w, kImageSize, kImageSize);

  ImageTensor img;
  img.values = Tensor::zeros({3, kImageSize, kImageSize});
  float* out = img.values.data();
  const int64_t plane_n = kImageSize * kImageSize;
  for (int c = 0; c < 3; ++c) {
    if (standardize) {
      const float mean = image_channel_means()[c];
      const float inv_std = 1.0f / image_channel_stds()[c];
      for (int64_t i = 0; i < plane_n; ++i) out[c * plane_n + i] = (plane[static_cast<size_t>(i)] - mean) * inv_std;
    } else {
      std::copy(plane.begin(), plane.end(), out + c * plane_n);
    }
  }
  return img;
}

// Frame offsets for temporal windowing: 0, stride, 2*stride, ... while the
// offset stays below n_frames - stride + 1. The trailing window may be
// partial; callers zero-pad it.
inline std::vector<int64_t> window_offsets(int64_t n_frames, int64_t stride_frames) {
  std::vector<int64_t> offsets{0};
  for (int64_t off = stride_frames; off < n_frames - stride_frames + 1; off += stride_frames)
    offsets.push_back(off);
  return offsets;
}

// Slices the mel matrix into overlapping windows of win_frames columns
// (zero-padding the final partial window) and renders each via to_image.
inline std::vector<ImageTensor> window_sequence(const MelSpectrogram& mel, int win_frames,
                                                int stride_frames, bool standardize = false) {
  if (mel.scale != MelScale::kDbNormalized)
    throw Error("window_sequence: input must be DB_NORMALIZED");
  if (stride_frames <= 0 || win_frames < stride_frames)
    throw Error("window_sequence: need 0 < stride_frames <= win_frames");
  const int64_t n_mels = mel.n_mels(), n_frames = mel.n_frames();
  std::vector<ImageTensor> out;
  for (int64_t off : window_offsets(n_frames, stride_frames)) {
    MelSpectrogram win;
    win.values = Tensor::zeros({n_mels, win_frames});
    win.frame_hop_s = mel.frame_hop_s;
    win.scale = MelScale::kDbNormalized;
    const int64_t cols = std::min<int64_t>(win_frames, n_frames - off);
    const float* src = mel.values.data();
    float* dst = win.values.data();
    for (int64_t m = 0; m < n_mels; ++m)
      std::copy(src + m * n_frames + off, src + m * n_frames + off + cols, dst + m * win_frames);
    out.push_back(to_image(win, standardize));
  }
  return out;
}

// Convenience: the full default path from a WAV file to a normalized mel.
inline MelSpectrogram mel_from_file(const std::string& path, const FrontendConfig& cfg) {
  AudioClip clip = load_and_resample(path, cfg.target_hz);
  clip = fix_duration(clip, cfg.duration_s);
  return to_db_and_normalize(mel_spectrogram(clip, cfg.n_mels, cfg.n_fft, cfg.hop));
}

// ---------------------------------------------------------------------------
// Mel cache: one binary file per clip holding the DB_NORMALIZED matrix.
// Layout: magic "SPBMELC1", u32 version, u32 n_mels, u32 n_frames,
// u32 hop_samples, u32 sample_rate_hz, then row-major f32 values. All fields
// little-endian.
// ---------------------------------------------------------------------------

constexpr char kMelCacheMagic[9] = "SPBMELC1";
constexpr uint32_t kMelCacheVersion = 1;

inline void save_mel_cache(const std::string& path, const MelSpectrogram& mel, int hop_samples,
                           int sample_rate_hz) {
  if (mel.scale != MelScale::kDbNormalized) throw Error("mel cache: only DB_NORMALIZED is cached");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mel cache: " + path);
  out.write(kMelCacheMagic, 8);
  write_u32(out, kMelCacheVersion);
  write_u32(out, static_cast<uint32_t>(mel.n_mels()));
  write_u32(out, static_cast<uint32_t>(mel.n_frames()));
  write_u32(out, static_cast<uint32_t>(hop_samples));
  write_u32(out, static_cast<uint32_t>(sample_rate_hz));
  write_f32_array(out, mel.values.data(), mel.values.numel());
  if (!out) throw IoError("short write on mel cache: " + path);
}

inline MelSpectrogram load_mel_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read mel cache: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(kMelCacheMagic, 8))
    throw IoError("mel cache: bad magic in " + path);
  const uint32_t version = read_u32(in);
  if (version != kMelCacheVersion) throw IoError("mel cache: unsupported version in " + path);
  const uint32_t n_mels = read_u32(in);
  const uint32_t n_frames = read_u32(in);
  const uint32_t hop = read_u32(in);
  const uint32_t rate = read_u32(in);
  if (n_mels == 0 || n_frames == 0 || rate == 0) throw IoError("mel cache: bad header in " + path);
  MelSpectrogram mel;
  mel.values = Tensor::zeros({static_cast<int64_t>(n_mels), static_cast<int64_t>(n_frames)});
  mel.frame_hop_s = static_cast<double>(hop) / rate;
  mel.scale = MelScale::kDbNormalized;
  read_f32_array(in, mel.values.data(), mel.values.numel());
  if (!in) throw IoError("mel cache: truncated file " + path);
  return mel;
}

}  // namespace spoofbench
