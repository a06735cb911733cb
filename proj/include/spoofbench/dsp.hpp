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

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "spoofbench/common.hpp"

namespace spoofbench {
namespace dsp {

constexpr double kPi = 3.14159265358979323846;

// In-place iterative radix-2 complex FFT. n must be a power of two.
inline void fft(std::vector<double>& re, std::vector<double>& im) {
  const size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0) throw Error("fft: size must be a power of two");
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * kPi / static_cast<double>(len);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        size_t a = i + k, b = i + k + len / 2;
        double xr = re[b] * cr - im[b] * ci;
        double xi = re[b] * ci + im[b] * cr;
        re[b] = re[a] - xr;
        im[b] = im[a] - xi;
        re[a] += xr;
        im[a] += xi;
        double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

// Periodic Hann window, the STFT convention used throughout.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

// Power spectrogram |STFT|^2 with centered frames and zero padding outside the
// signal. Output is frame-major: frames x (n_fft/2 + 1) bins.
// n_frames = 1 + floor(len / hop).
inline std::vector<std::vector<double>> stft_power(const std::vector<float>& x, int n_fft,
                                                   int hop) {
  if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0) throw Error("stft: n_fft must be a power of two");
  if (hop <= 0 || hop > n_fft) throw Error("stft: need 0 < hop <= n_fft");
  const int64_t len = static_cast<int64_t>(x.size());
  if (len < 1) throw Error("stft: empty signal");
  const int64_t n_frames = 1 + len / hop;
  const int n_bins = n_fft / 2 + 1;
  std::vector<double> window = hann_window(n_fft);
  std::vector<std::vector<double>> power(static_cast<size_t>(n_frames));
  std::vector<double> re(static_cast<size_t>(n_fft)), im(static_cast<size_t>(n_fft));
  for (int64_t f = 0; f < n_frames; ++f) {
    const int64_t start = f * hop - n_fft / 2;  // centered
    for (int i = 0; i < n_fft; ++i) {
      int64_t idx = start + i;
      double v = (idx >= 0 && idx < len) ? static_cast<double>(x[static_cast<size_t>(idx)]) : 0.0;
      re[static_cast<size_t>(i)] = v * window[static_cast<size_t>(i)];
      im[static_cast<size_t>(i)] = 0.0;
    }
    fft(re, im);
    auto& row = power[static_cast<size_t>(f)];
    row.resize(static_cast<size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k)
      row[static_cast<size_t>(k)] = re[static_cast<size_t>(k)] * re[static_cast<size_t>(k)] +
                                    im[static_cast<size_t>(k)] * im[static_cast<size_t>(k)];
  }
  return power;
}

// Slaney-style mel scale (linear below 1 kHz, logarithmic above).
inline double hz_to_mel(double hz) {
  if (hz < 1000.0) return hz * 3.0 / 200.0;
  return 15.0 + 27.0 * std::log(hz / 1000.0) / std::log(6.4);
}

inline double mel_to_hz(double mel) {
  if (mel < 15.0) return mel * 200.0 / 3.0;
  return 1000.0 * std::exp(std::log(6.4) * (mel - 15.0) / 27.0);
}

// Triangular mel filterbank over FFT bins, spanning 0 .. sample_rate/2, with
// Slaney area normalization. Rows: n_mels, columns: n_fft/2 + 1.
inline std::vector<std::vector<double>> mel_filterbank(int n_mels, int n_fft, int sample_rate_hz) {
  const int n_bins = n_fft / 2 + 1;
  const double f_max = sample_rate_hz / 2.0;
  std::vector<double> mel_pts(static_cast<size_t>(n_mels) + 2);
  const double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(f_max);
  for (int i = 0; i < n_mels + 2; ++i)
    mel_pts[static_cast<size_t>(i)] = mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1);
  std::vector<double> hz_pts(mel_pts.size());
  for (size_t i = 0; i < mel_pts.size(); ++i) hz_pts[i] = mel_to_hz(mel_pts[i]);

  std::vector<std::vector<double>> fb(static_cast<size_t>(n_mels),
                                      std::vector<double>(static_cast<size_t>(n_bins), 0.0));
  for (int m = 0; m < n_mels; ++m) {
    const double f_left = hz_pts[static_cast<size_t>(m)];
    const double f_center = hz_pts[static_cast<size_t>(m) + 1];
    const double f_right = hz_pts[static_cast<size_t>(m) + 2];
    const double norm = 2.0 / (f_right - f_left);
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / n_fft;
      double up = (f_center - f_left) > 0 ? (f - f_left) / (f_center - f_left) : 0.0;
      double down = (f_right - f_center) > 0 ? (f_right - f) / (f_right - f_center) : 0.0;
      double w = std::max(0.0, std::min(up, down));
      fb[static_cast<size_t>(m)][static_cast<size_t>(k)] = w * norm;
    }
  }
  return fb;
}

inline std::vector<double> mel_center_frequencies(int n_mels, int sample_rate_hz) {
  const double f_max = sample_rate_hz / 2.0;
  const double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(f_max);
  std::vector<double> centers(static_cast<size_t>(n_mels));
  for (int m = 0; m < n_mels; ++m)
    centers[static_cast<size_t>(m)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (n_mels + 1));
  return centers;
}

namespace detail {
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 64; ++k) {
    double t = x / (2.0 * k);
    term *= t * t;
    sum += term;
    if (term < 1e-21 * sum) break;
  }
  return sum;
}
}  // namespace detail

// Band-limited polyphase resampler (upsample by L, windowed-sinc lowpass,
// downsample by M). Kaiser window, beta = 5, half-width 10 zero crossings.
// Output length is ceil(len * L / M). Equal rates bypass the filter.
inline std::vector<float> resample_poly(const std::vector<float>& x, int in_rate_hz,
                                        int out_rate_hz) {
  if (in_rate_hz <= 0 || out_rate_hz <= 0) throw Error("resample: rates must be positive");
  if (x.empty()) throw Error("resample: empty signal");
  if (in_rate_hz == out_rate_hz) return x;

  const int64_t g = std::gcd(in_rate_hz, out_rate_hz);
  const int64_t up = out_rate_hz / g;
  const int64_t down = in_rate_hz / g;
  const int64_t max_rate = std::max(up, down);
  const int64_t half = 10 * max_rate;
  const int64_t n_taps = 2 * half + 1;
  const double cutoff = 1.0 / static_cast<double>(max_rate);  // fraction of upsampled Nyquist
  const double beta = 5.0;

  std::vector<double> h(static_cast<size_t>(n_taps));
  const double i0b = detail::bessel_i0(beta);
  for (int64_t i = 0; i < n_taps; ++i) {
    const double t = static_cast<double>(i - half);
    const double arg = kPi * cutoff * t;
    const double sinc = (t == 0.0) ? 1.0 : std::sin(arg) / arg;
    const double r = t / static_cast<double>(half);
    const double win = detail::bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    h[static_cast<size_t>(i)] = cutoff * sinc * win * static_cast<double>(up);
  }

  const int64_t in_len = static_cast<int64_t>(x.size());
  const int64_t out_len = (in_len * up + down - 1) / down;
  std::vector<float> y(static_cast<size_t>(out_len));
  for (int64_t n = 0; n < out_len; ++n) {
    // Output sample n sits at upsampled-grid position n*down; taps align with
    // inputs at grid positions i*up.
    const int64_t b = n * down + half;
    int64_t i_lo = (b - (n_taps - 1) + up - 1) / up;
    int64_t i_hi = b / up;
    if (i_lo < 0) i_lo = 0;
    if (i_hi >= in_len) i_hi = in_len - 1;
    double acc = 0.0;
    for (int64_t i = i_lo; i <= i_hi; ++i)
      acc += h[static_cast<size_t>(b - i * up)] * static_cast<double>(x[static_cast<size_t>(i)]);
    y[static_cast<size_t>(n)] = static_cast<float>(acc);
  }
  return y;
}

// Bilinear resize with corner alignment: output corners sample input corners
// exactly. Input and output are row-major h x w.
inline std::vector<float> bilinear_resize(const std::vector<float>& src, int64_t src_h,
                                          int64_t src_w, int64_t dst_h, int64_t dst_w) {
  std::vector<float> dst(static_cast<size_t>(dst_h * dst_w));
  const double sy = dst_h > 1 ? static_cast<double>(src_h - 1) / (dst_h - 1) : 0.0;
  const double sx = dst_w > 1 ? static_cast<double>(src_w - 1) / (dst_w - 1) : 0.0;
  for (int64_t i = 0; i < dst_h; ++i) {
    const double fy = i * sy;
    int64_t y0 = static_cast<int64_t>(fy);
    if (y0 > src_h - 2) y0 = std::max<int64_t>(0, src_h - 2);
    const double wy = src_h > 1 ? fy - y0 : 0.0;
    for (int64_t j = 0; j < dst_w; ++j) {
      const double fx = j * sx;
      int64_t x0 = static_cast<int64_t>(fx);
      if (x0 > src_w - 2) x0 = std::max<int64_t>(0, src_w - 2);
      const double wx = src_w > 1 ? fx - x0 : 0.0;
      const int64_t x1 = std::min(x0 + 1, src_w - 1);
      const int64_t y1 = std::min(y0 + 1, src_h - 1);
      const double a = src[static_cast<size_t>(y0 * src_w + x0)];
      const double b = src[static_cast<size_t>(y0 * src_w + x1)];
      const double c = src[static_cast<size_t>(y1 * src_w + x0)];
      const double d = src[static_cast<size_t>(y1 * src_w + x1)];
      const double top = a + (b - a) * wx;
      const double bot = c + (d - c) * wx;
      dst[static_cast<size_t>(i * dst_w + j)] = static_cast<float>(top + (bot - top) * wy);
    }
  }
  return dst;
}

}  // namespace dsp
}  // namespace spoofbench
