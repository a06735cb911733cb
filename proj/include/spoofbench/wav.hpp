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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spoofbench/common.hpp"

namespace spoofbench {

struct WavData {
  int sample_rate_hz = 0;
  int channels = 0;
  // Interleaved PCM16 samples as read from the file.
  std::vector<int16_t> samples;

  int64_t frames() const {
    return channels > 0 ? static_cast<int64_t>(samples.size()) / channels : 0;
  }
};

namespace detail {
inline uint32_t rd_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
inline uint16_t rd_u16le(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
}  // namespace detail

// Reads a RIFF/WAVE file holding 16-bit PCM, mono or stereo. Anything else is
// rejected: the corpus contract is PCM16 WAV.
inline WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44) throw IoError("corrupt WAV (too short): " + path.string());
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path.string());

  WavData wav;
  int bits_per_sample = 0;
  bool have_fmt = false, have_data = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    uint32_t chunk_size = detail::rd_u32le(bytes.data() + pos + 4);
    const unsigned char* body = bytes.data() + pos + 8;
    size_t avail = bytes.size() - pos - 8;
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16 || avail < 16) throw IoError("corrupt fmt chunk: " + path.string());
      uint16_t format = detail::rd_u16le(body);
      wav.channels = detail::rd_u16le(body + 2);
      wav.sample_rate_hz = static_cast<int>(detail::rd_u32le(body + 4));
      bits_per_sample = detail::rd_u16le(body + 14);
      if (format != 1) throw IoError("unsupported WAV encoding (want PCM): " + path.string());
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw IoError("WAV data chunk before fmt: " + path.string());
      if (bits_per_sample != 16) throw IoError("unsupported bit depth (want 16): " + path.string());
      size_t n = std::min<size_t>(chunk_size, avail) / 2;
      wav.samples.resize(n);
      for (size_t i = 0; i < n; ++i)
        wav.samples[i] = static_cast<int16_t>(detail::rd_u16le(body + 2 * i));
      have_data = true;
      break;
    }
    pos += 8 + chunk_size + (chunk_size & 1);
  }
  if (!have_fmt || !have_data) throw IoError("corrupt WAV (missing chunks): " + path.string());
  if (wav.channels < 1 || wav.channels > 2)
    throw IoError("unsupported channel count " + std::to_string(wav.channels) + ": " +
                  path.string());
  if (wav.sample_rate_hz <= 0) throw IoError("invalid sample rate: " + path.string());
  if (wav.samples.empty()) throw IoError("zero-length audio: " + path.string());
  return wav;
}

inline void write_wav(const std::filesystem::path& path, const std::vector<int16_t>& samples,
                      int sample_rate_hz, int channels = 1) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open WAV file for writing: " + path.string());
  uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  uint32_t byte_rate = static_cast<uint32_t>(sample_rate_hz * channels * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u32(out, 1u | (static_cast<uint32_t>(channels) << 16));  // PCM, channels
  write_u32(out, static_cast<uint32_t>(sample_rate_hz));
  write_u32(out, byte_rate);
  write_u32(out, static_cast<uint32_t>(channels * 2) | (16u << 16));  // block align, bits
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (int16_t s : samples) {
    unsigned char b[2] = {static_cast<unsigned char>(s & 0xff),
                          static_cast<unsigned char>((s >> 8) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!out) throw IoError("short write: " + path.string());
}

inline double wav_duration_seconds(const std::filesystem::path& path) {
  WavData w = read_wav(path);
  return static_cast<double>(w.frames()) / w.sample_rate_hz;
}

}  // namespace spoofbench
