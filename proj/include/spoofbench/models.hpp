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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "spoofbench/models/base.hpp"
#include "spoofbench/models/cnn_bilstm.hpp"
#include "spoofbench/models/lcnn.hpp"
#include "spoofbench/models/resnet18.hpp"
#include "spoofbench/models/vit_b16.hpp"
#include "spoofbench/models/wav2vec2.hpp"

namespace spoofbench {

inline const char* pretrained_backbone_id(Architecture a) {
  switch (a) {
    case Architecture::kResNet18: return "resnet18-imagenet1k";
    case Architecture::kVitB16: return "vit-b16-imagenet21k";
    case Architecture::kCnnBiLstm: return "resnet18-imagenet1k";
    case Architecture::kWav2Vec2Base: return "wav2vec2-base-960h";
    default: return nullptr;
  }
}

namespace detail {

inline std::unique_ptr<Model> construct_model(const ModelSpec& spec, uint64_t seed) {
  switch (spec.arch) {
    case Architecture::kLcnn: return std::make_unique<LcnnModel>(spec, seed);
    case Architecture::kLcnnAttention: return std::make_unique<LcnnAttentionModel>(spec, seed);
    case Architecture::kResNet18: return std::make_unique<ResNet18Model>(spec, seed);
    case Architecture::kVitB16: return std::make_unique<VitB16Model>(spec, seed);
    case Architecture::kCnnBiLstm: return std::make_unique<CnnBiLstmModel>(spec, seed);
    case Architecture::kWav2Vec2Base: return std::make_unique<Wav2Vec2Model>(spec, seed);
  }
  throw Error("unknown architecture enum value");
}

}  // namespace detail

// Constructs a model with seed-derived weights. Published pretrained weights
// are not bundled and cannot be fetched in an offline run, so a spec that
// demands them is refused with the backbone named rather than silently
// substituted.
inline std::unique_ptr<Model> build_model(ModelSpec spec, uint64_t seed) {
  spec = spec.normalized();
  if (spec.pretrained_backbone) {
    const char* id = pretrained_backbone_id(spec.arch);
    throw WeightsUnavailableError(
        std::string("pretrained weights for backbone '") + (id ? id : "unknown") +
        "' are not available in this environment; set pretrained_backbone=false "
        "to train from seed-derived initialization");
  }
  return detail::construct_model(spec, seed);
}

// ---------------------------------------------------------------------------
// Checkpoint container: one file holding the spec, the seed, and every
// parameter and buffer as named float32 blobs.
//
//   magic "SPBCKPT1" | u32 format | u32 arch | u32 pretrained | u32 frozen |
//   u64 seed | u32 blob_count | blobs | magic "SPBCKEND"
//   blob := u32 name_len | name | u32 rank | u64 dims[rank] | f32 data[]
// ---------------------------------------------------------------------------

namespace ckpt {

constexpr char kMagic[8] = {'S', 'P', 'B', 'C', 'K', 'P', 'T', '1'};
constexpr char kEndMagic[8] = {'S', 'P', 'B', 'C', 'K', 'E', 'N', 'D'};
constexpr uint32_t kFormatVersion = 1;

}  // namespace ckpt

inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(ckpt::kMagic, 8);
  write_u32(out, ckpt::kFormatVersion);
  write_u32(out, static_cast<uint32_t>(model.spec().arch));
  write_u32(out, model.spec().pretrained_backbone ? 1 : 0);
  write_u32(out, model.spec().frozen_backbone ? 1 : 0);
  write_u64(out, model.seed());

  const auto& params = model.named_parameters();
  const auto& buffers = model.named_buffers();
  write_u32(out, static_cast<uint32_t>(params.size() + buffers.size()));
  auto write_blob = [&out](const std::string& name, const Tensor& t) {
    write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<uint32_t>(t.shape().size()));
    for (int64_t d : t.shape()) write_u64(out, static_cast<uint64_t>(d));
    write_f32_array(out, t.data(), t.numel());
  };
  for (const auto& [name, v] : params) write_blob(name, v.value());
  for (const auto& [name, t] : buffers) write_blob(name, t);
  out.write(ckpt::kEndMagic, 8);
  if (!out) throw IoError("short write to checkpoint: " + path.string());
}

struct CheckpointInfo {
  ModelSpec spec;
  uint64_t seed = 0;
};

inline CheckpointInfo read_checkpoint_header(std::istream& in, const std::string& what) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, ckpt::kMagic, 8) != 0)
    throw CheckpointError("not a checkpoint file: " + what);
  try {
    const uint32_t version = read_u32(in);
    if (version != ckpt::kFormatVersion)
      throw CheckpointError("unsupported checkpoint format version " + std::to_string(version) +
                            " in " + what);
    CheckpointInfo info;
    const uint32_t arch = read_u32(in);
    if (arch > 5) throw CheckpointError("invalid architecture code in " + what);
    info.spec.arch = static_cast<Architecture>(arch);
    info.spec.pretrained_backbone = read_u32(in) != 0;
    info.spec.frozen_backbone = read_u32(in) != 0;
    info.seed = read_u64(in);
    return info;
  } catch (const IoError&) {
    throw CheckpointError("truncated checkpoint header: " + what);
  }
}

inline CheckpointInfo peek_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  return read_checkpoint_header(in, path.string());
}

// Restores parameters and buffers into an already-built model. The model's
// architecture must match the file; blob names and shapes must line up
// exactly with the model's registry.
inline void load_checkpoint_into(Model& model, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  CheckpointInfo info = read_checkpoint_header(in, path.string());
  if (info.spec.arch != model.spec().arch)
    throw CheckpointError("checkpoint holds " +
                          std::string(architecture_name(info.spec.arch)) + " but model is " +
                          architecture_name(model.spec().arch) + ": " + path.string());

  std::unordered_map<std::string, Tensor> slots;
  for (const auto& [name, v] : model.named_parameters()) slots.emplace(name, v.value());
  for (const auto& [name, t] : model.named_buffers()) slots.emplace(name, t);

  // Stage everything before touching the model, so a bad file leaves the
  // model exactly as it was.
  std::vector<std::pair<std::string, Tensor>> staged;
  try {
    const uint32_t count = read_u32(in);
    if (count != slots.size())
      throw CheckpointError("checkpoint holds " + std::to_string(count) +
                            " blobs, model expects " + std::to_string(slots.size()) + ": " +
                            path.string());
    std::unordered_set<std::string> seen;
    staged.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
      const uint32_t name_len = read_u32(in);
      if (name_len == 0 || name_len > 4096)
        throw CheckpointError("corrupt blob name in " + path.string());
      std::string name(name_len, '\0');
      in.read(name.data(), name_len);
      const uint32_t rank = read_u32(in);
      if (!in || rank > 8) throw CheckpointError("truncated checkpoint: " + path.string());
      Shape shape(rank);
      for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int64_t>(read_u64(in));
      auto it = slots.find(name);
      if (it == slots.end())
        throw CheckpointError("checkpoint blob '" + name + "' has no matching slot: " +
                              path.string());
      if (!seen.insert(name).second)
        throw CheckpointError("duplicate blob '" + name + "' in " + path.string());
      if (it->second.shape() != shape)
        throw CheckpointError("blob '" + name + "' has shape " + shape_str(shape) +
                              ", model expects " + shape_str(it->second.shape()) + ": " +
                              path.string());
      Tensor blob = Tensor::zeros(shape);
      read_f32_array(in, blob.data(), static_cast<size_t>(blob.numel()));
      staged.emplace_back(std::move(name), std::move(blob));
    }
    char end_magic[8];
    in.read(end_magic, 8);
    if (!in || std::memcmp(end_magic, ckpt::kEndMagic, 8) != 0)
      throw CheckpointError("truncated checkpoint: " + path.string());
  } catch (const IoError&) {
    throw CheckpointError("truncated checkpoint: " + path.string());
  }
  for (auto& [name, blob] : staged) {
    Tensor& dst = slots.at(name);
    std::copy(blob.data(), blob.data() + blob.numel(), dst.data());
  }
}

// Builds the model recorded in the file and loads its weights. Construction
// from a checkpoint never refetches pretrained weights; the file already
// holds the trained values, so the offline-weights policy does not apply.
inline std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path) {
  CheckpointInfo info = peek_checkpoint(path);
  std::unique_ptr<Model> model = detail::construct_model(info.spec.normalized(), info.seed);
  load_checkpoint_into(*model, path);
  return model;
}

}  // namespace spoofbench
