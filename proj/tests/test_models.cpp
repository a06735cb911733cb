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

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "spoofbench/models.hpp"
#include "test_util.hpp"

using namespace spoofbench;

namespace {

Tensor random_input(Shape shape, uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  Rng rng(seed);
  for (int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

bool models_equal(const Model& a, const Model& b) {
  const auto& pa = a.named_parameters();
  const auto& pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].first != pb[i].first) return false;
    if (std::memcmp(pa[i].second.value().data(), pb[i].second.value().data(),
                    sizeof(float) * static_cast<size_t>(pa[i].second.numel())) != 0)
      return false;
  }
  const auto& ba = a.named_buffers();
  const auto& bb = b.named_buffers();
  if (ba.size() != bb.size()) return false;
  for (size_t i = 0; i < ba.size(); ++i)
    if (std::memcmp(ba[i].second.data(), bb[i].second.data(),
                    sizeof(float) * static_cast<size_t>(ba[i].second.numel())) != 0)
      return false;
  return true;
}

}  // namespace

TEST_CASE("architecture properties are fixed") {
  REQUIRE(input_kind_of(Architecture::kLcnn) == InputKind::kMel1ch);
  REQUIRE(input_kind_of(Architecture::kLcnnAttention) == InputKind::kMel1ch);
  REQUIRE(input_kind_of(Architecture::kResNet18) == InputKind::kImage3ch);
  REQUIRE(input_kind_of(Architecture::kVitB16) == InputKind::kImage3ch);
  REQUIRE(input_kind_of(Architecture::kCnnBiLstm) == InputKind::kImageSequence);
  REQUIRE(input_kind_of(Architecture::kWav2Vec2Base) == InputKind::kRawWaveform);

  REQUIRE(head_kind_of(Architecture::kLcnn) == HeadKind::kTwoLogit);
  REQUIRE(head_kind_of(Architecture::kLcnnAttention) == HeadKind::kTwoLogit);
  REQUIRE(head_kind_of(Architecture::kResNet18) == HeadKind::kOneLogit);
  REQUIRE(head_kind_of(Architecture::kVitB16) == HeadKind::kTwoLogit);
  REQUIRE(head_kind_of(Architecture::kCnnBiLstm) == HeadKind::kOneLogit);
  REQUIRE(head_kind_of(Architecture::kWav2Vec2Base) == HeadKind::kTwoLogit);

  for (int i = 0; i <= 5; ++i) {
    const auto a = static_cast<Architecture>(i);
    REQUIRE(parse_architecture(architecture_name(a)) == a);
  }
  REQUIRE_THROWS_AS(parse_architecture("VGG16"), Error);
}

TEST_CASE("lcnn parameter count matches the architecture arithmetic") {
  ModelSpec spec;
  spec.arch = Architecture::kLcnn;
  auto model = build_model(spec, 1);
  // conv1 5x5x1->64 (1664) + conv2 3x3x32->96 (27744) + conv3 3x3x48->128
  // (55424) + conv4 3x3x64->192 (110784) + fc 96->2 (194).
  REQUIRE(model->parameter_count() == 195810);
}

TEST_CASE("lcnn forward: shape, determinism, seed sensitivity") {
  ModelSpec spec;
  spec.arch = Architecture::kLcnn;
  Batch batch;
  batch.mel = random_input({2, 1, 64, 157}, 5);

  auto m1 = build_model(spec, 42);
  auto m2 = build_model(spec, 42);
  auto m3 = build_model(spec, 43);
  auto o1 = m1->scores(batch);
  auto o2 = m2->scores(batch);
  auto o3 = m3->scores(batch);
  REQUIRE(o1.size() == 2);
  REQUIRE(o1 == o2);
  REQUIRE(o1 != o3);
  for (double s : o1) {
    REQUIRE(s > 0.0);
    REQUIRE(s < 1.0);
  }

  BatchOutput out = m1->forward(batch, false);
  REQUIRE(out.logits.shape() == Shape{2, 2});
  REQUIRE(out.penultimate.shape() == Shape{2, 96});
}

TEST_CASE("lcnn rejects inputs of the wrong kind with both shapes named") {
  ModelSpec spec;
  spec.arch = Architecture::kLcnn;
  auto model = build_model(spec, 1);
  Batch batch;
  batch.images = random_input({2, 3, 224, 224}, 5);  // wrong member populated
  try {
    model->forward(batch, false);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("expected") != std::string::npos);
    REQUIRE(msg.find("n_mels") != std::string::npos);
  }
}

TEST_CASE("lcnn attention: simplex weights and two logits") {
  ModelSpec spec;
  spec.arch = Architecture::kLcnnAttention;
  auto model = build_model(spec, 9);
  Batch batch;
  batch.mel = random_input({3, 1, 64, 157}, 6);
  BatchOutput out = model->forward(batch, false);
  REQUIRE(out.logits.shape() == Shape{3, 2});
  REQUIRE(out.attention.defined());
  // 157 frames -> 16x downsampled trunk -> 9 time steps.
  REQUIRE(out.attention.shape() == Shape{3, 9});
  for (int64_t i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int64_t j = 0; j < 9; ++j) {
      const float w = out.attention.value().data()[i * 9 + j];
      REQUIRE(w >= 0.0f);
      sum += w;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-5);
  }
}

TEST_CASE("resnet18: one logit, input contract enforced") {
  ModelSpec spec;
  spec.arch = Architecture::kResNet18;
  auto model = build_model(spec, 3);
  Batch batch;
  batch.images = random_input({2, 3, 224, 224}, 8);
  BatchOutput out = model->forward(batch, false);
  REQUIRE(out.logits.shape() == Shape{2, 1});
  REQUIRE(out.penultimate.shape() == Shape{2, 512});

  Batch bad;
  bad.images = random_input({2, 3, 128, 128}, 8);
  try {
    model->forward(bad, false);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("[B,3,224,224]") != std::string::npos);
    REQUIRE(msg.find("128") != std::string::npos);
  }
}

TEST_CASE("batch norm running stats move in training and hold in eval") {
  ModelSpec spec;
  spec.arch = Architecture::kResNet18;
  auto model = build_model(spec, 3);
  Batch batch;
  batch.images = random_input({2, 3, 224, 224}, 8);

  auto snapshot = [&] {
    std::vector<float> out;
    for (const auto& [name, t] : model->named_buffers())
      out.insert(out.end(), t.data(), t.data() + t.numel());
    return out;
  };
  const auto before = snapshot();
  { nn::NoGradGuard ng; model->forward(batch, /*training=*/false); }
  REQUIRE(snapshot() == before);
  { nn::NoGradGuard ng; model->forward(batch, /*training=*/true); }
  REQUIRE(snapshot() != before);
}

TEST_CASE("vit-b16: two logits from the class token") {
  ModelSpec spec;
  spec.arch = Architecture::kVitB16;
  auto model = build_model(spec, 4);
  Batch batch;
  batch.images = random_input({1, 3, 224, 224}, 9);
  BatchOutput out = model->forward(batch, false);
  REQUIRE(out.logits.shape() == Shape{1, 2});
  REQUIRE(out.penultimate.shape() == Shape{1, 768});
}

TEST_CASE("cnn-bilstm: windows in, one logit out") {
  ModelSpec spec;
  spec.arch = Architecture::kCnnBiLstm;
  spec.frozen_backbone = true;
  auto model = build_model(spec, 5);
  Batch batch;
  batch.windows = random_input({1, 2, 3, 224, 224}, 10);
  BatchOutput out = model->forward(batch, false);
  REQUIRE(out.logits.shape() == Shape{1, 1});
  REQUIRE(out.penultimate.shape() == Shape{1, 256});

  // Frozen trunk: only the lstm and fc train.
  for (const auto& v : model->trainable_parameters())
    REQUIRE(v.name().rfind("head.", 0) == 0);
  REQUIRE_FALSE(model->trainable_parameters().empty());
}

TEST_CASE("wav2vec2: frozen encoder is forced and only the head trains") {
  ModelSpec spec;
  spec.arch = Architecture::kWav2Vec2Base;
  spec.frozen_backbone = false;  // must be overridden
  auto model = build_model(spec, 6);
  REQUIRE(model->spec().frozen_backbone);
  auto trainables = model->trainable_parameters();
  REQUIRE(trainables.size() == 2);
  for (const auto& v : trainables) REQUIRE(v.name().rfind("head.fc", 0) == 0);

  Batch batch;
  batch.wave = random_input({2, 4000}, 11, -0.5, 0.5);
  BatchOutput out = model->forward(batch, false);
  REQUIRE(out.logits.shape() == Shape{2, 2});
  REQUIRE(out.penultimate.shape() == Shape{2, 768});

  Batch tiny;
  tiny.wave = random_input({1, 100}, 11);
  REQUIRE_THROWS_AS(model->forward(tiny, false), ShapeError);
}

TEST_CASE("pretrained weights are refused with the backbone named") {
  ModelSpec spec;
  spec.arch = Architecture::kResNet18;
  spec.pretrained_backbone = true;
  try {
    build_model(spec, 1);
    FAIL("expected WeightsUnavailableError");
  } catch (const WeightsUnavailableError& e) {
    REQUIRE(std::string(e.what()).find("resnet18-imagenet1k") != std::string::npos);
  }
}

TEST_CASE("logit-to-score mapping") {
  Tensor two = Tensor::from({2, 2}, {0.0f, 0.0f, -1.0f, 1.0f});
  auto s2 = Model::logits_to_scores(two, HeadKind::kTwoLogit);
  REQUIRE(s2[0] == Catch::Approx(0.5));
  REQUIRE(s2[1] == Catch::Approx(1.0 / (1.0 + std::exp(-2.0))));

  Tensor one = Tensor::from({2, 1}, {0.0f, 3.0f});
  auto s1 = Model::logits_to_scores(one, HeadKind::kOneLogit);
  REQUIRE(s1[0] == Catch::Approx(0.5));
  REQUIRE(s1[1] == Catch::Approx(1.0 / (1.0 + std::exp(-3.0))));

  REQUIRE_THROWS_AS(Model::logits_to_scores(one, HeadKind::kTwoLogit), ShapeError);
}

TEST_CASE("checkpoint: bitwise round trip through save and load") {
  auto dir = sbtest::temp_dir("ckpt");
  ModelSpec spec;
  spec.arch = Architecture::kLcnnAttention;
  auto model = build_model(spec, 77);
  const auto path = dir / "model.ckpt";
  save_checkpoint(*model, path);

  auto restored = load_checkpoint(path);
  REQUIRE(restored->spec().arch == Architecture::kLcnnAttention);
  REQUIRE(restored->seed() == 77);
  REQUIRE(models_equal(*model, *restored));

  // Same model saved twice produces identical bytes.
  const auto path2 = dir / "model2.ckpt";
  save_checkpoint(*model, path2);
  REQUIRE(read_text_file(path.string()) == read_text_file(path2.string()));

  Batch batch;
  batch.mel = random_input({1, 1, 64, 157}, 12);
  REQUIRE(model->scores(batch) == restored->scores(batch));
}

TEST_CASE("checkpoint: truncation and corruption are rejected") {
  auto dir = sbtest::temp_dir("ckpt_trunc");
  ModelSpec spec;
  spec.arch = Architecture::kLcnn;
  auto model = build_model(spec, 7);
  const auto path = dir / "model.ckpt";
  save_checkpoint(*model, path);
  const std::string bytes = read_text_file(path.string());

  for (size_t keep : {size_t{4}, size_t{20}, bytes.size() / 2, bytes.size() - 3}) {
    const auto cut = dir / "cut.ckpt";
    std::ofstream out(cut, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(keep));
    out.close();
    REQUIRE_THROWS_AS(load_checkpoint(cut), CheckpointError);
  }

  const auto junk = dir / "junk.ckpt";
  write_text_file(junk.string(), "this is not a checkpoint at all");
  REQUIRE_THROWS_AS(load_checkpoint(junk), CheckpointError);
}

TEST_CASE("checkpoint: architecture mismatch is named") {
  auto dir = sbtest::temp_dir("ckpt_arch");
  ModelSpec spec;
  spec.arch = Architecture::kLcnn;
  auto model = build_model(spec, 7);
  const auto path = dir / "model.ckpt";
  save_checkpoint(*model, path);

  ModelSpec other;
  other.arch = Architecture::kResNet18;
  auto target = build_model(other, 7);
  try {
    load_checkpoint_into(*target, path);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("LCNN") != std::string::npos);
    REQUIRE(msg.find("RESNET18") != std::string::npos);
  }
}
