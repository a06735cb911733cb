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

#include <cmath>
#include <cstring>

#include "spoofbench/fixture.hpp"
#include "spoofbench/zeroshot.hpp"
#include "test_util.hpp"

using namespace spoofbench;

namespace {

constexpr ZeroShotBackendId kAllBackends[] = {
    ZeroShotBackendId::kWav2Vec2Xlsr53, ZeroShotBackendId::kWhisperSmall,
    ZeroShotBackendId::kWhisperMedium,  ZeroShotBackendId::kPannsCnn14,
    ZeroShotBackendId::kWavlmBasePlus,  ZeroShotBackendId::kAst,
};

// Channel-rich corpus shared by every case; most clips land in TEST so the
// near-chance band check has enough resolution. Records are ordered REAL
// first: record i is real for i < 80 and fake otherwise.
const std::vector<ClipRecord>& corpus_records() {
  static const std::vector<ClipRecord> records =
      generate_fixture_corpus(80, 22, sbtest::temp_dir("zeroshot_corpus"),
                              sbtest::channel_rich_params());
  return records;
}

const SplitAssignment& corpus_splits() {
  static const SplitAssignment splits = [] {
    const double ratios[3] = {0.125, 0.125, 0.75};
    return make_splits(corpus_records(), ratios, 9);
  }();
  return splits;
}

AudioClip test_clip(size_t record_idx, double seconds = 3.0) {
  const ClipRecord& rec = corpus_records()[record_idx];
  AudioClip clip = load_and_resample(rec.audio_path.string(), kZeroShotRateHz);
  return fix_duration(clip, seconds);
}

AudioClip zero_clip(double seconds = 1.0) {
  AudioClip clip;
  clip.sample_rate_hz = kZeroShotRateHz;
  clip.samples.assign(static_cast<size_t>(seconds * kZeroShotRateHz), 0.0f);
  return clip;
}

bool same_vector(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("backend table fixes embedding width and vocabulary eligibility") {
  CHECK(embedding_dim_of(ZeroShotBackendId::kWav2Vec2Xlsr53) == 1024);
  CHECK(embedding_dim_of(ZeroShotBackendId::kWhisperSmall) == 768);
  CHECK(embedding_dim_of(ZeroShotBackendId::kWhisperMedium) == 1024);
  CHECK(embedding_dim_of(ZeroShotBackendId::kPannsCnn14) == 2048);
  CHECK(embedding_dim_of(ZeroShotBackendId::kWavlmBasePlus) == 768);
  CHECK(embedding_dim_of(ZeroShotBackendId::kAst) == 768);

  for (ZeroShotBackendId id : kAllBackends) {
    CHECK(embedding_dim_of(id) > 0);
    CHECK(parse_zero_shot_backend(zero_shot_backend_name(id)) == id);
    const ZeroShotBackend b = make_backend(id);
    CHECK(b.embedding_dim == embedding_dim_of(id));
    CHECK(b.scoring_rule == ScoringRule::kProjection);
  }
  CHECK(has_class_vocabulary(ZeroShotBackendId::kPannsCnn14));
  CHECK(has_class_vocabulary(ZeroShotBackendId::kAst));
  CHECK_FALSE(has_class_vocabulary(ZeroShotBackendId::kWav2Vec2Xlsr53));
  CHECK_FALSE(has_class_vocabulary(ZeroShotBackendId::kWhisperSmall));
  CHECK_FALSE(has_class_vocabulary(ZeroShotBackendId::kWhisperMedium));
  CHECK_FALSE(has_class_vocabulary(ZeroShotBackendId::kWavlmBasePlus));

  CHECK(make_backend(ZeroShotBackendId::kAst, ScoringRule::kClassPrior).scoring_rule ==
        ScoringRule::kClassPrior);
  CHECK_THROWS_AS(make_backend(ZeroShotBackendId::kWhisperSmall, ScoringRule::kClassPrior),
                  Error);
  CHECK_THROWS_AS(parse_zero_shot_backend("WHISPER_LARGE"), Error);
  CHECK(parse_scoring_rule("PROJECTION") == ScoringRule::kProjection);
  CHECK(parse_scoring_rule("CLASS_PRIOR") == ScoringRule::kClassPrior);
  CHECK_THROWS_AS(parse_scoring_rule("COSINE"), Error);
}

TEST_CASE("weight sources resolve explicitly or fail loudly") {
  const ZeroShotBackend backend = make_backend(ZeroShotBackendId::kWhisperSmall);
  try {
    ZeroShotModel model(backend, "auto");
    FAIL("auto must not resolve without published weights");
  } catch (const WeightsUnavailableError& e) {
    CHECK(std::string(e.what()).find("WHISPER_SMALL") != std::string::npos);
  }
  CHECK_NOTHROW(ZeroShotModel(backend, "builtin:7"));
  CHECK_THROWS_AS(ZeroShotModel(backend, "builtin:"), Error);
  CHECK_THROWS_AS(ZeroShotModel(backend, "builtin:x7"), Error);
  CHECK_THROWS_AS(ZeroShotModel(backend, "imagenet"), Error);

  ZeroShotModel model(backend, "builtin:42");
  CHECK(model.seed() == 42);
  CHECK(model.backend().id == ZeroShotBackendId::kWhisperSmall);
}

TEST_CASE("builtin embeddings are deterministic, finite, and input sensitive") {
  const AudioClip real_clip = test_clip(0);
  const AudioClip fake_clip = test_clip(80);
  const AudioClip silence = zero_clip();

  for (ZeroShotBackendId id : kAllBackends) {
    CAPTURE(zero_shot_backend_name(id));
    ZeroShotModel model(make_backend(id), "builtin:7");

    const std::vector<double> e1 = model.embed(real_clip);
    CHECK(static_cast<int64_t>(e1.size()) == embedding_dim_of(id));
    CHECK(same_vector(e1, model.embed(real_clip)));

    ZeroShotModel twin(make_backend(id), "builtin:7");
    CHECK(same_vector(e1, twin.embed(real_clip)));
    ZeroShotModel other(make_backend(id), "builtin:8");
    CHECK_FALSE(same_vector(e1, other.embed(real_clip)));

    CHECK_FALSE(same_vector(e1, model.embed(fake_clip)));

    for (double v : model.embed(silence)) CHECK(std::isfinite(v));
  }
}

TEST_CASE("projection scoring follows the principal-axis contract") {
  // Quarter-integer embeddings keep the centering arithmetic exact, so the
  // invariance checks can demand bitwise equality.
  const std::vector<std::vector<double>> base = {
      {1.25, -2.0, 0.75},
      {-0.5, 1.5, -1.25},
      {2.0, 0.25, 0.5},
      {-2.75, 0.25, 0.0},
  };

  const std::vector<double> scores = projection_scores(base);
  REQUIRE(scores.size() == 4);
  CHECK(batch_median(scores) <= 0.0);

  SECTION("fewer than two rows is an error") {
    CHECK_THROWS_AS(projection_scores({base[0]}), Error);
    CHECK_THROWS_AS(projection_scores({}), Error);
  }

  SECTION("identical rows score identically") {
    const std::vector<std::vector<double>> same(5, base[0]);
    const std::vector<double> s = projection_scores(same);
    for (double v : s) CHECK(v == s[0]);
  }

  SECTION("adding a constant vector to every row changes nothing") {
    std::vector<std::vector<double>> shifted = base;
    const double offset[3] = {3.5, -1.25, 100.0};
    for (auto& row : shifted)
      for (size_t j = 0; j < row.size(); ++j) row[j] += offset[j];
    const std::vector<double> s = projection_scores(shifted);
    for (size_t i = 0; i < scores.size(); ++i) CHECK(s[i] == scores[i]);
  }

  SECTION("positive scaling scales scores and keeps the ranking") {
    std::vector<std::vector<double>> doubled = base;
    for (auto& row : doubled)
      for (double& v : row) v *= 2.0;
    const std::vector<double> s2 = projection_scores(doubled);
    for (size_t i = 0; i < scores.size(); ++i) CHECK(s2[i] == 2.0 * scores[i]);

    std::vector<std::vector<double>> tripled = base;
    for (auto& row : tripled)
      for (double& v : row) v *= 3.0;
    const std::vector<double> s3 = projection_scores(tripled);
    for (size_t i = 0; i < scores.size(); ++i)
      CHECK(s3[i] == Catch::Approx(3.0 * scores[i]).epsilon(1e-12));
    for (size_t i = 0; i < scores.size(); ++i)
      for (size_t j = 0; j < scores.size(); ++j)
        CHECK((scores[i] < scores[j]) == (s3[i] < s3[j]));
  }

  SECTION("median helper covers odd, even, and empty input") {
    CHECK(batch_median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(batch_median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK_THROWS_AS(batch_median({}), Error);
  }
}

TEST_CASE("class priors form a distribution and gate on vocabulary") {
  const AudioClip clip = test_clip(0);

  ZeroShotModel panns(make_backend(ZeroShotBackendId::kPannsCnn14, ScoringRule::kClassPrior),
                      "builtin:7");
  const std::vector<double> probs = panns.class_probs(clip);
  REQUIRE(static_cast<int64_t>(probs.size()) == kClassVocabSize);
  double sum = 0.0;
  for (double p : probs) {
    CHECK(p >= 0.0);
    sum += p;
  }
  CHECK(sum == Catch::Approx(1.0).epsilon(1e-9));

  double speech = 0.0;
  for (int64_t i = 0; i < kSpeechClassCount; ++i) speech += probs[static_cast<size_t>(i)];
  const double score = panns.class_prior_score(clip);
  CHECK(score == Catch::Approx(1.0 - speech).epsilon(1e-12));
  CHECK(score >= 0.0);
  CHECK(score <= 1.0);

  ZeroShotModel xlsr(make_backend(ZeroShotBackendId::kWav2Vec2Xlsr53), "builtin:7");
  CHECK_THROWS_AS(xlsr.class_probs(clip), Error);
}

TEST_CASE("batch scoring rejects tiny projection batches and ties identical clips") {
  ZeroShotModel model(make_backend(ZeroShotBackendId::kWhisperSmall), "builtin:7");
  const AudioClip clip = test_clip(0);

  CHECK_THROWS_AS(zero_shot_score(model, {clip}), Error);
  CHECK_THROWS_AS(zero_shot_score(model, {}), Error);

  const std::vector<AudioClip> same(3, clip);
  const std::vector<double> scores = zero_shot_score(model, same);
  REQUIRE(scores.size() == 3);
  CHECK(scores[1] == scores[0]);
  CHECK(scores[2] == scores[0]);

  ZeroShotModel prior(make_backend(ZeroShotBackendId::kAst, ScoringRule::kClassPrior),
                      "builtin:7");
  CHECK(zero_shot_score(prior, {clip}).size() == 1);
}

TEST_CASE("zero-shot evaluation stays near chance on the channel-rich corpus") {
  const auto& records = corpus_records();
  const auto& splits = corpus_splits();

  size_t n_test = 0;
  for (const ClipRecord& rec : records)
    if (splits.at(rec.clip_id) == Split::kTest) ++n_test;
  REQUIRE(n_test == 120);

  auto check_band = [&](ZeroShotBackendId id, ScoringRule rule) {
    CAPTURE(zero_shot_backend_name(id), scoring_rule_name(rule));
    ZeroShotModel model(make_backend(id, rule), "builtin:7");
    const ZeroShotResult res = evaluate_zero_shot(model, records, splits, 3.0);

    REQUIRE(res.scores.size() == n_test);
    CHECK(res.report.auc >= 0.3);
    CHECK(res.report.auc <= 0.7);
    CHECK(res.report.eer >= 0.35);
    CHECK(res.report.eer <= 0.65);

    std::vector<double> raw;
    for (const ScoredClip& s : res.scores) raw.push_back(s.score);
    CHECK(res.report.threshold_used == batch_median(raw));
  };

  for (ZeroShotBackendId id : kAllBackends) check_band(id, ScoringRule::kProjection);
  check_band(ZeroShotBackendId::kPannsCnn14, ScoringRule::kClassPrior);
  check_band(ZeroShotBackendId::kAst, ScoringRule::kClassPrior);
}

TEST_CASE("zero-shot evaluation needs a populated test split") {
  const auto& records = corpus_records();
  SplitAssignment all_train;
  all_train.seed = 0;
  for (const ClipRecord& rec : records) all_train.by_clip[rec.clip_id] = Split::kTrain;

  ZeroShotModel model(make_backend(ZeroShotBackendId::kWhisperSmall), "builtin:7");
  CHECK_THROWS_AS(evaluate_zero_shot(model, records, all_train, 3.0), DegenerateInputError);
}
