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

#include <cstring>
#include <set>

#include "spoofbench/corpus.hpp"
#include "spoofbench/fixture.hpp"
#include "spoofbench/frontend.hpp"
#include "test_util.hpp"

using namespace spoofbench;

namespace {

std::vector<ClipRecord> synthetic_records(int n_real, int n_fake) {
  std::vector<ClipRecord> records;
  for (int i = 0; i < n_real; ++i) {
    ClipRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "r_%05d", i);
    r.clip_id = id;
    r.label = Label::kReal;
    records.push_back(r);
  }
  for (int i = 0; i < n_fake; ++i) {
    ClipRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "f_%05d", i);
    r.clip_id = id;
    r.label = Label::kFake;
    records.push_back(r);
  }
  return records;
}

void write_tiny_wav(const std::filesystem::path& path) {
  std::vector<int16_t> pcm(220, 1000);
  write_wav(path, pcm, 22050, 1);
}

}  // namespace

TEST_CASE("parse_metadata reads directory-labeled corpora") {
  auto dir = sbtest::temp_dir("parse_basic");
  std::filesystem::create_directories(dir / "real");
  std::filesystem::create_directories(dir / "fake");
  write_tiny_wav(dir / "real" / "bf_00001.wav");
  write_tiny_wav(dir / "fake" / "bf_00002.wav");
  write_text_file(dir / "metadata.csv",
                  "bf_00001|some transcript|some transcript\n"
                  "bf_00002|other transcript|other transcript\n");

  auto records = parse_metadata(dir / "metadata.csv", dir);
  REQUIRE(records.size() == 2);
  REQUIRE(records[0].clip_id == "bf_00001");
  REQUIRE(records[0].label == Label::kReal);
  REQUIRE(records[1].clip_id == "bf_00002");
  REQUIRE(records[1].label == Label::kFake);
  REQUIRE(records[0].duration_s > 0.0);
}

TEST_CASE("parse_metadata accepts an explicit label column") {
  auto dir = sbtest::temp_dir("parse_column");
  write_tiny_wav(dir / "c1.wav");
  write_tiny_wav(dir / "c2.wav");
  write_text_file(dir / "meta.csv",
                  "c1|transcript|real\n"
                  "c2|transcript|fake\n");
  auto records = parse_metadata(dir / "meta.csv", dir, LabelRule::column_index(2));
  REQUIRE(records.size() == 2);
  REQUIRE(records[0].label == Label::kReal);
  REQUIRE(records[1].label == Label::kFake);
}

TEST_CASE("parse_metadata on an empty file yields an empty list") {
  auto dir = sbtest::temp_dir("parse_empty");
  write_text_file(dir / "meta.csv", "");
  auto records = parse_metadata(dir / "meta.csv", dir);
  REQUIRE(records.empty());
}

TEST_CASE("parse_metadata names every malformed line") {
  auto dir = sbtest::temp_dir("parse_malformed");
  std::filesystem::create_directories(dir / "real");
  std::string meta;
  for (int i = 1; i <= 10; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "m_%02d", i);
    write_tiny_wav(dir / "real" / (std::string(id) + ".wav"));
    if (i == 3 || i == 7) {
      meta += "this line has no pipe separator\n";
    } else {
      meta += std::string(id) + "|t|t\n";
    }
  }
  write_text_file(dir / "meta.csv", meta);
  try {
    parse_metadata(dir / "meta.csv", dir);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("3") != std::string::npos);
    REQUIRE(msg.find("7") != std::string::npos);
    REQUIRE(msg.find("line") != std::string::npos);
  }
}

TEST_CASE("parse_metadata lists all missing audio files") {
  auto dir = sbtest::temp_dir("parse_missing");
  std::filesystem::create_directories(dir / "real");
  write_tiny_wav(dir / "real" / "ok_1.wav");
  write_text_file(dir / "meta.csv",
                  "ok_1|t|t\n"
                  "gone_1|t|t\n"
                  "gone_2|t|t\n");
  try {
    parse_metadata(dir / "meta.csv", dir);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("gone_1") != std::string::npos);
    REQUIRE(msg.find("gone_2") != std::string::npos);
  }
}

TEST_CASE("make_splits matches the 100-record arithmetic") {
  auto records = synthetic_records(50, 50);
  const double ratios[3] = {0.7, 0.15, 0.15};
  auto splits = make_splits(records, ratios, 42);
  auto stats = compute_stats(records, splits);

  REQUIRE(stats.split_total(Split::kTrain) == 70);
  REQUIRE(stats.split_total(Split::kVal) == 15);
  REQUIRE(stats.split_total(Split::kTest) == 15);
  for (int s = 0; s < 3; ++s)
    for (int c = 0; c < 2; ++c) {
      const int64_t n = stats.count[s][c];
      if (s == 0) REQUIRE(n == 35);
      else REQUIRE((n == 7 || n == 8));
    }
}

TEST_CASE("make_splits on the full corpus size") {
  // 12,260 + 13,260 clips at 70/15/15.
  auto records = synthetic_records(12260, 13260);
  const double ratios[3] = {0.7, 0.15, 0.15};
  auto splits = make_splits(records, ratios, 1);
  auto stats = compute_stats(records, splits);
  REQUIRE(stats.split_total(Split::kTrain) == 17864);
  REQUIRE(stats.split_total(Split::kVal) == 3828);
  REQUIRE(stats.split_total(Split::kTest) == 3828);

  // Stratification within 2 percentage points on every split.
  const double corpus_fake = stats.fake_fraction();
  for (int s = 0; s < 3; ++s)
    REQUIRE(std::fabs(stats.fake_fraction(static_cast<Split>(s)) - corpus_fake) < 0.02);
}

TEST_CASE("make_splits is deterministic and a partition") {
  auto records = synthetic_records(33, 41);
  const double ratios[3] = {0.6, 0.2, 0.2};
  auto a = make_splits(records, ratios, 9);
  auto b = make_splits(records, ratios, 9);
  REQUIRE(a.by_clip == b.by_clip);

  // Input order must not matter.
  auto shuffled = records;
  Rng rng(4);
  rng.shuffle(shuffled);
  auto c = make_splits(shuffled, ratios, 9);
  REQUIRE(a.by_clip == c.by_clip);

  // A different seed moves clips around.
  auto d = make_splits(records, ratios, 10);
  REQUIRE(a.by_clip != d.by_clip);

  // Every clip appears exactly once.
  REQUIRE(a.by_clip.size() == records.size());
  for (const auto& rec : records) REQUIRE(a.by_clip.count(rec.clip_id) == 1);
}

TEST_CASE("make_splits rejects bad inputs") {
  auto records = synthetic_records(10, 2);  // FAKE class smaller than split count
  const double ratios[3] = {0.7, 0.15, 0.15};
  REQUIRE_THROWS_AS(make_splits(records, ratios, 0), CorpusError);

  auto ok = synthetic_records(10, 10);
  const double bad1[3] = {0.7, 0.2, 0.2};
  REQUIRE_THROWS_AS(make_splits(ok, bad1, 0), CorpusError);
  const double bad2[3] = {1.0, 0.0, 0.0};
  REQUIRE_THROWS_AS(make_splits(ok, bad2, 0), CorpusError);
}

TEST_CASE("speaker-disjoint splits keep speakers whole") {
  auto records = synthetic_records(40, 40);
  for (size_t i = 0; i < records.size(); ++i)
    records[i].speaker_id = "spk_" + std::to_string(i % 8);
  const double ratios[3] = {0.5, 0.25, 0.25};
  auto splits = make_splits_speaker_disjoint(records, ratios, 3);

  std::map<std::string, std::set<Split>> splits_by_speaker;
  for (const auto& rec : records)
    splits_by_speaker[*rec.speaker_id].insert(splits.at(rec.clip_id));
  for (const auto& [spk, seen] : splits_by_speaker) REQUIRE(seen.size() == 1);

  records[0].speaker_id.reset();
  REQUIRE_THROWS_AS(make_splits_speaker_disjoint(records, ratios, 3), CorpusError);
}

TEST_CASE("split manifest round trips sorted by clip id") {
  auto dir = sbtest::temp_dir("manifest");
  auto records = synthetic_records(5, 5);
  const double ratios[3] = {0.5, 0.3, 0.2};
  auto splits = make_splits(records, ratios, 11);
  write_split_manifest(dir / "splits.tsv", records, splits);

  auto entries = read_split_manifest(dir / "splits.tsv");
  REQUIRE(entries.size() == records.size());
  for (size_t i = 1; i < entries.size(); ++i)
    REQUIRE(entries[i - 1].clip_id < entries[i].clip_id);
  for (const auto& e : entries) REQUIRE(splits.at(e.clip_id) == e.split);
}

TEST_CASE("fixture corpus has the advertised layout and is deterministic") {
  auto dir_a = sbtest::temp_dir("fixture_a");
  auto dir_b = sbtest::temp_dir("fixture_b");
  auto recs_a = generate_fixture_corpus(4, 7, dir_a);
  auto recs_b = generate_fixture_corpus(4, 7, dir_b);
  REQUIRE(recs_a.size() == 8);

  auto meta = read_text_file(dir_a / "metadata.csv");
  int lines = 0;
  for (char ch : meta)
    if (ch == '\n') ++lines;
  REQUIRE(lines == 8);

  for (const auto& rec : recs_a) {
    REQUIRE(std::filesystem::exists(rec.audio_path));
    // Same seed, same bytes.
    auto rel = std::filesystem::relative(rec.audio_path, dir_a);
    REQUIRE(read_text_file(rec.audio_path) == read_text_file(dir_b / rel));
  }

  // The generated corpus parses back through the standard path.
  auto parsed = parse_metadata(dir_a / "metadata.csv", dir_a);
  REQUIRE(parsed.size() == 8);
  int n_fake = 0;
  for (const auto& rec : parsed) n_fake += rec.label == Label::kFake ? 1 : 0;
  REQUIRE(n_fake == 4);
}

TEST_CASE("fixture classes separate on mean mel-band energies") {
  auto dir = sbtest::temp_dir("fixture_sep");
  auto records = generate_fixture_corpus(32, 7, dir);
  FrontendConfig cfg;

  std::vector<std::vector<double>> feats;
  std::vector<int> labels;
  for (const auto& rec : records) {
    auto mel = mel_from_file(rec.audio_path.string(), cfg);
    feats.push_back(sbtest::mean_band_energies(mel));
    labels.push_back(rec.label == Label::kFake ? 1 : 0);
  }

  // Difference-of-class-means direction as the linear oracle.
  const size_t d = feats[0].size();
  std::vector<double> mean_real(d, 0.0), mean_fake(d, 0.0);
  int n_real = 0, n_fake = 0;
  for (size_t i = 0; i < feats.size(); ++i) {
    auto& acc = labels[i] == 1 ? mean_fake : mean_real;
    (labels[i] == 1 ? n_fake : n_real) += 1;
    for (size_t k = 0; k < d; ++k) acc[k] += feats[i][k];
  }
  for (size_t k = 0; k < d; ++k) {
    mean_real[k] /= n_real;
    mean_fake[k] /= n_fake;
  }

  ScoreSet set;
  for (size_t i = 0; i < feats.size(); ++i) {
    double score = 0.0;
    for (size_t k = 0; k < d; ++k) score += (mean_fake[k] - mean_real[k]) * feats[i][k];
    set.scores.push_back(score);
    set.labels.push_back(labels[i]);
  }
  REQUIRE(auc(set) > 0.9);
}
