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

#include "spoofbench/evalkit.hpp"
#include "test_util.hpp"

using namespace spoofbench;

namespace {

ScoreSet four_point() {
  ScoreSet s;
  s.scores = {0.9, 0.1, 0.8, 0.2};
  s.labels = {1, 0, 0, 1};
  return s;
}

ScoreSet random_set(Rng& rng, int64_t n) {
  ScoreSet s;
  while (true) {
    s.scores.clear();
    s.labels.clear();
    for (int64_t i = 0; i < n; ++i) {
      // Coarse grid so ties actually happen.
      s.scores.push_back(std::floor(rng.uniform() * 8.0) / 8.0);
      s.labels.push_back(rng.uniform() < 0.5 ? 1 : 0);
    }
    int64_t pos = 0;
    for (int l : s.labels) pos += l;
    if (pos > 0 && pos < n) return s;
  }
}

}  // namespace

TEST_CASE("confusion counts at a threshold") {
  ScoreSet perfect;
  perfect.scores = {0.9, 0.8, 0.2, 0.1};
  perfect.labels = {1, 1, 0, 0};
  auto c = confusion(perfect, 0.5);
  REQUIRE(c.tp == 2);
  REQUIRE(c.fp == 0);
  REQUIRE(c.tn == 2);
  REQUIRE(c.fn == 0);

  // Threshold below everything predicts all FAKE.
  auto all_fake = confusion(perfect, -std::numeric_limits<double>::infinity());
  REQUIRE(all_fake.tp == 2);
  REQUIRE(all_fake.fp == 2);
  REQUIRE(all_fake.tn == 0);
  REQUIRE(all_fake.fn == 0);

  auto mixed = confusion(four_point(), 0.5);
  REQUIRE(mixed.tp == 1);
  REQUIRE(mixed.fp == 1);
  REQUIRE(mixed.tn == 1);
  REQUIRE(mixed.fn == 1);

  // Ties go positive.
  ScoreSet tie;
  tie.scores = {0.5, 0.5};
  tie.labels = {1, 0};
  auto t = confusion(tie, 0.5);
  REQUIRE(t.tp == 1);
  REQUIRE(t.fp == 1);
}

TEST_CASE("confusion totals always sum to n") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    auto set = random_set(rng, 9);
    for (double t : {-1.0, 0.0, 0.25, 0.5, 0.99, 2.0})
      REQUIRE(confusion(set, t).total() == set.n());
  }
}

TEST_CASE("basic metrics formulas and conventions") {
  auto m = basic_metrics({2, 1, 2, 0});
  REQUIRE(m.accuracy == Catch::Approx(0.8));
  REQUIRE(m.precision == Catch::Approx(2.0 / 3.0));
  REQUIRE(m.recall == Catch::Approx(1.0));
  REQUIRE(m.f1 == Catch::Approx(0.8));

  // Degenerate all-negative predictor: 0/0 -> 0 everywhere.
  auto z = basic_metrics({0, 0, 10, 0});
  REQUIRE(z.precision == 0.0);
  REQUIRE(z.recall == 0.0);
  REQUIRE(z.f1 == 0.0);
  REQUIRE(z.accuracy == 1.0);

  // F1 never exceeds twice either component.
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    Confusion c{static_cast<int64_t>(rng.below(20)), static_cast<int64_t>(rng.below(20)),
                static_cast<int64_t>(rng.below(20)), static_cast<int64_t>(rng.below(20))};
    if (c.total() == 0) continue;
    auto b = basic_metrics(c);
    REQUIRE(b.f1 <= 2.0 * b.precision + 1e-12);
    REQUIRE(b.f1 <= 2.0 * b.recall + 1e-12);
  }
}

TEST_CASE("roc curve endpoints and known values") {
  auto curve = roc_curve(four_point());
  REQUIRE(curve.points.front().fpr == 0.0);
  REQUIRE(curve.points.front().tpr == 0.0);
  REQUIRE(std::isinf(curve.points.front().threshold));
  REQUIRE(curve.points.back().fpr == 1.0);
  REQUIRE(curve.points.back().tpr == 1.0);
  REQUIRE(auc(curve) == Catch::Approx(0.75).margin(1e-12));

  // Perfect separation passes through (0, 1).
  ScoreSet perfect;
  perfect.scores = {0.9, 0.8, 0.2, 0.1};
  perfect.labels = {1, 1, 0, 0};
  auto pc = roc_curve(perfect);
  bool hits_corner = false;
  for (const auto& p : pc.points) hits_corner |= (p.fpr == 0.0 && p.tpr == 1.0);
  REQUIRE(hits_corner);
  REQUIRE(auc(pc) == Catch::Approx(1.0));

  // All scores equal: two sentinels plus a single (1,1) point, AUC 0.5.
  ScoreSet flat;
  flat.scores = {0.5, 0.5, 0.5, 0.5};
  flat.labels = {1, 0, 1, 0};
  auto fc = roc_curve(flat);
  REQUIRE(fc.points.size() == 3);
  REQUIRE(fc.points[1].fpr == 1.0);
  REQUIRE(fc.points[1].tpr == 1.0);
  REQUIRE(auc(fc) == Catch::Approx(0.5));

  ScoreSet single;
  single.scores = {0.3, 0.4};
  single.labels = {1, 1};
  REQUIRE_THROWS(roc_curve(single));
}

TEST_CASE("known eer values") {
  REQUIRE(eer(four_point()).eer == Catch::Approx(0.5).margin(1e-12));

  ScoreSet perfect;
  perfect.scores = {0.9, 0.8, 0.2, 0.1};
  perfect.labels = {1, 1, 0, 0};
  REQUIRE(eer(perfect).eer == Catch::Approx(0.0).margin(1e-12));

  // Label-inverted perfect scorer sits at the opposite extreme.
  ScoreSet inverted = perfect;
  inverted.labels = {0, 0, 1, 1};
  REQUIRE(eer(inverted).eer == Catch::Approx(1.0).margin(1e-12));

  // Reversal symmetry: EER(s, y) = EER(-s, 1-y).
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto set = random_set(rng, 10);
    ScoreSet flipped;
    for (int64_t i = 0; i < set.n(); ++i) {
      flipped.scores.push_back(-set.scores[static_cast<size_t>(i)]);
      flipped.labels.push_back(1 - set.labels[static_cast<size_t>(i)]);
    }
    REQUIRE(eer(set).eer == Catch::Approx(eer(flipped).eer).margin(1e-9));
  }
}

TEST_CASE("auc equals pairwise concordance on random sets") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    auto set = random_set(rng, 2 + static_cast<int64_t>(rng.below(11)));
    REQUIRE(auc(set) == Catch::Approx(sbtest::auc_pairwise(set)).margin(1e-9));
  }
}

TEST_CASE("eer equals the sweep oracle on random sets") {
  Rng rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    auto set = random_set(rng, 2 + static_cast<int64_t>(rng.below(11)));
    REQUIRE(eer(set).eer == Catch::Approx(sbtest::eer_sweep(set)).margin(1e-9));
  }
}

TEST_CASE("monotone transforms leave auc and eer unchanged") {
  Rng rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    auto set = random_set(rng, 12);
    const double base_auc = auc(set);
    const double base_eer = eer(set).eer;

    ScoreSet exp_set = set, affine_set = set;
    for (auto& s : exp_set.scores) s = std::exp(s);
    for (auto& s : affine_set.scores) s = 3.5 * s + 11.0;
    REQUIRE(auc(exp_set) == Catch::Approx(base_auc).margin(1e-12));
    REQUIRE(auc(affine_set) == Catch::Approx(base_auc).margin(1e-12));
    REQUIRE(eer(exp_set).eer == Catch::Approx(base_eer).margin(1e-9));
    REQUIRE(eer(affine_set).eer == Catch::Approx(base_eer).margin(1e-9));
  }
}

TEST_CASE("score reversal flips auc") {
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    auto set = random_set(rng, 10);
    ScoreSet neg = set;
    for (auto& s : neg.scores) s = -s;
    REQUIRE(auc(neg) == Catch::Approx(1.0 - auc(set)).margin(1e-9));
  }
}

TEST_CASE("det points mirror the roc and contain the eer crossing") {
  auto set = four_point();
  auto det = det_points(set);
  auto curve = roc_curve(set);
  REQUIRE(det.size() == curve.points.size());
  for (size_t i = 0; i < det.size(); ++i) {
    REQUIRE(det[i].fpr == curve.points[i].fpr);
    REQUIRE(det[i].fnr == Catch::Approx(1.0 - curve.points[i].tpr));
  }

  // Uninformative scorer: DET points lie on fpr + fnr = 1.
  ScoreSet flat;
  flat.scores = {0.5, 0.5, 0.5, 0.5};
  flat.labels = {1, 0, 1, 0};
  for (const auto& p : det_points(flat)) REQUIRE(p.fpr + p.fnr == Catch::Approx(1.0));

  // The eer value lies on the DET curve where fpr = fnr (linear interpolation
  // between bracketing points).
  Rng rng(59);
  for (int trial = 0; trial < 30; ++trial) {
    auto s = random_set(rng, 11);
    const double e = eer(s).eer;
    auto pts = det_points(s);
    bool matched = false;
    for (size_t i = 1; i < pts.size() && !matched; ++i) {
      const double d0 = pts[i - 1].fpr - pts[i - 1].fnr;
      const double d1 = pts[i].fpr - pts[i].fnr;
      if (d0 == 0.0) matched = std::fabs(pts[i - 1].fpr - e) < 1e-9;
      else if (d1 == 0.0) matched = std::fabs(pts[i].fpr - e) < 1e-9;
      else if (d0 < 0.0 && d1 > 0.0) {
        const double t = -d0 / (d1 - d0);
        const double fpr = pts[i - 1].fpr + t * (pts[i].fpr - pts[i - 1].fpr);
        matched = std::fabs(fpr - e) < 1e-9;
      }
    }
    REQUIRE(matched);
  }
}

TEST_CASE("evaluate_scores assembles a consistent report") {
  auto set = four_point();
  auto report = evaluate_scores(set, ThresholdPolicy::fixed(0.5));
  REQUIRE(report.threshold_used == 0.5);
  REQUIRE(report.auc == Catch::Approx(0.75));
  REQUIRE(report.eer == Catch::Approx(0.5));
  REQUIRE(report.confusion.total() == 4);
  REQUIRE(report.accuracy == Catch::Approx(0.5));

  ScoreSet perfect;
  perfect.scores = {0.9, 0.8, 0.2, 0.1};
  perfect.labels = {1, 1, 0, 0};
  auto p = evaluate_scores(perfect);
  REQUIRE(p.accuracy == 1.0);
  REQUIRE(p.f1 == 1.0);
  REQUIRE(p.eer == 0.0);
  REQUIRE(p.auc == 1.0);

  // AUC of reversed scores complements to 1.
  ScoreSet neg = set;
  for (auto& s : neg.scores) s = -s;
  REQUIRE(auc(neg) + report.auc == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("score files round trip sorted") {
  auto dir = sbtest::temp_dir("scorefile");
  std::vector<ScoredClip> rows{{"zz", 1, 0.875}, {"aa", 0, 0.125}, {"mm", 1, 0.5}};
  write_score_file(dir / "scores.tsv", rows);
  auto loaded = read_score_file(dir / "scores.tsv");
  REQUIRE(loaded.size() == 3);
  REQUIRE(loaded[0].clip_id == "aa");
  REQUIRE(loaded[1].clip_id == "mm");
  REQUIRE(loaded[2].clip_id == "zz");
  REQUIRE(loaded[2].score == 0.875);

  auto set = to_score_set(loaded);
  REQUIRE(set.n() == 3);

  write_text_file(dir / "bad.tsv", "only_two\tfields\n");
  REQUIRE_THROWS_AS(read_score_file(dir / "bad.tsv"), IoError);
}

TEST_CASE("report artifacts are written") {
  auto dir = sbtest::temp_dir("report");
  auto report = evaluate_scores(four_point());
  write_metrics_report(dir, report, {{"model", "probe"}, {"split", "TEST"}});

  auto json_text = read_text_file(dir / "report.json");
  auto j = nlohmann::json::parse(json_text);
  REQUIRE(j["auc"].get<double>() == Catch::Approx(0.75));
  REQUIRE(j["confusion"]["tp"].get<int>() == 1);
  REQUIRE(j["metadata"]["model"] == "probe");

  auto roc_text = read_text_file(dir / "roc.csv");
  REQUIRE(roc_text.rfind("threshold,fpr,tpr\n", 0) == 0);
  auto det_text = read_text_file(dir / "det.csv");
  REQUIRE(det_text.rfind("fpr,fnr\n", 0) == 0);
}

TEST_CASE("percent table renders fractions times 100") {
  auto report = evaluate_scores(four_point());
  auto row = render_metrics_row("probe", report);
  REQUIRE(row.find("50.00") != std::string::npos);  // accuracy
  REQUIRE(row.find("75.00") != std::string::npos);  // auc
}
