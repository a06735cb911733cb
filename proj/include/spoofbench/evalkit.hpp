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
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "spoofbench/common.hpp"

namespace spoofbench {

// Scores are oriented so that higher means more likely FAKE; label 1 = FAKE
// is the positive class throughout.
struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;

  int64_t n() const { return static_cast<int64_t>(scores.size()); }

  void validate() const {
    if (scores.size() != labels.size()) throw Error("score set: length mismatch");
    if (scores.empty()) throw Error("score set: empty");
    for (double s : scores)
      if (!std::isfinite(s)) throw Error("score set: non-finite score");
    for (int l : labels)
      if (l != 0 && l != 1) throw Error("score set: labels must be 0 or 1");
  }
  void require_both_classes() const {
    validate();
    int64_t pos = 0;
    for (int l : labels) pos += l;
    if (pos == 0 || pos == n()) throw Error("score set: both classes required");
  }
};

struct Confusion {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  int64_t total() const { return tp + fp + tn + fn; }
};

// Predict FAKE iff score >= threshold (ties predicted positive).
inline Confusion confusion(const ScoreSet& set, double threshold) {
  set.validate();
  Confusion c;
  for (int64_t i = 0; i < set.n(); ++i) {
    const bool pred = set.scores[static_cast<size_t>(i)] >= threshold;
    const bool pos = set.labels[static_cast<size_t>(i)] == 1;
    if (pred && pos) ++c.tp;
    else if (pred && !pos) ++c.fp;
    else if (!pred && !pos) ++c.tn;
    else ++c.fn;
  }
  return c;
}

struct BasicMetrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

// Standard formulas with the 0/0 -> 0 convention for precision, recall, F1.
inline BasicMetrics basic_metrics(const Confusion& c) {
  if (c.total() < 1) throw Error("basic_metrics: empty confusion");
  BasicMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
  return m;
}

struct RocPoint {
  double threshold = 0, fpr = 0, tpr = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // threshold descending, sentinels at both ends
};

// ROC with tie grouping: one step per distinct score, bracketed by the
// sentinel points (+inf, 0, 0) and (-inf, 1, 1).
inline RocCurve roc_curve(const ScoreSet& set) {
  set.require_both_classes();
  const int64_t n = set.n();
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return set.scores[static_cast<size_t>(a)] > set.scores[static_cast<size_t>(b)];
  });
  int64_t pos = 0;
  for (int l : set.labels) pos += l;
  const int64_t neg = n - pos;

  RocCurve curve;
  const double inf = std::numeric_limits<double>::infinity();
  curve.points.push_back({inf, 0.0, 0.0});
  int64_t tp = 0, fp = 0;
  int64_t i = 0;
  while (i < n) {
    const double s = set.scores[static_cast<size_t>(order[static_cast<size_t>(i)])];
    while (i < n && set.scores[static_cast<size_t>(order[static_cast<size_t>(i)])] == s) {
      if (set.labels[static_cast<size_t>(order[static_cast<size_t>(i)])] == 1) ++tp;
      else ++fp;
      ++i;
    }
    curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  curve.points.push_back({-inf, 1.0, 1.0});
  return curve;
}

// Trapezoidal area under the curve; equals tie-corrected pair concordance.
inline double auc(const RocCurve& curve) {
  if (curve.points.size() < 2) throw Error("auc: curve needs at least two points");
  double area = 0.0;
  for (size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

inline double auc(const ScoreSet& set) { return auc(roc_curve(set)); }

struct EerResult {
  double eer = 0;
  double threshold = 0;
};

// Sweeps FAR = FPR and FRR = 1 - TPR along the ROC staircase. An exact
// FAR = FRR tie at a realized threshold is returned directly; otherwise the
// crossing is linearly interpolated between the adjacent points.
inline EerResult eer(const ScoreSet& set) {
  const RocCurve curve = roc_curve(set);
  const auto& pts = curve.points;
  for (const RocPoint& p : pts) {
    const double far = p.fpr, frr = 1.0 - p.tpr;
    if (far == frr && std::isfinite(p.threshold)) return {far, p.threshold};
  }
  for (size_t i = 1; i < pts.size(); ++i) {
    const double d0 = pts[i - 1].fpr - (1.0 - pts[i - 1].tpr);
    const double d1 = pts[i].fpr - (1.0 - pts[i].tpr);
    if (d0 < 0.0 && d1 > 0.0) {
      const double t = -d0 / (d1 - d0);
      const double far = pts[i - 1].fpr + t * (pts[i].fpr - pts[i - 1].fpr);
      double threshold;
      if (std::isfinite(pts[i - 1].threshold) && std::isfinite(pts[i].threshold))
        threshold = pts[i - 1].threshold + t * (pts[i].threshold - pts[i - 1].threshold);
      else if (std::isfinite(pts[i].threshold))
        threshold = pts[i].threshold;
      else
        threshold = pts[i - 1].threshold;
      return {far, threshold};
    }
  }
  // FAR - FRR is monotone from -1 to +1 over the sentinel-bracketed curve, so
  // one of the branches above always fires.
  throw Error("eer: no crossing found");
}

struct DetPoint {
  double fpr = 0, fnr = 0;
};

// DET curve in raw probability coordinates, one point per ROC point.
inline std::vector<DetPoint> det_points(const ScoreSet& set) {
  const RocCurve curve = roc_curve(set);
  std::vector<DetPoint> out;
  out.reserve(curve.points.size());
  for (const RocPoint& p : curve.points) out.push_back({p.fpr, 1.0 - p.tpr});
  return out;
}

// ---------------------------------------------------------------------------
// Full report.
// ---------------------------------------------------------------------------

struct ThresholdPolicy {
  enum Kind { kFixed, kEerThreshold } kind = kFixed;
  double fixed_value = 0.5;

  static ThresholdPolicy fixed(double value = 0.5) { return {kFixed, value}; }
  static ThresholdPolicy at_eer() { return {kEerThreshold, 0.0}; }
};

struct MetricsReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0, eer = 0, auc = 0;
  double threshold_used = 0.5;
  Confusion confusion;
  RocCurve roc;
  std::vector<DetPoint> det;
};

inline MetricsReport evaluate_scores(const ScoreSet& set,
                                     const ThresholdPolicy& policy = ThresholdPolicy::fixed()) {
  set.require_both_classes();
  MetricsReport report;
  report.roc = roc_curve(set);
  report.auc = auc(report.roc);
  const EerResult e = eer(set);
  report.eer = e.eer;
  report.det = det_points(set);
  report.threshold_used = policy.kind == ThresholdPolicy::kFixed ? policy.fixed_value : e.threshold;
  report.confusion = confusion(set, report.threshold_used);
  const BasicMetrics m = basic_metrics(report.confusion);
  report.accuracy = m.accuracy;
  report.precision = m.precision;
  report.recall = m.recall;
  report.f1 = m.f1;
  return report;
}

// ---------------------------------------------------------------------------
// Score files: `clip_id<TAB>label(0|1)<TAB>score`, sorted by clip_id. Metrics
// are computable from this file alone.
// ---------------------------------------------------------------------------

struct ScoredClip {
  std::string clip_id;
  int label = 0;
  double score = 0;
};

inline void write_score_file(const std::filesystem::path& path, std::vector<ScoredClip> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const ScoredClip& a, const ScoredClip& b) { return a.clip_id < b.clip_id; });
  std::ostringstream out;
  out.precision(17);
  for (const ScoredClip& row : rows)
    out << row.clip_id << '\t' << row.label << '\t' << row.score << '\n';
  write_text_file(path, out.str());
}

inline std::vector<ScoredClip> read_score_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score file: " + path.string());
  std::vector<ScoredClip> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_string(line, '\t');
    if (fields.size() != 3)
      throw IoError("score file " + path.string() + ": malformed line " + std::to_string(line_no));
    ScoredClip row;
    row.clip_id = fields[0];
    try {
      row.label = std::stoi(fields[1]);
      row.score = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw IoError("score file " + path.string() + ": malformed line " + std::to_string(line_no));
    }
    if (row.label != 0 && row.label != 1)
      throw IoError("score file " + path.string() + ": bad label on line " + std::to_string(line_no));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ScoreSet to_score_set(const std::vector<ScoredClip>& rows) {
  ScoreSet set;
  for (const ScoredClip& row : rows) {
    set.scores.push_back(row.score);
    set.labels.push_back(row.label);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Artifact emission: JSON report plus roc.csv / det.csv next to it.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string finite_or_name(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}
}  // namespace detail

inline void write_curve_csvs(const std::filesystem::path& dir, const MetricsReport& report) {
  {
    std::ostringstream out;
    out.precision(17);
    out << "threshold,fpr,tpr\n";
    for (const RocPoint& p : report.roc.points)
      out << detail::finite_or_name(p.threshold) << ',' << p.fpr << ',' << p.tpr << '\n';
    write_text_file(dir / "roc.csv", out.str());
  }
  {
    std::ostringstream out;
    out.precision(17);
    out << "fpr,fnr\n";
    for (const DetPoint& p : report.det) out << p.fpr << ',' << p.fnr << '\n';
    write_text_file(dir / "det.csv", out.str());
  }
}

inline nlohmann::json metrics_report_to_json(const MetricsReport& r,
                                             const std::map<std::string, std::string>& metadata) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["eer"] = r.eer;
  j["auc"] = r.auc;
  j["threshold_used"] = r.threshold_used;
  j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn},
                    {"fn", r.confusion.fn}};
  j["metadata"] = metadata;
  return j;
}

inline void write_metrics_report(const std::filesystem::path& dir, const MetricsReport& report,
                                 const std::map<std::string, std::string>& metadata) {
  write_text_file(dir / "report.json", metrics_report_to_json(report, metadata).dump(2) + "\n");
  write_curve_csvs(dir, report);
}

// Table rendering multiplies by 100 to match conventional percent reporting;
// everything internal stays a fraction.
inline std::string render_metrics_row(const std::string& name, const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f", name.c_str(),
                100.0 * r.accuracy, 100.0 * r.precision, 100.0 * r.recall, 100.0 * r.f1,
                100.0 * r.eer, 100.0 * r.auc);
  return std::string(buf);
}

inline std::string render_metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::ostringstream out;
  char header[256];
  std::snprintf(header, sizeof header, "%-16s %7s %7s %7s %7s %7s %7s", "model", "acc", "prec",
                "rec", "f1", "eer", "auc");
  out << header << '\n';
  for (const auto& [name, report] : rows) out << render_metrics_row(name, report) << '\n';
  return out.str();
}

}  // namespace spoofbench
