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
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "spoofbench/common.hpp"
#include "spoofbench/wav.hpp"

namespace spoofbench {

enum class Label { kReal = 0, kFake = 1 };
enum class Split { kTrain = 0, kVal = 1, kTest = 2 };

inline const char* label_name(Label l) { return l == Label::kReal ? "REAL" : "FAKE"; }
inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "TRAIN";
    case Split::kVal: return "VAL";
    default: return "TEST";
  }
}

inline Label parse_label(const std::string& s) {
  std::string t;
  for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "real" || t == "0" || t == "bonafide") return Label::kReal;
  if (t == "fake" || t == "1" || t == "spoof") return Label::kFake;
  throw CorpusError("unrecognized label: " + s);
}

inline Split parse_split(const std::string& s) {
  if (s == "TRAIN") return Split::kTrain;
  if (s == "VAL") return Split::kVal;
  if (s == "TEST") return Split::kTest;
  throw CorpusError("unrecognized split: " + s);
}

struct ClipRecord {
  std::string clip_id;
  std::filesystem::path audio_path;
  Label label = Label::kReal;
  std::optional<std::string> speaker_id;
  double duration_s = 0.0;
};

struct SplitAssignment {
  std::map<std::string, Split> by_clip;  // ordered for stable export
  uint64_t seed = 0;
  double ratios[3] = {0.0, 0.0, 0.0};

  Split at(const std::string& clip_id) const {
    auto it = by_clip.find(clip_id);
    if (it == by_clip.end()) throw CorpusError("clip not in split assignment: " + clip_id);
    return it->second;
  }
};

// How parse_metadata derives labels: from real/ and fake/ subdirectories of
// the audio root, or from an explicit pipe-separated column (0 = clip id).
struct LabelRule {
  enum Kind { kDirectory, kColumn } kind = kDirectory;
  int column = -1;

  static LabelRule directory() { return LabelRule{kDirectory, -1}; }
  static LabelRule column_index(int idx) { return LabelRule{kColumn, idx}; }
};

namespace detail {

inline bool is_valid_label_token(const std::string& s) {
  try {
    parse_label(s);
    return true;
  } catch (const CorpusError&) {
    return false;
  }
}

}  // namespace detail

// Parses LJ Speech-style metadata (one `id|field|field...` record per line).
// All malformed lines are reported together by line number; all missing audio
// files are reported together by path. No partial corpus is ever returned.
inline std::vector<ClipRecord> parse_metadata(const std::filesystem::path& metadata_file,
                                              const std::filesystem::path& audio_root,
                                              const LabelRule& rule = LabelRule::directory(),
                                              bool read_durations = true) {
  std::ifstream in(metadata_file);
  if (!in) throw CorpusError("cannot open metadata file: " + metadata_file.string());

  std::vector<ClipRecord> records;
  std::vector<int> malformed_lines;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_string(line, '|');
    const bool has_pipe = line.find('|') != std::string::npos;
    std::string id = fields.empty() ? std::string() : trim(fields[0]);
    bool bad = !has_pipe || id.empty() || seen_ids.count(id) > 0;
    if (rule.kind == LabelRule::kColumn) {
      if (rule.column <= 0 || rule.column >= static_cast<int>(fields.size()) ||
          !detail::is_valid_label_token(trim(fields[static_cast<size_t>(rule.column)])))
        bad = true;
    }
    if (bad) {
      malformed_lines.push_back(line_no);
      continue;
    }
    seen_ids.insert(id);
    ClipRecord rec;
    rec.clip_id = id;
    if (rule.kind == LabelRule::kColumn)
      rec.label = parse_label(trim(fields[static_cast<size_t>(rule.column)]));
    records.push_back(std::move(rec));
  }

  if (!malformed_lines.empty()) {
    std::ostringstream msg;
    msg << metadata_file.string() << ": malformed metadata line";
    if (malformed_lines.size() > 1) msg << "s";
    for (size_t i = 0; i < malformed_lines.size(); ++i)
      msg << (i == 0 ? " " : ", ") << malformed_lines[i];
    throw CorpusError(msg.str());
  }

  // Resolve audio paths (and labels, under the directory rule).
  std::vector<std::string> missing;
  for (ClipRecord& rec : records) {
    const std::string wav_name = rec.clip_id + ".wav";
    if (rule.kind == LabelRule::kDirectory) {
      const auto real_path = audio_root / "real" / wav_name;
      const auto fake_path = audio_root / "fake" / wav_name;
      const bool has_real = std::filesystem::exists(real_path);
      const bool has_fake = std::filesystem::exists(fake_path);
      if (has_real && has_fake)
        throw CorpusError("ambiguous label for clip " + rec.clip_id +
                          ": present under both real/ and fake/");
      if (has_real) {
        rec.label = Label::kReal;
        rec.audio_path = real_path;
      } else if (has_fake) {
        rec.label = Label::kFake;
        rec.audio_path = fake_path;
      } else {
        missing.push_back(real_path.string() + " (or " + fake_path.string() + ")");
      }
    } else {
      const auto flat = audio_root / wav_name;
      const auto by_label = audio_root /
                            (rec.label == Label::kReal ? "real" : "fake") / wav_name;
      if (std::filesystem::exists(flat)) {
        rec.audio_path = flat;
      } else if (std::filesystem::exists(by_label)) {
        rec.audio_path = by_label;
      } else {
        missing.push_back(flat.string());
      }
    }
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "missing audio file";
    if (missing.size() > 1) msg << "s";
    msg << ":";
    for (const std::string& m : missing) msg << "\n  " << m;
    throw CorpusError(msg.str());
  }

  if (read_durations)
    for (ClipRecord& rec : records) rec.duration_s = wav_duration_seconds(rec.audio_path);
  return records;
}

namespace detail {

// Distributes class counts over split targets by largest remainder, keeping
// both margins exact: per-split totals equal the global floor sizes and
// per-class totals equal the class counts.
inline void allocate_quotas(const int64_t class_counts[2], const int64_t split_sizes[3],
                            int64_t quotas[2][3]) {
  const int64_t total = class_counts[0] + class_counts[1];
  double frac[2][3];
  int64_t row_left[2], col_left[3];
  for (int c = 0; c < 2; ++c) row_left[c] = class_counts[c];
  for (int s = 0; s < 3; ++s) col_left[s] = split_sizes[s];
  for (int c = 0; c < 2; ++c)
    for (int s = 0; s < 3; ++s) {
      const double exact =
          static_cast<double>(split_sizes[s]) * static_cast<double>(class_counts[c]) / total;
      quotas[c][s] = static_cast<int64_t>(std::floor(exact));
      frac[c][s] = exact - static_cast<double>(quotas[c][s]);
      row_left[c] -= quotas[c][s];
      col_left[s] -= quotas[c][s];
    }
  // Hand out the remaining units greedily by fractional part; ties go to the
  // earlier split, then to REAL.
  struct Cell {
    double frac;
    int c, s;
  };
  std::vector<Cell> cells;
  for (int c = 0; c < 2; ++c)
    for (int s = 0; s < 3; ++s) cells.push_back({frac[c][s], c, s});
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (a.frac != b.frac) return a.frac > b.frac;
    if (a.s != b.s) return a.s < b.s;
    return a.c < b.c;
  });
  for (const Cell& cell : cells) {
    if (row_left[cell.c] > 0 && col_left[cell.s] > 0) {
      ++quotas[cell.c][cell.s];
      --row_left[cell.c];
      --col_left[cell.s];
    }
  }
}

}  // namespace detail

// Deterministic stratified splitting. Split sizes are floor(ratio * N) with
// the remainder assigned to TRAIN; within that, class counts follow a
// largest-remainder allocation so both class and split totals are exact.
inline SplitAssignment make_splits(const std::vector<ClipRecord>& records, const double ratios[3],
                                   uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 || std::fabs(sum - 1.0) > 1e-9)
    throw CorpusError("split ratios must be positive and sum to 1");

  std::vector<std::string> ids_by_class[2];
  for (const ClipRecord& rec : records)
    ids_by_class[static_cast<int>(rec.label)].push_back(rec.clip_id);
  for (int c = 0; c < 2; ++c)
    if (ids_by_class[c].size() < 3)
      throw CorpusError(std::string("class ") + label_name(static_cast<Label>(c)) +
                        " has fewer records than splits");

  const int64_t n = static_cast<int64_t>(records.size());
  int64_t split_sizes[3];
  split_sizes[1] = static_cast<int64_t>(std::floor(ratios[1] * static_cast<double>(n)));
  split_sizes[2] = static_cast<int64_t>(std::floor(ratios[2] * static_cast<double>(n)));
  split_sizes[0] = n - split_sizes[1] - split_sizes[2];  // TRAIN absorbs the remainder

  int64_t class_counts[2] = {static_cast<int64_t>(ids_by_class[0].size()),
                             static_cast<int64_t>(ids_by_class[1].size())};
  int64_t quotas[2][3];
  detail::allocate_quotas(class_counts, split_sizes, quotas);

  SplitAssignment out;
  out.seed = seed;
  for (int i = 0; i < 3; ++i) out.ratios[i] = ratios[i];
  for (int c = 0; c < 2; ++c) {
    auto& ids = ids_by_class[c];
    std::sort(ids.begin(), ids.end());  // input order must not matter
    Rng rng(seed ^ fnv1a64(label_name(static_cast<Label>(c))));
    rng.shuffle(ids);
    int64_t cursor = 0;
    for (int s = 0; s < 3; ++s)
      for (int64_t k = 0; k < quotas[c][s]; ++k)
        out.by_clip[ids[static_cast<size_t>(cursor++)]] = static_cast<Split>(s);
  }
  return out;
}

// Speaker-disjoint variant (off by default in the pipeline): whole speakers
// are assigned to splits so realized sizes track the ratios as closely as the
// speaker granularity allows. Stratification is best-effort at this
// granularity.
inline SplitAssignment make_splits_speaker_disjoint(const std::vector<ClipRecord>& records,
                                                    const double ratios[3], uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 || std::fabs(sum - 1.0) > 1e-9)
    throw CorpusError("split ratios must be positive and sum to 1");
  std::map<std::string, std::vector<const ClipRecord*>> by_speaker;
  for (const ClipRecord& rec : records) {
    if (!rec.speaker_id || rec.speaker_id->empty())
      throw CorpusError("speaker-disjoint split requires speaker_id on every clip (missing on " +
                        rec.clip_id + ")");
    by_speaker[*rec.speaker_id].push_back(&rec);
  }
  if (by_speaker.size() < 3) throw CorpusError("speaker-disjoint split needs at least 3 speakers");

  std::vector<std::string> speakers;
  for (const auto& kv : by_speaker) speakers.push_back(kv.first);
  Rng rng(seed ^ fnv1a64("speakers"));
  rng.shuffle(speakers);

  const double n = static_cast<double>(records.size());
  SplitAssignment out;
  out.seed = seed;
  for (int i = 0; i < 3; ++i) out.ratios[i] = ratios[i];
  double assigned[3] = {0, 0, 0};
  for (const std::string& spk : speakers) {
    // Place each speaker where the realized fraction lags its target most.
    int best = 0;
    double best_gap = -1e30;
    for (int s = 0; s < 3; ++s) {
      double gap = ratios[s] - assigned[s] / n;
      if (gap > best_gap) {
        best_gap = gap;
        best = s;
      }
    }
    for (const ClipRecord* rec : by_speaker[spk]) out.by_clip[rec->clip_id] = static_cast<Split>(best);
    assigned[best] += static_cast<double>(by_speaker[spk].size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split manifest: `clip_id<TAB>label<TAB>split`, one line per clip, sorted by
// clip_id.
// ---------------------------------------------------------------------------

inline void write_split_manifest(const std::filesystem::path& path,
                                 const std::vector<ClipRecord>& records,
                                 const SplitAssignment& splits) {
  std::map<std::string, Label> labels;
  for (const ClipRecord& rec : records) labels[rec.clip_id] = rec.label;
  std::ostringstream out;
  for (const auto& [clip_id, split] : splits.by_clip) {
    auto it = labels.find(clip_id);
    if (it == labels.end()) throw CorpusError("split manifest: unknown clip " + clip_id);
    out << clip_id << '\t' << label_name(it->second) << '\t' << split_name(split) << '\n';
  }
  write_text_file(path, out.str());
}

struct ManifestEntry {
  std::string clip_id;
  Label label;
  Split split;
};

inline std::vector<ManifestEntry> read_split_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open split manifest: " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_string(line, '\t');
    if (fields.size() != 3)
      throw CorpusError("split manifest " + path.string() + ": malformed line " +
                        std::to_string(line_no));
    entries.push_back({fields[0], parse_label(fields[1]), parse_split(fields[2])});
  }
  return entries;
}

// ---------------------------------------------------------------------------
// Corpus statistics.
// ---------------------------------------------------------------------------

struct CorpusStats {
  int64_t count[3][2] = {{0, 0}, {0, 0}, {0, 0}};  // [split][label]

  int64_t split_total(Split s) const {
    return count[static_cast<int>(s)][0] + count[static_cast<int>(s)][1];
  }
  int64_t label_total(Label l) const {
    return count[0][static_cast<int>(l)] + count[1][static_cast<int>(l)] +
           count[2][static_cast<int>(l)];
  }
  int64_t total() const { return label_total(Label::kReal) + label_total(Label::kFake); }
  double fake_fraction(Split s) const {
    int64_t t = split_total(s);
    return t > 0 ? static_cast<double>(count[static_cast<int>(s)][1]) / static_cast<double>(t)
                 : 0.0;
  }
  double fake_fraction() const {
    int64_t t = total();
    return t > 0 ? static_cast<double>(label_total(Label::kFake)) / static_cast<double>(t) : 0.0;
  }
};

inline CorpusStats compute_stats(const std::vector<ClipRecord>& records,
                                 const SplitAssignment& splits) {
  CorpusStats stats;
  for (const ClipRecord& rec : records) {
    Split s = splits.at(rec.clip_id);
    ++stats.count[static_cast<int>(s)][static_cast<int>(rec.label)];
  }
  return stats;
}

}  // namespace spoofbench
