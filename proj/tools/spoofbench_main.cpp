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

// Command-line front door for the benchmark pipeline: prepare splits,
// synthesize fixture corpora, train, evaluate score files, and run zero-shot
// suites. Every command validates its inputs before touching --out, writes a
// run.json manifest next to its outputs, and is rerun-safe: identical inputs
// produce byte-identical primary outputs (split manifests, history, scores).

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "spoofbench/corpus.hpp"
#include "spoofbench/evalkit.hpp"
#include "spoofbench/fixture.hpp"
#include "spoofbench/models.hpp"
#include "spoofbench/trainer.hpp"
#include "spoofbench/zeroshot.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace spoofbench;

// Exit codes are part of the scripting interface; see the --help footer.
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCorpus = 10;
constexpr int kExitDegenerate = 11;
constexpr int kExitOffline = 12;
constexpr int kExitDiverged = 13;
constexpr int kExitIo = 14;

const char* kFooter =
    "Exit codes:\n"
    "  0   success\n"
    "  2   usage or configuration error\n"
    "  10  E_CORPUS      corpus, metadata, or split manifest problem\n"
    "  11  E_DEGENERATE  degenerate input (single-class scores, empty split)\n"
    "  12  E_OFFLINE     pretrained weights not available in this environment\n"
    "  13  E_DIVERGED    training diverged (non-finite loss)\n"
    "  14  E_IO          file I/O, run-lock, or checkpoint failure\n"
    "\n"
    "Environment:\n"
    "  SPOOFBENCH_WEIGHTS_DIR  directory searched for cached pretrained\n"
    "                          backbone checkpoints (<backbone-id>.ckpt)\n";

// ---------------------------------------------------------------------------
// Small helpers.
// ---------------------------------------------------------------------------

std::string upper_id(std::string s) {
  for (char& c : s) {
    if (c == '-') c = '_';
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return s;
}

std::string flag_style(std::string s) {
  for (char& c : s) {
    if (c == '_') c = '-';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

std::string architecture_choices() {
  std::string out;
  for (int i = 0; i <= 5; ++i) {
    if (i) out += ", ";
    out += flag_style(architecture_name(static_cast<Architecture>(i)));
  }
  return out;
}

std::string backend_choices() {
  std::string out;
  for (int i = 0; i <= 5; ++i) {
    if (i) out += ", ";
    out += flag_style(zero_shot_backend_name(static_cast<ZeroShotBackendId>(i)));
  }
  return out;
}

Architecture resolve_architecture(const std::string& s) {
  try {
    return parse_architecture(upper_id(s));
  } catch (const Error&) {
    throw Error("unknown architecture '" + s + "'; valid: " + architecture_choices());
  }
}

ZeroShotBackendId resolve_backend(const std::string& s) {
  try {
    return parse_zero_shot_backend(upper_id(s));
  } catch (const Error&) {
    throw Error("unknown zero-shot backend '" + s + "'; valid: " + backend_choices());
  }
}

double parse_double(const std::string& s, const std::string& what) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw Error(what + ": not a number: '" + s + "'");
  return v;
}

void parse_ratios(const std::string& s, double out[3]) {
  const std::vector<std::string> parts = split_string(s, ',');
  if (parts.size() != 3)
    throw Error("--ratios expects three comma-separated fractions (e.g. 0.7,0.15,0.15), got '" +
                s + "'");
  for (int i = 0; i < 3; ++i) out[i] = parse_double(trim(parts[i]), "--ratios");
}

LabelRule label_rule_from(int column) {
  return column >= 0 ? LabelRule::column_index(column) : LabelRule::directory();
}

std::string fnv_hex(const std::string& content) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(content)));
  return std::string(buf);
}

std::string file_fingerprint(const fs::path& path) {
  return fnv_hex(read_text_file(path));
}

// One lock file per run directory; concurrent invocations must target
// distinct --out directories.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST)
        throw IoError("run directory " + dir.string() + " is locked (" + path_.string() +
                      " exists); concurrent runs must use distinct --out directories. "
                      "Remove the lock file if no run is active.");
      throw IoError("cannot create lock file: " + path_.string());
    }
    ::close(fd);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

fs::path make_run_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (!fs::is_directory(out)) throw IoError("cannot create output directory: " + out);
  return fs::path(out);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

void write_run_manifest(const fs::path& dir, const std::string& command, ordered_json config,
                        int64_t clip_count, const std::string& fingerprint,
                        std::vector<std::string> outputs, double wall_s) {
  ordered_json j;
  j["command"] = command;
  j["config"] = std::move(config);
  j["input"] = {{"clip_count", clip_count}, {"fingerprint_fnv1a64", fingerprint}};
  j["outputs"] = std::move(outputs);
  j["wall_clock_s"] = wall_s;
  write_text_file(dir / "run.json", j.dump(2) + "\n");
}

void write_confusion_csv(const fs::path& dir, const MetricsReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,tp,fp,tn,fn\n";
  out << r.threshold_used << ',' << r.confusion.tp << ',' << r.confusion.fp << ','
      << r.confusion.tn << ',' << r.confusion.fn << '\n';
  write_text_file(dir / "confusion.csv", out.str());
}

// Reads a `clip_id<TAB>label<TAB>split` manifest and cross-checks it against
// the parsed corpus: every corpus clip must be assigned, every manifest line
// must name a known clip, and labels must agree.
SplitAssignment load_split_assignment(const fs::path& path,
                                      const std::vector<ClipRecord>& records) {
  const std::vector<ManifestEntry> entries = read_split_manifest(path);
  std::map<std::string, Label> by_id;
  for (const ClipRecord& rec : records) by_id[rec.clip_id] = rec.label;

  SplitAssignment splits;
  for (const ManifestEntry& e : entries) {
    const auto it = by_id.find(e.clip_id);
    if (it == by_id.end())
      throw CorpusError("split manifest " + path.string() + ": clip " + e.clip_id +
                        " is not in the corpus");
    if (it->second != e.label)
      throw CorpusError("split manifest " + path.string() + ": label mismatch for clip " +
                        e.clip_id);
    splits.by_clip[e.clip_id] = e.split;
  }
  for (const ClipRecord& rec : records)
    if (splits.by_clip.find(rec.clip_id) == splits.by_clip.end())
      throw CorpusError("split manifest " + path.string() + ": corpus clip " + rec.clip_id +
                        " has no split");
  return splits;
}

std::string render_corpus_stats(const std::vector<ClipRecord>& records,
                                const SplitAssignment& splits) {
  const CorpusStats stats = compute_stats(records, splits);
  std::ostringstream out;
  out << "clips " << stats.total() << " (real " << stats.label_total(Label::kReal) << ", fake "
      << stats.label_total(Label::kFake) << ")\n";
  for (int s = 0; s < 3; ++s) {
    const Split split = static_cast<Split>(s);
    char line[96];
    std::snprintf(line, sizeof line, "  %-5s %6lld (real %lld, fake %lld)\n", split_name(split),
                  static_cast<long long>(stats.split_total(split)),
                  static_cast<long long>(stats.count[s][0]),
                  static_cast<long long>(stats.count[s][1]));
    out << line;
  }
  std::map<int64_t, int64_t> histogram;
  for (const ClipRecord& rec : records)
    ++histogram[static_cast<int64_t>(std::floor(rec.duration_s))];
  out << "duration histogram (1 s bins)\n";
  for (const auto& [bin, count] : histogram)
    out << "  [" << bin << "," << (bin + 1) << ") " << count << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareOpts {
  std::string corpus, metadata, out;
  std::string ratios = "0.7,0.15,0.15";
  uint64_t seed = 0;
  int label_column = -1;
  bool speaker_disjoint = false;
};

int cmd_prepare(const PrepareOpts& opt) {
  Stopwatch clock;
  double ratios[3];
  parse_ratios(opt.ratios, ratios);

  const std::vector<ClipRecord> records =
      parse_metadata(opt.metadata, opt.corpus, label_rule_from(opt.label_column), true);
  if (records.empty()) throw CorpusError("corpus is empty: " + opt.metadata);
  const SplitAssignment splits = opt.speaker_disjoint
                                     ? make_splits_speaker_disjoint(records, ratios, opt.seed)
                                     : make_splits(records, ratios, opt.seed);

  const fs::path out = make_run_dir(opt.out);
  RunLock lock(out);
  write_split_manifest(out / "splits.tsv", records, splits);
  const std::string stats = render_corpus_stats(records, splits);
  write_text_file(out / "stats.txt", stats);

  ordered_json config;
  config["corpus"] = opt.corpus;
  config["metadata"] = opt.metadata;
  config["seed"] = opt.seed;
  config["ratios"] = {ratios[0], ratios[1], ratios[2]};
  config["label_column"] = opt.label_column;
  config["speaker_disjoint"] = opt.speaker_disjoint;
  write_run_manifest(out, "prepare", std::move(config),
                     static_cast<int64_t>(records.size()),
                     file_fingerprint(out / "splits.tsv"), {"splits.tsv", "stats.txt"},
                     clock.seconds());

  std::cout << stats;
  std::cout << "wrote " << records.size() << "-line split manifest to "
            << (out / "splits.tsv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fixture
// ---------------------------------------------------------------------------

struct FixtureOpts {
  std::string out;
  std::string profile = "clean";
  int n_per_class = 4;
  uint64_t seed = 0;
  std::optional<double> duration_s;
};

int cmd_fixture(const FixtureOpts& opt) {
  Stopwatch clock;
  FixtureParams params = opt.profile == "channel" ? channel_variation_params() : FixtureParams{};
  if (opt.duration_s) params.duration_s = *opt.duration_s;

  const fs::path out = make_run_dir(opt.out);
  RunLock lock(out);
  const std::vector<ClipRecord> records =
      generate_fixture_corpus(opt.n_per_class, opt.seed, out, params);

  ordered_json config;
  config["profile"] = opt.profile;
  config["n_per_class"] = opt.n_per_class;
  config["seed"] = opt.seed;
  config["duration_s"] = params.duration_s;
  config["sample_rate_hz"] = params.sample_rate_hz;
  write_run_manifest(out, "fixture", std::move(config), static_cast<int64_t>(records.size()),
                     file_fingerprint(out / "metadata.csv"),
                     {"metadata.csv", "real/", "fake/"}, clock.seconds());

  std::cout << "wrote " << records.size() << " clips (" << opt.n_per_class << " per class, "
            << params.duration_s << " s at " << params.sample_rate_hz << " Hz) under "
            << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string arch, corpus, metadata, splits, out;
  std::string config;
  std::optional<uint64_t> seed;
  int label_column = -1;
  bool pretrained = false;
  bool frozen = false;
  bool dry_run = false;
};

void apply_config_file(TrainConfig& c, const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("config file " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error("config file " + path.string() + ": expected a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "optimizer") {
        const std::string name = upper_id(value.get<std::string>());
        if (name == "ADAM") c.optimizer = nn::OptimKind::kAdam;
        else if (name == "ADAMW") c.optimizer = nn::OptimKind::kAdamW;
        else throw Error("unknown optimizer '" + value.get<std::string>() + "'; valid: adam, adamw");
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
      } else if (key == "batch_size") {
        c.batch_size = value.get<int64_t>();
      } else if (key == "max_epochs") {
        c.max_epochs = value.get<int64_t>();
      } else if (key == "loss") {
        c.loss = parse_loss_kind(upper_id(value.get<std::string>()));
      } else if (key == "early_stop_patience") {
        c.early_stop_patience = value.get<int64_t>();
      } else if (key == "seed") {
        c.seed = value.get<uint64_t>();
      } else if (key == "clip_duration_s") {
        c.clip_duration_s = value.get<double>();
      } else if (key == "class_weights") {
        if (value.is_null()) {
          c.class_weights.reset();
        } else {
          c.class_weights = {value.at("real").get<double>(), value.at("fake").get<double>()};
        }
      } else if (key == "beta1") {
        c.beta1 = value.get<double>();
      } else if (key == "beta2") {
        c.beta2 = value.get<double>();
      } else if (key == "eps") {
        c.eps = value.get<double>();
      } else if (key == "weight_decay") {
        c.weight_decay = value.get<double>();
      } else {
        throw Error("config file " + path.string() + ": unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("config file " + path.string() + ": " + e.what());
  }
}

// Resolves a pretrained-backbone request against the weights cache; with no
// usable cache entry the request fails rather than silently substituting a
// seed-initialized backbone.
std::unique_ptr<Model> build_or_load(ModelSpec spec, uint64_t seed) {
  spec = spec.normalized();
  if (!spec.pretrained_backbone) return build_model(spec, seed);

  const char* id = pretrained_backbone_id(spec.arch);
  const char* cache = std::getenv("SPOOFBENCH_WEIGHTS_DIR");
  if (id != nullptr && cache != nullptr && *cache != '\0') {
    const fs::path path = fs::path(cache) / (std::string(id) + ".ckpt");
    if (fs::exists(path)) {
      std::unique_ptr<Model> model = load_checkpoint(path);
      if (!(model->spec() == spec))
        throw CheckpointError("weights cache " + path.string() +
                              " does not match the requested model (architecture or "
                              "backbone flags differ)");
      return model;
    }
  }
  try {
    return build_model(spec, seed);
  } catch (const WeightsUnavailableError& e) {
    std::string note = cache != nullptr && *cache != '\0'
                           ? "no " + std::string(id ? id : "backbone") + ".ckpt under " +
                                 std::string(cache)
                           : std::string("SPOOFBENCH_WEIGHTS_DIR is unset");
    throw WeightsUnavailableError(std::string(e.what()) + " (weights cache: " + note + ")");
  }
}

int cmd_train(const TrainOpts& opt) {
  Stopwatch clock;
  const Architecture arch = resolve_architecture(opt.arch);
  TrainConfig config = default_config(arch);
  if (!opt.config.empty()) apply_config_file(config, opt.config);
  if (opt.seed) config.seed = *opt.seed;
  config.validate();

  const std::vector<ClipRecord> records =
      parse_metadata(opt.metadata, opt.corpus, label_rule_from(opt.label_column), false);
  const SplitAssignment splits = load_split_assignment(opt.splits, records);
  const std::string fingerprint = file_fingerprint(opt.splits);

  ModelSpec spec;
  spec.arch = arch;
  spec.pretrained_backbone = opt.pretrained;
  spec.frozen_backbone = opt.frozen;
  std::unique_ptr<Model> model = build_or_load(spec, config.seed);
  const FrontendConfig fe = config.frontend_config();

  const fs::path out = make_run_dir(opt.out);
  RunLock lock(out);

  const SplitData data = encode_corpus(records, splits, model->spec().input_kind(), fe);
  const ordered_json resolved = resolved_config_json(*model, data, config, fe);

  if (opt.dry_run) {
    write_text_file(out / "config.resolved", resolved.dump(2) + "\n");
    write_run_manifest(out, "train", resolved, static_cast<int64_t>(records.size()),
                       fingerprint, {"config.resolved"}, clock.seconds());
    std::cout << resolved.dump(2) << "\n";
    return 0;
  }

  TrainHistory history;
  try {
    history = run_experiment(*model, data, config, out, fe);
  } catch (const DivergenceError& e) {
    // Mark the run directory so partial outputs are never mistaken for a
    // finished experiment.
    write_text_file(out / "DIVERGED", std::string(e.what()) + "\n");
    throw;
  }

  std::vector<std::string> outputs = {"config.resolved", "history.csv", "best.ckpt"};
  if (!data.test.empty()) outputs.push_back("test_scores.tsv");
  write_run_manifest(out, "train", resolved, static_cast<int64_t>(records.size()), fingerprint,
                     outputs, clock.seconds());

  std::cout << "trained " << architecture_name(arch) << ": " << history.epochs.size()
            << " epochs, best epoch " << history.best_epoch
            << (history.stopped_early ? " (stopped early)" : "") << "\n";
  if (!data.test.empty()) {
    const auto rows = read_score_file(out / "test_scores.tsv");
    const MetricsReport report = evaluate_scores(to_score_set(rows), ThresholdPolicy::fixed(0.5));
    std::cout << render_metrics_table({{architecture_name(arch), report}});
  }
  std::cout << "run directory: " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOpts {
  std::string scores, run, out;
  std::string split = "test";
  std::string threshold = "0.5";
  std::string name;
};

ThresholdPolicy parse_threshold(const std::string& s) {
  if (upper_id(s) == "EER") return ThresholdPolicy::at_eer();
  return ThresholdPolicy::fixed(parse_double(s, "--threshold"));
}

int cmd_evaluate(const EvaluateOpts& opt) {
  Stopwatch clock;
  if (opt.scores.empty() == opt.run.empty())
    throw Error("evaluate needs exactly one of --scores FILE or --run DIR");
  const ThresholdPolicy policy = parse_threshold(opt.threshold);

  fs::path score_path;
  std::string name = opt.name;
  if (!opt.run.empty()) {
    if (opt.split != "test")
      throw Error("only --split test is available; runs score the TEST split only");
    score_path = fs::path(opt.run) / "test_scores.tsv";
    if (name.empty()) {
      try {
        const auto j = nlohmann::json::parse(read_text_file(fs::path(opt.run) / "config.resolved"));
        name = j.at("model").at("architecture").get<std::string>();
      } catch (const std::exception&) {
        name = "run";
      }
    }
  } else {
    score_path = opt.scores;
    if (name.empty()) name = "scores";
  }

  const std::vector<ScoredClip> rows = read_score_file(score_path);
  if (rows.empty()) throw DegenerateInputError("score file is empty: " + score_path.string());
  const ScoreSet set = to_score_set(rows);
  int64_t fakes = 0;
  for (int l : set.labels) fakes += l;
  if (fakes == 0 || fakes == set.n())
    throw DegenerateInputError("score file holds a single class (" +
                               std::string(fakes == 0 ? "all REAL" : "all FAKE") +
                               "); metrics need both: " + score_path.string());
  const MetricsReport report = evaluate_scores(set, policy);

  const fs::path out = make_run_dir(opt.out);
  RunLock lock(out);
  std::map<std::string, std::string> meta;
  meta["command"] = "evaluate";
  meta["name"] = name;
  meta["source"] = score_path.string();
  meta["threshold"] = opt.threshold;
  write_metrics_report(out, report, meta);
  write_confusion_csv(out, report);

  ordered_json config;
  config["source"] = score_path.string();
  config["name"] = name;
  config["threshold"] = opt.threshold;
  write_run_manifest(out, "evaluate", std::move(config), static_cast<int64_t>(rows.size()),
                     file_fingerprint(score_path),
                     {"report.json", "roc.csv", "det.csv", "confusion.csv"}, clock.seconds());

  std::cout << render_metrics_table({{name, report}});
  return 0;
}

// ---------------------------------------------------------------------------
// zeroshot
// ---------------------------------------------------------------------------

struct ZeroShotOpts {
  std::string backend, corpus, metadata, splits, out;
  std::string rule = "projection";
  std::string weights = "auto";
  double duration_s = 5.0;
  int label_column = -1;
};

int cmd_zeroshot(const ZeroShotOpts& opt) {
  Stopwatch clock;
  const ZeroShotBackendId id = resolve_backend(opt.backend);
  const ScoringRule rule = parse_scoring_rule(upper_id(opt.rule));
  const ZeroShotBackend backend = make_backend(id, rule);

  const std::vector<ClipRecord> records =
      parse_metadata(opt.metadata, opt.corpus, label_rule_from(opt.label_column), false);
  const SplitAssignment splits = load_split_assignment(opt.splits, records);

  // Model construction happens before --out is touched, so an unavailable
  // weights source leaves no partial report behind.
  ZeroShotModel model(backend, opt.weights);
  const fs::path out = make_run_dir(opt.out);
  RunLock lock(out);
  const ZeroShotResult result = evaluate_zero_shot(model, records, splits, opt.duration_s);

  write_score_file(out / "scores.tsv", result.scores);
  std::map<std::string, std::string> meta;
  meta["command"] = "zeroshot";
  meta["backend"] = zero_shot_backend_name(id);
  meta["rule"] = scoring_rule_name(rule);
  meta["weights"] = opt.weights;
  write_metrics_report(out, result.report, meta);
  write_confusion_csv(out, result.report);

  ordered_json config;
  config["backend"] = zero_shot_backend_name(id);
  config["rule"] = scoring_rule_name(rule);
  config["weights"] = opt.weights;
  config["embedding_dim"] = backend.embedding_dim;
  config["clip_duration_s"] = opt.duration_s;
  config["corpus"] = opt.corpus;
  config["splits"] = opt.splits;
  write_run_manifest(out, "zeroshot", std::move(config), static_cast<int64_t>(records.size()),
                     file_fingerprint(opt.splits),
                     {"scores.tsv", "report.json", "roc.csv", "det.csv", "confusion.csv"},
                     clock.seconds());

  std::cout << render_metrics_table({{zero_shot_backend_name(id), result.report}});
  std::cout << "decision threshold (batch median score): " << result.report.threshold_used
            << "\n";
  return 0;
}

int fail(const char* code, const std::exception& e, int rc) {
  std::cerr << code << ": " << e.what() << "\n";
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spoofbench: train and evaluate audio anti-spoofing detectors"};
  app.require_subcommand(1);
  app.footer(kFooter);

  PrepareOpts prep;
  CLI::App* prepare = app.add_subcommand(
      "prepare", "Parse a corpus and write a stratified split manifest plus statistics");
  prepare->add_option("--corpus", prep.corpus, "audio root (real/ and fake/ subdirectories)")
      ->required();
  prepare->add_option("--metadata", prep.metadata, "pipe-separated metadata file")->required();
  prepare->add_option("--seed", prep.seed, "split shuffle seed");
  prepare->add_option("--ratios", prep.ratios, "TRAIN,VAL,TEST fractions")->capture_default_str();
  prepare->add_option("--label-column", prep.label_column,
                      "metadata column holding the label (default: real/ and fake/ dirs)");
  prepare->add_flag("--speaker-disjoint", prep.speaker_disjoint,
                    "assign whole speakers to splits");
  prepare->add_option("--out", prep.out, "output directory")->required();

  FixtureOpts fix;
  CLI::App* fixture =
      app.add_subcommand("fixture", "Synthesize a labeled desk-scale corpus for pipeline tests");
  fixture->add_option("--out", fix.out, "corpus directory to create")->required();
  fixture->add_option("--n-per-class", fix.n_per_class, "clips per class")->capture_default_str();
  fixture->add_option("--seed", fix.seed, "synthesis seed")->capture_default_str();
  fixture->add_option("--profile", fix.profile,
                      "clean: separable two-tone corpus; channel: per-clip channel variation "
                      "that keeps unsupervised scoring near chance")->capture_default_str()
      ->check(CLI::IsMember({"clean", "channel"}));
  fixture->add_option("--duration", fix.duration_s, "clip length in seconds");

  TrainOpts tr;
  CLI::App* train = app.add_subcommand("train", "Train an architecture and write a run directory");
  train->add_option("--arch", tr.arch, "architecture: " + architecture_choices())->required();
  train->add_option("--corpus", tr.corpus, "audio root")->required();
  train->add_option("--metadata", tr.metadata, "pipe-separated metadata file")->required();
  train->add_option("--splits", tr.splits, "split manifest from `prepare`")->required();
  train->add_option("--config", tr.config,
                    "JSON overrides for the architecture's published defaults");
  train->add_option("--seed", tr.seed, "overrides the config seed (weights and batch order)");
  train->add_option("--label-column", tr.label_column,
                    "metadata column holding the label (default: real/ and fake/ dirs)");
  train->add_flag("--pretrained", tr.pretrained,
                  "start from published backbone weights (needs SPOOFBENCH_WEIGHTS_DIR)");
  train->add_flag("--frozen", tr.frozen, "freeze the backbone, train the head only");
  train->add_flag("--dry-run", tr.dry_run, "resolve and print the config without training");
  train->add_option("--out", tr.out, "run directory")->required();

  EvaluateOpts ev;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Compute metrics and curve CSVs from scores");
  evaluate->add_option("--scores", ev.scores, "score file (clip_id<TAB>label<TAB>score)");
  evaluate->add_option("--run", ev.run, "run directory holding test_scores.tsv");
  evaluate->add_option("--split", ev.split, "which split a --run was scored on")->capture_default_str();
  evaluate->add_option("--threshold", ev.threshold,
                       "hard-decision threshold: a number, or 'eer' for the EER point")
      ->capture_default_str();
  evaluate->add_option("--name", ev.name, "row label in the rendered table");
  evaluate->add_option("--out", ev.out, "output directory")->required();

  ZeroShotOpts zs;
  CLI::App* zeroshot = app.add_subcommand(
      "zeroshot", "Score the TEST split with a pretrained backend, no task training");
  zeroshot->add_option("--backend", zs.backend, "backend: " + backend_choices())->required();
  zeroshot->add_option("--rule", zs.rule, "scoring rule: projection or class-prior")
      ->capture_default_str();
  zeroshot->add_option("--weights", zs.weights,
                       "weights source: auto, or builtin:<seed> for the deterministic "
                       "surrogate encoder")
      ->capture_default_str();
  zeroshot->add_option("--corpus", zs.corpus, "audio root")->required();
  zeroshot->add_option("--metadata", zs.metadata, "pipe-separated metadata file")->required();
  zeroshot->add_option("--splits", zs.splits, "split manifest from `prepare`")->required();
  zeroshot->add_option("--duration", zs.duration_s, "clip length in seconds")
      ->capture_default_str();
  zeroshot->add_option("--label-column", zs.label_column,
                       "metadata column holding the label (default: real/ and fake/ dirs)");
  zeroshot->add_option("--out", zs.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prep);
    if (fixture->parsed()) return cmd_fixture(fix);
    if (train->parsed()) return cmd_train(tr);
    if (evaluate->parsed()) return cmd_evaluate(ev);
    if (zeroshot->parsed()) return cmd_zeroshot(zs);
    std::cerr << "E_USAGE: no subcommand\n";
    return kExitUsage;
  } catch (const CorpusError& e) {
    return fail("E_CORPUS", e, kExitCorpus);
  } catch (const DegenerateInputError& e) {
    return fail("E_DEGENERATE", e, kExitDegenerate);
  } catch (const WeightsUnavailableError& e) {
    return fail("E_OFFLINE", e, kExitOffline);
  } catch (const DivergenceError& e) {
    return fail("E_DIVERGED", e, kExitDiverged);
  } catch (const CheckpointError& e) {
    return fail("E_IO", e, kExitIo);
  } catch (const IoError& e) {
    return fail("E_IO", e, kExitIo);
  } catch (const Error& e) {
    return fail("E_USAGE", e, kExitUsage);
  } catch (const std::exception& e) {
    return fail("E_INTERNAL", e, kExitInternal);
  }
}
