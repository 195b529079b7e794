#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "harmonia/abc_parser.hpp"
#include "harmonia/abc_writer.hpp"
#include "harmonia/corpus_index.hpp"
#include "harmonia/errors.hpp"
#include "harmonia/evolve.hpp"
#include "harmonia/fitness.hpp"
#include "harmonia/listener_net.hpp"
#include "harmonia/pianoroll.hpp"
#include "harmonia/strings.hpp"

namespace harmonia {
namespace pipeline {

namespace fs = std::filesystem;

// --- Configuration -----------------------------------------------------------

/// Everything a full two-stage run needs. Defaults mirror the reference
/// parameter set: 3600 iterations, population 15, crossover 0.5, mutation
/// 0.1, 2 channels, Bi-LSTM hidden 50, 5000 training epochs.
struct PipelineConfig {
  fs::path corpus_dir;
  fs::path work_dir;
  GAConfig ga1;
  GAConfig ga2;
  RuleConfig rules;
  CompositeConfig composite;
  TrainConfig train;
  int hidden = 50;
  int collection_size = 20;
  double epsilon = 0.001;
  bool strict = false;

  PipelineConfig() {
    ga1.mode = GAMode::kGA1;
    ga2.mode = GAMode::kGA2;
  }

  void validate() const {
    if (collection_size < 1) throw InvalidConfig("collection_size must be >= 1");
    if (!(epsilon > 0)) throw InvalidConfig("epsilon must be > 0");
    if (hidden < 1) throw InvalidConfig("hidden must be >= 1");
    ga1.validate();
    ga2.validate();
    rules.validate();
    train.validate();
  }
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw InvalidConfig("boolean expected for " + key + ", got '" + v + "'");
}

inline void apply_ga_key(GAConfig& ga, const std::string& field, const std::string& value,
                         const std::string& key) {
  if (field == "iterations") ga.iterations = static_cast<int>(require_int(value, key));
  else if (field == "population") ga.population = static_cast<int>(require_int(value, key));
  else if (field == "crossover_rate") ga.crossover_rate = require_double(value, key);
  else if (field == "mutation_rate") ga.mutation_rate = require_double(value, key);
  else if (field == "channels") ga.channels = static_cast<int>(require_int(value, key));
  else if (field == "steps") ga.steps = static_cast<int>(require_int(value, key));
  else if (field == "seed") ga.seed = static_cast<std::uint64_t>(require_int(value, key));
  else throw InvalidConfig("unknown config key: " + key);
}

}  // namespace detail

/// Apply one `key=value` setting (config file line or CLI override).
inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
  if (key == "corpus_dir") { cfg.corpus_dir = value; return; }
  if (key == "work_dir") { cfg.work_dir = value; return; }
  if (key == "collection_size") { cfg.collection_size = static_cast<int>(require_int(value, key)); return; }
  if (key == "epsilon") { cfg.epsilon = require_double(value, key); return; }
  if (key == "strict") { cfg.strict = detail::parse_bool(value, key); return; }
  if (key == "hidden" || key == "train.hidden") { cfg.hidden = static_cast<int>(require_int(value, key)); return; }

  auto dot = key.find('.');
  if (dot == std::string::npos) throw InvalidConfig("unknown config key: " + key);
  std::string section = key.substr(0, dot);
  std::string field = key.substr(dot + 1);

  if (section == "ga1") { detail::apply_ga_key(cfg.ga1, field, value, key); return; }
  if (section == "ga2") { detail::apply_ga_key(cfg.ga2, field, value, key); return; }
  if (section == "rules") {
    if (field == "max_melodic_leap") cfg.rules.max_melodic_leap = static_cast<int>(require_int(value, key));
    else if (field == "forbid_tritone_leap") cfg.rules.forbid_tritone_leap = detail::parse_bool(value, key);
    else if (field == "meter_ticks") cfg.rules.meter_ticks = static_cast<int>(require_int(value, key));
    else if (field == "penalize_unseen_transition") cfg.rules.penalize_unseen_transition = detail::parse_bool(value, key);
    else if (field == "vertical_policy") {
      if (value == "corpus") cfg.rules.allowed_vertical = VerticalPolicy::kCorpusOnly;
      else if (value == "triad") cfg.rules.allowed_vertical = VerticalPolicy::kTriadOnly;
      else if (value == "corpus-or-triad") cfg.rules.allowed_vertical = VerticalPolicy::kCorpusOrTriad;
      else throw InvalidConfig("rules.vertical_policy must be corpus, triad, or corpus-or-triad");
    } else throw InvalidConfig("unknown config key: " + key);
    return;
  }
  if (section == "composite") {
    if (field == "w1") cfg.composite.w1 = require_double(value, key);
    else if (field == "w2") cfg.composite.w2 = require_double(value, key);
    else if (field == "w3") cfg.composite.w3 = require_double(value, key);
    else if (field == "grammar_norm") cfg.composite.grammar_norm = require_double(value, key);
    else throw InvalidConfig("unknown config key: " + key);
    return;
  }
  if (section == "train") {
    if (field == "epochs") cfg.train.epochs = static_cast<int>(require_int(value, key));
    else if (field == "learning_rate") cfg.train.learning_rate = require_double(value, key);
    else if (field == "seed") cfg.train.seed = static_cast<std::uint64_t>(require_int(value, key));
    else if (field == "clip_norm") cfg.train.clip_norm = require_double(value, key);
    else if (field == "optimizer") {
      if (value == "adam") cfg.train.optimizer = Optimizer::kAdam;
      else if (value == "sgd") cfg.train.optimizer = Optimizer::kSgd;
      else throw InvalidConfig("train.optimizer must be adam or sgd");
    } else throw InvalidConfig("unknown config key: " + key);
    return;
  }
  throw InvalidConfig("unknown config key: " + key);
}

/// Key-value config file: `key = value` lines, '#' comments.
inline void load_config_file(PipelineConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto text = trim(line);
    if (text.empty()) continue;
    auto eq = text.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not key=value");
    std::string key(trim(text.substr(0, eq)));
    std::string value(trim(text.substr(eq + 1)));
    apply_config_entry(cfg, key, value);
  }
}

// --- Work-dir lock -------------------------------------------------------------

/// No two commands may run against the same work_dir at once.
class WorkDirLock {
 public:
  explicit WorkDirLock(const fs::path& work_dir) : lock_path_(work_dir / ".lock") {
    fs::create_directories(work_dir);
    std::FILE* f = std::fopen(lock_path_.string().c_str(), "wx");
    if (!f)
      throw ConfigError("work dir is locked by another run (remove " + lock_path_.string() +
                        " if stale)");
    std::fclose(f);
  }
  ~WorkDirLock() {
    std::error_code ec;
    fs::remove(lock_path_, ec);
  }
  WorkDirLock(const WorkDirLock&) = delete;
  WorkDirLock& operator=(const WorkDirLock&) = delete;

 private:
  fs::path lock_path_;
};

// --- Small file helpers ----------------------------------------------------------

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  out << text;
  if (!out) throw DataError("failed writing file: " + path.string());
}

inline Piece parse_abc_file(const fs::path& path) { return abc::parse(read_text_file(path)); }

// --- Manifest --------------------------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::string file;  // ABC filename relative to the manifest directory
  double objective = 0.0;
  std::uint64_t seed = 0;

  std::string roll_file() const {
    std::string f = file;
    auto pos = f.rfind(".abc");
    if (pos != std::string::npos) f = f.substr(0, pos);
    return f + ".roll.csv";
  }
};

inline void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::string out = "id,file,objective,seed\n";
  for (const auto& e : entries) {
    out += e.id + ',' + e.file + ',' + format_double(e.objective) + ',' +
           std::to_string(e.seed) + "\n";
  }
  write_text_file(path, out);
}

inline std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,file,objective,seed")
    throw DataError("manifest has a bad header row: " + path.string());
  std::vector<ManifestEntry> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split(std::string(trim(line)), ',');
    if (f.size() != 4) throw DataError("manifest row with " + std::to_string(f.size()) + " fields");
    ManifestEntry e;
    e.id = f[0];
    e.file = f[1];
    e.objective = require_double(f[2], "manifest objective");
    e.seed = static_cast<std::uint64_t>(require_int(f[3], "manifest seed"));
    out.push_back(std::move(e));
  }
  return out;
}

// --- cmd: index --------------------------------------------------------------------

struct IndexResult {
  int files_seen = 0;
  int pieces_indexed = 0;
  int files_failed = 0;
  CorpusIndex index;
};

/// Parse every *.abc under corpus_dir (sorted, for determinism), build the
/// index, and write the index file plus the note-probability histogram.
/// Parse failures are reported and skipped unless strict.
inline IndexResult cmd_index(const fs::path& corpus_dir, const fs::path& out_index,
                             const fs::path& out_histogram, bool strict, std::ostream& diag) {
  std::vector<fs::path> files;
  if (fs::is_directory(corpus_dir)) {
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".abc")
        files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  IndexResult result;
  result.files_seen = static_cast<int>(files.size());
  std::vector<Piece> pieces;
  for (const auto& f : files) {
    try {
      pieces.push_back(parse_abc_file(f));
    } catch (const DataError& e) {
      if (strict) throw;
      ++result.files_failed;
      diag << "skipping " << f.filename().string() << ": " << e.what() << "\n";
    }
  }
  if (pieces.empty())
    throw EmptyCorpus("no parseable ABC pieces under " + corpus_dir.string());

  result.index = build_index(pieces);
  result.pieces_indexed = result.index.piece_count;

  std::ofstream idx(out_index, std::ios::binary | std::ios::trunc);
  if (!idx) throw DataError("cannot write index file: " + out_index.string());
  save_index(idx, result.index);

  std::ofstream hist(out_histogram, std::ios::binary | std::ios::trunc);
  if (!hist) throw DataError("cannot write histogram: " + out_histogram.string());
  write_histogram_csv(hist, result.index);
  return result;
}

inline CorpusIndex load_index_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index file: " + path.string());
  return load_index(in);
}

// --- cmd: ga1 ---------------------------------------------------------------------

namespace detail {

inline std::string piece_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "piece_%04d", i);
  return buf;
}

inline void export_piece(const fs::path& dir, const std::string& id, const Chromosome& chrom,
                         int meter_ticks) {
  Piece piece = chromosome_to_piece(chrom, id);
  set_meter_from_ticks(piece, meter_ticks);  // scoring re-derives bars from M:
  write_text_file(dir / (id + ".abc"), abc::emit(piece));
  std::ofstream roll(dir / (id + ".roll.csv"), std::ios::binary | std::ios::trunc);
  if (!roll) throw DataError("cannot write piano-roll CSV for " + id);
  write_roll_csv(roll, chromosome_to_matrix(chrom));
}

}  // namespace detail

/// Run GA1 `collection_size` times with seeds seed+i and export each best
/// piece (ABC, piano roll, run log) plus a manifest and breakdown table.
inline std::vector<ManifestEntry> cmd_ga1(const PipelineConfig& cfg, const CorpusIndex& index,
                                          const fs::path& out_dir, std::ostream& diag) {
  cfg.validate();
  fs::create_directories(out_dir);

  std::vector<ManifestEntry> manifest;
  std::string breakdowns = "id," + FitnessBreakdown::csv_header() + "\n";
  for (int i = 0; i < cfg.collection_size; ++i) {
    GAConfig ga = cfg.ga1;
    ga.seed = cfg.ga1.seed + static_cast<std::uint64_t>(i);
    Evaluator evaluator = [&](const Chromosome& chrom) {
      Evaluation ev;
      ev.breakdown = ga1_objective(chrom, index, cfg.rules, cfg.epsilon);
      ev.fitness = ev.breakdown.objective;
      return ev;
    };
    RunResult run_result = run(ga, evaluator, index);

    std::string id = detail::piece_id(i);
    detail::export_piece(out_dir, id, run_result.best, cfg.rules.meter_ticks);
    std::ofstream runlog(out_dir / (id + ".run.csv"), std::ios::binary | std::ios::trunc);
    if (!runlog) throw DataError("cannot write run log for " + id);
    write_runlog_csv(runlog, run_result.log);

    breakdowns += id + ',' + run_result.best_eval.breakdown.csv_row() + "\n";
    manifest.push_back({id, id + ".abc", run_result.best_eval.fitness, ga.seed});
    diag << id << " objective " << format_double(run_result.best_eval.fitness) << " seed "
         << ga.seed << "\n";
  }
  write_text_file(out_dir / "breakdowns.csv", breakdowns);
  write_manifest(out_dir / "manifest.csv", manifest);
  return manifest;
}

// --- cmd: ratings-import -------------------------------------------------------------

struct RatingRecord {
  std::string piece_id;
  std::string group;
  std::string rater_id;
  int score = 0;
};

inline constexpr const char* kRatingsHeader = "piece_id,group,rater_id,score";
inline constexpr const char* kDatasetMagic = "HARMONIA-RATINGS";
inline constexpr int kDatasetVersion = 1;

/// Validate a ratings CSV against the manifest, average scores per
/// (piece, group), and write one dataset file per listener group. The
/// manifest's best objective is recorded as the grammar normalizer for the stage-two composite.
inline void cmd_ratings_import(const fs::path& ratings_csv, const fs::path& manifest_path,
                               const fs::path& out_expert, const fs::path& out_regular,
                               std::ostream& diag) {
  auto manifest = read_manifest(manifest_path);
  std::map<std::string, ManifestEntry> by_id;
  double grammar_norm = 0.0;
  for (const auto& e : manifest) {
    by_id[e.id] = e;
    grammar_norm = std::max(grammar_norm, e.objective);
  }

  std::ifstream in(ratings_csv);
  if (!in) throw DataError("cannot open ratings CSV: " + ratings_csv.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kRatingsHeader)
    throw DataError("ratings CSV must start with header '" + std::string(kRatingsHeader) + "'");

  std::map<std::pair<std::string, std::string>, std::pair<long long, int>> sums;  // (sum, n)
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto f = split(std::string(trim(line)), ',');
    if (f.size() != 4)
      throw DataError("ratings CSV row " + std::to_string(row) + " has " +
                      std::to_string(f.size()) + " fields, expected 4");
    RatingRecord rec{f[0], f[1], f[2], 0};
    auto score = parse_int(f[3]);
    if (!score || *score < 0 || *score > 100)
      throw ScoreOutOfRange("ratings CSV row " + std::to_string(row) + ": score '" + f[3] +
                            "' is outside 0..100");
    rec.score = static_cast<int>(*score);
    if (rec.group != "expert" && rec.group != "regular")
      throw DataError("ratings CSV row " + std::to_string(row) + ": group '" + rec.group +
                      "' is not expert or regular");
    if (!by_id.count(rec.piece_id))
      throw UnknownPieceId("ratings CSV row " + std::to_string(row) + ": piece '" +
                           rec.piece_id + "' is not in the manifest");
    auto& slot = sums[{rec.group, rec.piece_id}];
    slot.first += rec.score;
    slot.second += 1;
  }

  fs::path manifest_dir = manifest_path.parent_path();
  auto write_group = [&](const std::string& group, const fs::path& out_path) {
    fs::path dataset_dir = fs::absolute(out_path).parent_path();
    std::string out = std::string(kDatasetMagic) + ' ' + std::to_string(kDatasetVersion) + ' ' +
                      group + ' ' + format_double(grammar_norm) + "\n";
    out += "piece_id,roll_file,mean_score,raters\n";
    int items = 0;
    for (const auto& [key, sum_n] : sums) {
      if (key.first != group) continue;
      const auto& entry = by_id.at(key.second);
      // Roll paths are stored relative to the dataset file itself.
      fs::path roll = fs::absolute(manifest_dir / entry.roll_file()).lexically_proximate(dataset_dir);
      double mean = static_cast<double>(sum_n.first) / sum_n.second;
      out += key.second + ',' + roll.generic_string() + ',' + format_double(mean) + ',' +
             std::to_string(sum_n.second) + "\n";
      diag << group << ' ' << key.second << " raters " << sum_n.second << " mean "
           << format_double(mean) << "\n";
      ++items;
    }
    if (items == 0) throw EmptyGroup("no ratings for group '" + group + "'");
    write_text_file(out_path, out);
  };
  write_group("expert", out_expert);
  write_group("regular", out_regular);
}

struct LoadedDataset {
  RatingDataset data;
  double grammar_norm = 0.0;
};

/// Read a dataset file back, loading each referenced piano-roll CSV
/// relative to the dataset file's directory.
inline LoadedDataset load_rating_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open rating dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("rating dataset is empty: " + path.string());
  auto head = split(std::string(trim(line)), ' ');
  if (head.size() != 4 || head[0] != kDatasetMagic)
    throw DataError("rating dataset has a bad magic line: " + path.string());
  if (require_int(head[1], "dataset version") != kDatasetVersion)
    throw VersionMismatch("rating dataset version " + head[1]);

  LoadedDataset out;
  out.data.group = (head[2] == "expert") ? ListenerGroup::kExpert : ListenerGroup::kRegular;
  out.grammar_norm = require_double(head[3], "grammar_norm");

  if (!std::getline(in, line) || trim(line) != "piece_id,roll_file,mean_score,raters")
    throw DataError("rating dataset has a bad header row: " + path.string());
  fs::path dir = path.parent_path();
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split(std::string(trim(line)), ',');
    if (f.size() != 4) throw DataError("rating dataset row with " + std::to_string(f.size()) + " fields");
    RatingItem item;
    item.piece_id = f[0];
    std::ifstream roll(dir / f[1], std::ios::binary);
    if (!roll) throw DataError("cannot open piano roll " + (dir / f[1]).string());
    item.matrix = read_roll_csv(roll);
    item.score = require_double(f[2], "mean score");
    if (item.score < 0 || item.score > 100)
      throw ScoreOutOfRange("rating dataset: mean score " + f[2] + " outside 0..100");
    item.raters = static_cast<int>(require_int(f[3], "rater count"));
    out.data.items.push_back(std::move(item));
  }
  return out;
}

// --- cmd: train ------------------------------------------------------------------------

struct TrainOutcome {
  double first_rmse = 0.0;
  double final_rmse = 0.0;
  int epochs = 0;
};

/// Train a listener net on an imported dataset; writes the checkpoint (with
/// the grammar normalizer embedded) and the per-epoch loss curve.
inline TrainOutcome cmd_train(const fs::path& dataset_path, const PipelineConfig& cfg,
                              const fs::path& out_checkpoint, const fs::path& out_loss_csv) {
  cfg.train.validate();
  LoadedDataset loaded = load_rating_dataset(dataset_path);
  if (loaded.data.items.empty()) throw DataError("rating dataset has no items");

  ListenerNet net = make_listener_net(cfg.hidden, cfg.train.seed);
  TrainResult tr = train(net, loaded.data, cfg.train);
  save_model(net, out_checkpoint.string(), loaded.grammar_norm);

  std::string curve = "epoch,rmse\n";
  for (std::size_t i = 0; i < tr.epoch_rmse.size(); ++i)
    curve += std::to_string(i + 1) + ',' + format_double(tr.epoch_rmse[i]) + "\n";
  write_text_file(out_loss_csv, curve);

  TrainOutcome outcome;
  outcome.epochs = static_cast<int>(tr.epoch_rmse.size());
  outcome.first_rmse = tr.epoch_rmse.front();
  outcome.final_rmse = tr.epoch_rmse.back();
  return outcome;
}

// --- cmd: ga2 ---------------------------------------------------------------------------

struct Ga2Result {
  Chromosome best;
  Evaluation best_eval;
  double composite = 0.0;
  double grammar_norm = 0.0;
};

/// Listener-score evaluator cache; the surrogate forward pass dominates GA2
/// cost and elites are re-scored every generation.
class ListenerScoreCache {
 public:
  ListenerScoreCache(const ListenerNet& expert, const ListenerNet& regular)
      : expert_(expert), regular_(regular) {}

  std::pair<double, double> scores(const Chromosome& chrom) {
    std::string key(reinterpret_cast<const char*>(chrom.genes.data()), chrom.genes.size());
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    PianoMatrix m = chromosome_to_matrix(chrom);
    std::pair<double, double> result{forward(expert_, m), forward(regular_, m)};
    if (cache_.size() > 50000) cache_.clear();
    cache_.emplace(std::move(key), result);
    return result;
  }

 private:
  const ListenerNet& expert_;
  const ListenerNet& regular_;
  std::unordered_map<std::string, std::pair<double, double>> cache_;
};

/// Stage two: evolve against the weighted composite of the grammar objective
/// and the two trained listener models.
inline Ga2Result cmd_ga2(const PipelineConfig& cfg, const CorpusIndex& index,
                         const fs::path& expert_model, const fs::path& regular_model,
                         const fs::path& out_dir, std::ostream& diag) {
  cfg.validate();
  LoadedModel expert = load_model(expert_model.string());
  LoadedModel regular = load_model(regular_model.string());

  CompositeConfig composite = cfg.composite;
  if (composite.grammar_norm <= 0)
    composite.grammar_norm = std::max(expert.grammar_norm, regular.grammar_norm);
  if (composite.grammar_norm <= 0)
    throw InvalidConfig(
        "no grammar normalizer: none configured and the checkpoints carry none");
  composite.validate();

  ListenerScoreCache cache(expert.net, regular.net);
  Evaluator evaluator = [&](const Chromosome& chrom) {
    Evaluation ev;
    ev.breakdown = ga1_objective(chrom, index, cfg.rules, cfg.epsilon);
    auto [x2, x3] = cache.scores(chrom);
    ev.x2 = x2;
    ev.x3 = x3;
    ev.fitness = ga2_fitness(ev.breakdown.objective, x2, x3, composite);
    return ev;
  };

  fs::create_directories(out_dir);
  RunResult run_result = run(cfg.ga2, evaluator, index);

  detail::export_piece(out_dir, "ga2_best", run_result.best, cfg.rules.meter_ticks);
  std::ofstream runlog(out_dir / "ga2_best.run.csv", std::ios::binary | std::ios::trunc);
  if (!runlog) throw DataError("cannot write GA2 run log");
  write_runlog_csv(runlog, run_result.log);

  Ga2Result result;
  result.best = run_result.best;
  result.best_eval = run_result.best_eval;
  result.composite = run_result.best_eval.fitness;
  result.grammar_norm = composite.grammar_norm;

  std::string summary = "composite,x1,x2,x3,w1,w2,w3,grammar_norm," +
                        FitnessBreakdown::csv_header() + "\n";
  summary += format_double(result.composite) + ',' +
             format_double(run_result.best_eval.breakdown.objective) + ',' +
             format_double(run_result.best_eval.x2) + ',' +
             format_double(run_result.best_eval.x3) + ',' + format_double(composite.w1) + ',' +
             format_double(composite.w2) + ',' + format_double(composite.w3) + ',' +
             format_double(composite.grammar_norm) + ',' +
             run_result.best_eval.breakdown.csv_row() + "\n";
  write_text_file(out_dir / "ga2_best.summary.csv", summary);
  diag << "ga2 composite " << format_double(result.composite) << " (x1 "
       << format_double(run_result.best_eval.breakdown.objective) << ", x2 "
       << format_double(run_result.best_eval.x2) << ", x3 "
       << format_double(run_result.best_eval.x3) << ")\n";
  return result;
}

// --- cmd: score -----------------------------------------------------------------------

struct ScoreResult {
  FitnessBreakdown breakdown;
  std::optional<double> x2;
  std::optional<double> x3;
  std::optional<double> composite;
};

/// Standalone evaluation of any ABC piece against an index (and optionally
/// the two listener models).
inline ScoreResult cmd_score(const fs::path& piece_path, const CorpusIndex& index,
                             const PipelineConfig& cfg,
                             const std::optional<fs::path>& expert_model,
                             const std::optional<fs::path>& regular_model) {
  Piece piece = parse_abc_file(piece_path);
  PianoMatrix m = piece_to_matrix(piece);
  int channels = 1;
  for (int col = 0; col < m.cols(); ++col) channels = std::max(channels, m.column_sum(col));
  Chromosome chrom = matrix_to_chromosome(m, channels);

  RuleConfig rules = cfg.rules;
  rules.meter_ticks = piece.ticks_per_bar();

  ScoreResult result;
  result.breakdown = ga1_objective(chrom, index, rules, cfg.epsilon);
  if (expert_model && regular_model) {
    LoadedModel expert = load_model(expert_model->string());
    LoadedModel regular = load_model(regular_model->string());
    CompositeConfig composite = cfg.composite;
    if (composite.grammar_norm <= 0) composite.grammar_norm = expert.grammar_norm;
    if (composite.grammar_norm <= 0) composite.grammar_norm = 1.0;
    result.x2 = forward(expert.net, m);
    result.x3 = forward(regular.net, m);
    result.composite = ga2_fitness(result.breakdown.objective, *result.x2, *result.x3, composite);
  }
  return result;
}

// --- cmd: convert ------------------------------------------------------------------------

inline void convert_abc_to_roll(const fs::path& in_path, const fs::path& out_path) {
  Piece piece = parse_abc_file(in_path);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + out_path.string());
  write_roll_csv(out, piece_to_matrix(piece));
}

inline void convert_roll_to_abc(const fs::path& in_path, const fs::path& out_path) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw DataError("cannot open " + in_path.string());
  PianoMatrix m = read_roll_csv(in);
  int channels = 1;
  for (int col = 0; col < m.cols(); ++col) channels = std::max(channels, m.column_sum(col));
  Chromosome chrom = matrix_to_chromosome(m, channels);
  write_text_file(out_path, abc::emit(chromosome_to_piece(chrom, in_path.stem().string())));
}

}  // namespace pipeline
}  // namespace harmonia
