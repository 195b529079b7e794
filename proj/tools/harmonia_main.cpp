// Command-line front end for the two-stage composition pipeline:
// index -> ga1 -> ratings-import -> train -> ga2, plus score/convert helpers.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "harmonia/pipeline.hpp"

namespace {

using harmonia::pipeline::PipelineConfig;

void apply_overrides(PipelineConfig& cfg, const std::string& config_file,
                     const std::vector<std::string>& sets) {
  if (!config_file.empty()) harmonia::pipeline::load_config_file(cfg, config_file);
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw harmonia::ConfigError("--set expects key=value, got '" + kv + "'");
    harmonia::pipeline::apply_config_entry(cfg, std::string(harmonia::trim(kv.substr(0, eq))),
                                           std::string(harmonia::trim(kv.substr(eq + 1))));
  }
}

void add_config_options(CLI::App* cmd, std::string& config_file, std::vector<std::string>& sets) {
  cmd->add_option("--config", config_file, "key=value config file");
  cmd->add_option("--set", sets, "override one config key (repeatable)")->take_all();
}

void print_breakdown(const harmonia::FitnessBreakdown& b) {
  std::cout << "score      " << harmonia::format_double(b.score) << "\n"
            << "cost       " << b.cost << "\n"
            << "  rhythm     " << b.violations.rhythm << "\n"
            << "  melodic    " << b.violations.melodic << "\n"
            << "  harmony    " << b.violations.harmony << "\n"
            << "  transition " << b.violations.transition << "\n"
            << "objective  " << harmonia::format_double(b.objective) << "\n"
            << "n2,n3,n4   " << b.n2 << ',' << b.n3 << ',' << b.n4 << "\n"
            << "s2,s3,s4   " << b.s2 << ',' << b.s3 << ',' << b.s4 << "\n"
            << "M,L        " << b.m << ',' << b.l << "\n"
            << "epsilon    " << harmonia::format_double(b.epsilon) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"harmonia: evolutionary melody+chord composition with listener surrogates"};
  app.require_subcommand(1);

  // index
  auto* index_cmd = app.add_subcommand("index", "build a corpus index from ABC files");
  std::string index_corpus, index_out, index_hist;
  bool index_strict = false;
  index_cmd->add_option("--corpus", index_corpus, "directory of .abc files")->required();
  index_cmd->add_option("--out", index_out, "index file to write")->required();
  index_cmd->add_option("--histogram", index_hist, "note-probability CSV (default <out>.hist.csv)");
  index_cmd->add_flag("--strict", index_strict, "fail on the first unparseable file");

  // ga1
  auto* ga1_cmd = app.add_subcommand("ga1", "evolve a collection of pieces for rating");
  std::string ga1_index, ga1_out, ga1_config;
  std::vector<std::string> ga1_sets;
  ga1_cmd->add_option("--index", ga1_index, "corpus index file")->required();
  ga1_cmd->add_option("--out", ga1_out, "collection output directory")->required();
  add_config_options(ga1_cmd, ga1_config, ga1_sets);

  // ratings-import
  auto* ratings_cmd = app.add_subcommand("ratings-import", "ingest listener scores");
  std::string ratings_csv, ratings_manifest, ratings_expert, ratings_regular;
  ratings_cmd->add_option("--ratings", ratings_csv, "CSV with piece_id,group,rater_id,score")
      ->required();
  ratings_cmd->add_option("--manifest", ratings_manifest, "collection manifest")->required();
  ratings_cmd->add_option("--out-expert", ratings_expert, "expert dataset file")->required();
  ratings_cmd->add_option("--out-regular", ratings_regular, "regular dataset file")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a listener model on a dataset");
  std::string train_dataset, train_out, train_loss, train_config;
  std::vector<std::string> train_sets;
  train_cmd->add_option("--dataset", train_dataset, "dataset from ratings-import")->required();
  train_cmd->add_option("--out", train_out, "checkpoint to write")->required();
  train_cmd->add_option("--loss", train_loss, "loss-curve CSV (default <out>.loss.csv)");
  add_config_options(train_cmd, train_config, train_sets);

  // ga2
  auto* ga2_cmd = app.add_subcommand("ga2", "evolve with grammar + listener objectives");
  std::string ga2_index, ga2_expert, ga2_regular, ga2_out, ga2_config;
  std::vector<std::string> ga2_sets;
  ga2_cmd->add_option("--index", ga2_index, "corpus index file")->required();
  ga2_cmd->add_option("--expert", ga2_expert, "expert listener checkpoint")->required();
  ga2_cmd->add_option("--regular", ga2_regular, "regular listener checkpoint")->required();
  ga2_cmd->add_option("--out", ga2_out, "output directory")->required();
  add_config_options(ga2_cmd, ga2_config, ga2_sets);

  // score
  auto* score_cmd = app.add_subcommand("score", "evaluate one ABC piece");
  std::string score_piece, score_index, score_expert, score_regular, score_config;
  std::vector<std::string> score_sets;
  score_cmd->add_option("--piece", score_piece, "ABC file to score")->required();
  score_cmd->add_option("--index", score_index, "corpus index file")->required();
  score_cmd->add_option("--expert", score_expert, "expert checkpoint (optional)");
  score_cmd->add_option("--regular", score_regular, "regular checkpoint (optional)");
  add_config_options(score_cmd, score_config, score_sets);

  // convert
  auto* convert_cmd = app.add_subcommand("convert", "ABC <-> piano-roll CSV");
  std::string convert_in, convert_out;
  bool to_roll = false, to_abc = false;
  convert_cmd->add_option("input", convert_in, "input file")->required();
  convert_cmd->add_option("output", convert_out, "output file")->required();
  convert_cmd->add_flag("--to-roll", to_roll, "ABC in, piano-roll CSV out");
  convert_cmd->add_flag("--to-abc", to_abc, "piano-roll CSV in, ABC out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  namespace fs = std::filesystem;
  namespace pl = harmonia::pipeline;
  try {
    if (index_cmd->parsed()) {
      fs::path out = index_out;
      fs::path hist = index_hist.empty() ? fs::path(index_out + ".hist.csv") : fs::path(index_hist);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      auto result = pl::cmd_index(index_corpus, out, hist, index_strict, std::cerr);
      std::cout << "indexed " << result.pieces_indexed << " pieces ("
                << result.index.total_notes << " notes, " << result.files_failed
                << " files skipped)\n";
    } else if (ga1_cmd->parsed()) {
      PipelineConfig cfg;
      apply_overrides(cfg, ga1_config, ga1_sets);
      auto index = pl::load_index_file(ga1_index);
      pl::WorkDirLock lock(ga1_out);
      auto manifest = pl::cmd_ga1(cfg, index, ga1_out, std::cout);
      std::cout << "collection of " << manifest.size() << " pieces in " << ga1_out << "\n";
    } else if (ratings_cmd->parsed()) {
      fs::path expert_out = ratings_expert;
      pl::WorkDirLock lock(expert_out.has_parent_path() ? expert_out.parent_path()
                                                        : fs::path("."));
      pl::cmd_ratings_import(ratings_csv, ratings_manifest, ratings_expert, ratings_regular,
                             std::cout);
    } else if (train_cmd->parsed()) {
      PipelineConfig cfg;
      apply_overrides(cfg, train_config, train_sets);
      fs::path out = train_out;
      fs::path loss = train_loss.empty() ? fs::path(train_out + ".loss.csv") : fs::path(train_loss);
      pl::WorkDirLock lock(out.has_parent_path() ? out.parent_path() : fs::path("."));
      auto outcome = pl::cmd_train(train_dataset, cfg, out, loss);
      std::cout << "trained " << outcome.epochs << " epochs, rmse "
                << harmonia::format_double(outcome.first_rmse) << " -> "
                << harmonia::format_double(outcome.final_rmse) << "\n";
    } else if (ga2_cmd->parsed()) {
      PipelineConfig cfg;
      apply_overrides(cfg, ga2_config, ga2_sets);
      auto index = pl::load_index_file(ga2_index);
      pl::WorkDirLock lock(ga2_out);
      pl::cmd_ga2(cfg, index, ga2_expert, ga2_regular, ga2_out, std::cout);
    } else if (score_cmd->parsed()) {
      PipelineConfig cfg;
      apply_overrides(cfg, score_config, score_sets);
      auto index = pl::load_index_file(score_index);
      std::optional<fs::path> expert, regular;
      if (!score_expert.empty()) expert = score_expert;
      if (!score_regular.empty()) regular = score_regular;
      auto result = pl::cmd_score(score_piece, index, cfg, expert, regular);
      print_breakdown(result.breakdown);
      if (result.composite) {
        std::cout << "x2 (expert)  " << harmonia::format_double(*result.x2) << "\n"
                  << "x3 (regular) " << harmonia::format_double(*result.x3) << "\n"
                  << "composite    " << harmonia::format_double(*result.composite) << "\n";
      }
    } else if (convert_cmd->parsed()) {
      if (to_roll == to_abc)
        throw harmonia::ConfigError("convert needs exactly one of --to-roll / --to-abc");
      if (to_roll)
        pl::convert_abc_to_roll(convert_in, convert_out);
      else
        pl::convert_roll_to_abc(convert_in, convert_out);
    }
  } catch (const harmonia::DivergenceDetected& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const harmonia::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const harmonia::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
