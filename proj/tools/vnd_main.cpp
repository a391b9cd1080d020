// Command-line surface for the visual narration detection pipeline:
// synth | curate | train | pseudo | eval | grid. Every command writes a run
// manifest next to its primary output; all randomness is seeded explicitly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vnd/audio.hpp"
#include "vnd/corpus.hpp"
#include "vnd/rng.hpp"
#include "vnd/curation.hpp"
#include "vnd/eval.hpp"
#include "vnd/metrics.hpp"
#include "vnd/trainer.hpp"

namespace {

using nlohmann::json;

double parse_threshold(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw CLI::ValidationError("--threshold", "not a number: " + s);
  return v;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw CLI::ValidationError("empty list: " + s);
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (double v : parse_double_list(s)) {
    if (v < 0 || v != std::floor(v))
      throw CLI::ValidationError("expected nonnegative integers: " + s);
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// Every invocation records what ran and where; rerunning with the recorded
// parameters reproduces the outputs byte for byte (wall clock aside).
struct Manifest {
  std::string command;
  json parameters = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const std::string& primary_out, int exit_status) const {
    if (primary_out.empty()) return;
    json j;
    j["command"] = command;
    j["parameters"] = parameters;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_clock_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    j["exit_status"] = exit_status;
    std::FILE* f = std::fopen((primary_out + ".manifest.json").c_str(), "wb");
    if (!f) return;
    const std::string text = j.dump(2) + "\n";
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }
};

struct SynthArgs {
  std::size_t clips = 0;
  std::uint64_t seed = 0;
  std::size_t tasks = 4;
  std::size_t keysteps = 4;
  double visual_rate = 0.5;
  double noise = 0.1;
  std::string dims = "16,16,16";
  std::string schema = "labeled";
  std::size_t begin = 0;
  std::size_t end = 0;  // 0 = all clips
  std::string out;
  std::string oracle;
};

int run_synth(const SynthArgs& a, Manifest& manifest) {
  vnd::SynthConfig cfg;
  cfg.n_clips = a.clips;
  cfg.n_tasks = a.tasks;
  cfg.n_keysteps_per_task = a.keysteps;
  cfg.visual_rate = a.visual_rate;
  cfg.noise_sigma = a.noise;
  const auto dims = parse_size_list(a.dims);
  if (dims.size() != 3) throw std::runtime_error("--dims expects D_v,D_w,D_s");
  cfg.dims = {dims[0], dims[1], dims[2]};

  vnd::SynthResult result = vnd::synth_corpus(cfg, a.seed);
  const std::size_t end = a.end == 0 ? cfg.n_clips : a.end;
  vnd::Corpus sliced = vnd::slice_corpus(result.corpus, a.begin, end);
  if (a.schema == "unlabeled") sliced = vnd::strip_to_unlabeled(sliced);

  vnd::save_corpus(sliced, a.out);
  manifest.outputs.push_back(a.out);
  if (!a.oracle.empty()) {
    std::map<std::string, int> labels;
    for (const vnd::ClipRecord& r : sliced.clips)
      labels[r.clip_id] = result.oracle_labels.at(r.clip_id);
    vnd::save_oracle_labels(labels, a.oracle);
    manifest.outputs.push_back(a.oracle);
  }
  std::cout << "wrote " << sliced.clips.size() << " clips to " << a.out << "\n";
  return 0;
}

struct CurateArgs {
  std::string corpus;
  std::string rule;
  double c = 0.5;
  std::int64_t k = -1;
  std::size_t mc_iters = 200;
  double mc_lr = 0.5;
  std::string out;
};

int run_curate(const CurateArgs& a, Manifest& manifest) {
  const vnd::Corpus corpus = vnd::load_corpus(a.corpus, vnd::CorpusSchema::Labeled);
  vnd::CuratedSet set;
  if (a.rule == "ss") {
    set = vnd::derive_ss(corpus, a.c);
  } else if (a.rule == "vr") {
    set = vnd::derive_vr(corpus);
  } else {
    if (a.k < 0) throw std::runtime_error("--rule mc requires --k");
    vnd::TaskTrainConfig tcfg{a.mc_iters, a.mc_lr};
    const auto fv = vnd::train_task_classifier(corpus, vnd::TaskClassifier::Modality::Video, tcfg);
    const auto ft = vnd::train_task_classifier(corpus, vnd::TaskClassifier::Modality::Text, tcfg);
    set = vnd::derive_mc(corpus, fv, ft, static_cast<std::size_t>(a.k));
  }
  vnd::save_curated_set(set, a.out);
  manifest.outputs.push_back(a.out);

  const std::size_t n_pos = set.count_label(1);
  const std::size_t n_neg = set.count_label(0);
  double hours = 0.0;
  for (const auto& [id, label] : set.pairs)
    if (label == 1) {
      const vnd::ClipRecord& clip = corpus.at(id);
      hours += (clip.end_s - clip.start_s) / 3600.0;
    }
  std::cout << "curated " << vnd::set_name_str(set.name) << ": " << n_pos << " positives, "
            << n_neg << " negatives, " << std::fixed << std::setprecision(3) << hours
            << " hours of positives\n";
  if (n_pos == 0) std::cerr << "warning: curated set has 0 positives\n";
  return 0;
}

struct TrainArgs {
  std::vector<std::string> corpora;
  std::string set_path;
  std::string out;
  std::string log;
  vnd::TrainConfig cfg;
  std::string optimizer = "adam";
  std::string loss = "nce";
  std::string val_set;
  std::string val_corpus;
};

vnd::Corpus load_merged(const std::vector<std::string>& paths) {
  std::vector<vnd::Corpus> parts;
  for (const std::string& p : paths)
    parts.push_back(vnd::load_corpus(p, vnd::CorpusSchema::Labeled));
  return parts.size() == 1 ? std::move(parts.front()) : vnd::merge_corpora(parts);
}

std::string provenance_of(const vnd::CuratedSet& set, const std::string& path) {
  std::string tag = vnd::set_name_str(set.name);
  for (const auto& [k, v] : set.params) {
    std::ostringstream p;
    p << " " << k << "=" << v;
    tag += p.str();
  }
  return tag + " (" + path + ")";
}

int run_train(TrainArgs& a, Manifest& manifest) {
  a.cfg.optimizer = a.optimizer == "sgd" ? vnd::OptimizerKind::Sgd : vnd::OptimizerKind::Adam;
  a.cfg.loss_kind = vnd::loss_kind_from_str(a.loss);
  const vnd::Corpus corpus = load_merged(a.corpora);
  const vnd::CuratedSet positives = vnd::load_curated_set(a.set_path);

  std::optional<vnd::CuratedSet> val_set;
  std::optional<vnd::Corpus> val_corpus;
  if (!a.val_set.empty()) {
    val_set = vnd::load_curated_set(a.val_set);
    val_corpus = a.val_corpus.empty()
                     ? corpus
                     : vnd::load_corpus(a.val_corpus, vnd::CorpusSchema::Labeled);
  }
  if (a.cfg.early_stop && !val_set)
    throw std::runtime_error("--early-stop requires --val-set");

  const vnd::TrainResult result =
      vnd::train(positives, corpus, a.cfg, provenance_of(positives, a.set_path),
                 val_set ? &*val_set : nullptr, val_corpus ? &*val_corpus : nullptr);
  vnd::save_checkpoint(result.checkpoint, a.out);
  manifest.outputs.push_back(a.out);
  if (!a.log.empty()) {
    vnd::save_train_log(result.log, a.log);
    manifest.outputs.push_back(a.log);
  }
  std::cout << "trained " << result.checkpoint.epoch << " epochs, final mean loss "
            << result.checkpoint.final_loss << "\n";
  return 0;
}

struct PseudoArgs {
  std::string ckpt;
  std::string corpus;  // unlabeled
  std::string base;
  std::string out;
  std::string threshold;  // number or +/-inf; empty -> Youden on --val-set
  std::string val_set;
  std::string val_corpus;
  std::string labeled_corpus;
  std::size_t rounds = 1;
  std::uint64_t seed = 0;
};

int run_pseudo(const PseudoArgs& a, Manifest& manifest) {
  vnd::Checkpoint ckpt = vnd::load_checkpoint(a.ckpt);
  const vnd::Corpus unlabeled = vnd::load_corpus(a.corpus, vnd::CorpusSchema::Unlabeled);
  vnd::CuratedSet current = vnd::load_curated_set(a.base);

  double threshold;
  if (!a.threshold.empty()) {
    threshold = parse_threshold(a.threshold);
  } else {
    if (a.val_set.empty() || a.val_corpus.empty())
      throw std::runtime_error("pseudo: give --threshold or both --val-set and --val-corpus");
    const vnd::CuratedSet val = vnd::load_curated_set(a.val_set);
    const vnd::Corpus vc = vnd::load_corpus(a.val_corpus, vnd::CorpusSchema::Labeled);
    threshold = vnd::evaluate(ckpt, val, vc).chosen_threshold;
    std::cout << "selected threshold " << threshold << " on " << a.val_set << "\n";
  }

  std::vector<std::string> collisions;
  for (std::size_t round = 1; round <= a.rounds; ++round) {
    current = vnd::pseudo_label(ckpt, unlabeled, threshold, current, &collisions);
    if (round == a.rounds) break;
    // further rounds retrain on the grown set before relabeling
    if (a.labeled_corpus.empty())
      throw std::runtime_error("pseudo: --rounds > 1 requires --labeled-corpus");
    const vnd::Corpus labeled = vnd::load_corpus(a.labeled_corpus, vnd::CorpusSchema::Labeled);
    const vnd::Corpus merged = vnd::merge_corpora({labeled, unlabeled});
    vnd::TrainConfig cfg = ckpt.config;
    cfg.seed = vnd::mix_seed(a.seed, round);
    ckpt = vnd::train(current, merged, cfg, "PSEUDO round " + std::to_string(round))
               .checkpoint;
  }
  for (const std::string& c : collisions) std::cerr << "collision: " << c << "\n";
  vnd::save_curated_set(current, a.out);
  manifest.outputs.push_back(a.out);
  std::cout << "pseudo-labeled set: " << current.count_label(1) << " positives ("
            << current.pairs.size() << " pairs) -> " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt;
  std::string corpus;
  std::string gold;
  std::string out;
};

int run_eval(const EvalArgs& a, Manifest& manifest) {
  const vnd::Checkpoint ckpt = vnd::load_checkpoint(a.ckpt);
  const vnd::Corpus corpus = vnd::load_corpus(a.corpus, vnd::CorpusSchema::Labeled);
  const vnd::CuratedSet gold = vnd::load_curated_set(a.gold);
  const vnd::EvalReport report = vnd::evaluate(ckpt, gold, corpus);
  if (!a.out.empty()) {
    vnd::save_report(report, a.out);
    manifest.outputs.push_back(a.out);
  }
  std::cout << std::fixed << std::setprecision(4) << "ROC-AUC: " << report.roc_auc << "\n";
  return 0;
}

struct GridArgs {
  std::string corpus;
  std::string gold;
  std::string c_grid = "0.4,0.5,0.6";
  std::string n_grid = "3,5,7,9";
  std::size_t jobs = 1;
  std::string out;
  vnd::TrainConfig cfg;
  std::string optimizer = "adam";
};

int run_grid(GridArgs& a, Manifest& manifest) {
  a.cfg.optimizer = a.optimizer == "sgd" ? vnd::OptimizerKind::Sgd : vnd::OptimizerKind::Adam;
  const vnd::Corpus corpus = vnd::load_corpus(a.corpus, vnd::CorpusSchema::Labeled);
  const vnd::CuratedSet gold = vnd::load_curated_set(a.gold);
  const vnd::EvalReport report =
      vnd::grid_search(corpus, gold, parse_double_list(a.c_grid), parse_size_list(a.n_grid),
                       a.cfg, a.jobs);
  vnd::save_report(report, a.out);
  manifest.outputs.push_back(a.out);
  std::cout << vnd::format_report(report);
  return 0;
}

void add_train_flags(CLI::App* cmd, vnd::TrainConfig& cfg, std::string& optimizer) {
  cmd->add_option("--neg", cfg.n_negatives, "negatives per positive");
  cmd->add_option("--batch", cfg.batch_size, "batch size");
  cmd->add_option("--lr", cfg.lr, "learning rate");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--embed-dim", cfg.embed_dim, "joint embedding dimension");
  cmd->add_option("--optimizer", optimizer, "adam|sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));
  cmd->add_option("--mil-p", cfg.mil_positives, "candidate positives for milnce");
  cmd->add_option("--oc-window", cfg.oc_window_s, "wide-window seconds for oc");
  cmd->add_flag("--freeze-text", cfg.freeze_text_head, "freeze the text head");
  cmd->add_flag("--symmetric-neg", cfg.symmetric_negatives,
                "also mismatch (v_j, t_i) pairs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visual narration detection pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read defaults from a config file (flags win)");

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--clips", synth.clips, "number of clips")->required();
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->required();
  synth_cmd->add_option("--out", synth.out, "corpus output path")->required();
  synth_cmd->add_option("--oracle", synth.oracle, "planted-label output path");
  synth_cmd->add_option("--tasks", synth.tasks, "number of tasks");
  synth_cmd->add_option("--keysteps", synth.keysteps, "keysteps per task");
  synth_cmd->add_option("--visual-rate", synth.visual_rate, "fraction of visual clips")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--noise", synth.noise, "anchor noise sigma")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--dims", synth.dims, "D_v,D_w,D_s");
  synth_cmd->add_option("--schema", synth.schema, "labeled|unlabeled")
      ->check(CLI::IsMember({"labeled", "unlabeled"}));
  synth_cmd->add_option("--begin", synth.begin, "slice start (inclusive)");
  synth_cmd->add_option("--end", synth.end, "slice end (exclusive, 0 = all)");

  CurateArgs curate;
  CLI::App* curate_cmd = app.add_subcommand("curate", "derive a training set");
  curate_cmd->add_option("--corpus", curate.corpus, "labeled corpus")->required();
  curate_cmd->add_option("--rule", curate.rule, "ss|vr|mc")
      ->required()
      ->check(CLI::IsMember({"ss", "vr", "mc"}));
  curate_cmd->add_option("--c", curate.c, "sentence-similarity threshold")
      ->check(CLI::Range(0.0, 1.0));
  curate_cmd->add_option("--k", curate.k, "rank cutoff for mc");
  curate_cmd->add_option("--mc-iters", curate.mc_iters, "task-classifier iterations");
  curate_cmd->add_option("--mc-lr", curate.mc_lr, "task-classifier learning rate");
  curate_cmd->add_option("--out", curate.out, "curated set output path")->required();

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train the dual encoder");
  train_cmd->add_option("--corpus", train.corpora, "corpus path (repeatable; merged)")
      ->required();
  train_cmd->add_option("--set", train.set_path, "curated training set")->required();
  train_cmd->add_option("--out", train.out, "checkpoint output path")->required();
  train_cmd->add_option("--seed", train.cfg.seed, "training seed")->required();
  train_cmd->add_option("--loss", train.loss, "nce|milnce|oc")
      ->check(CLI::IsMember({"nce", "milnce", "oc"}));
  train_cmd->add_option("--log", train.log, "per-epoch training log path");
  train_cmd->add_option("--val-set", train.val_set, "validation labels (curated set)");
  train_cmd->add_option("--val-corpus", train.val_corpus, "validation corpus");
  train_cmd->add_flag("--early-stop", train.cfg.early_stop,
                      "stop on validation ROC-AUC plateau");
  train_cmd->add_option("--patience", train.cfg.patience, "plateau epochs before stopping");
  add_train_flags(train_cmd, train.cfg, train.optimizer);

  PseudoArgs pseudo;
  CLI::App* pseudo_cmd = app.add_subcommand("pseudo", "pseudo-label an unlabeled corpus");
  pseudo_cmd->add_option("--ckpt", pseudo.ckpt, "detector checkpoint")->required();
  pseudo_cmd->add_option("--corpus", pseudo.corpus, "unlabeled corpus")->required();
  pseudo_cmd->add_option("--base", pseudo.base, "base curated set")->required();
  pseudo_cmd->add_option("--out", pseudo.out, "output curated set")->required();
  pseudo_cmd->add_option("--seed", pseudo.seed, "seed (used by --rounds retraining)")
      ->required();
  pseudo_cmd->add_option("--threshold", pseudo.threshold,
                         "detection threshold (number, inf, -inf)");
  pseudo_cmd->add_option("--val-set", pseudo.val_set,
                         "labels for Youden threshold selection");
  pseudo_cmd->add_option("--val-corpus", pseudo.val_corpus, "corpus for --val-set clips");
  pseudo_cmd->add_option("--labeled-corpus", pseudo.labeled_corpus,
                         "labeled corpus (required when --rounds > 1)");
  pseudo_cmd->add_option("--rounds", pseudo.rounds, "self-training rounds")
      ->check(CLI::PositiveNumber);

  EvalArgs evala;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score a gold set");
  eval_cmd->add_option("--ckpt", evala.ckpt, "detector checkpoint")->required();
  eval_cmd->add_option("--corpus", evala.corpus, "corpus with gold clip features")->required();
  eval_cmd->add_option("--gold", evala.gold, "gold labels (curated set or id/label pairs)")
      ->required();
  eval_cmd->add_option("--out", evala.out, "report output path");

  GridArgs grid;
  CLI::App* grid_cmd = app.add_subcommand("grid", "sweep (c, |N|) on the validation split");
  grid_cmd->add_option("--corpus", grid.corpus, "corpus with split fields")->required();
  grid_cmd->add_option("--gold", grid.gold, "validation-split gold labels")->required();
  grid_cmd->add_option("--seed", grid.cfg.seed, "per-cell training seed")->required();
  grid_cmd->add_option("--out", grid.out, "grid table output path")->required();
  grid_cmd->add_option("--c-grid", grid.c_grid, "comma-separated c values");
  grid_cmd->add_option("--n-grid", grid.n_grid, "comma-separated |N| values");
  grid_cmd->add_option("--jobs", grid.jobs, "parallel grid cells")
      ->check(CLI::PositiveNumber);
  add_train_flags(grid_cmd, grid.cfg, grid.optimizer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  Manifest manifest;
  std::string primary_out;
  int status = 0;
  try {
    if (*synth_cmd) {
      manifest.command = "synth";
      primary_out = synth.out;
      manifest.inputs = {};
      manifest.parameters = {{"clips", synth.clips},       {"seed", synth.seed},
                             {"tasks", synth.tasks},       {"keysteps", synth.keysteps},
                             {"visual_rate", synth.visual_rate}, {"noise", synth.noise},
                             {"dims", synth.dims},         {"schema", synth.schema},
                             {"begin", synth.begin},       {"end", synth.end},
                             {"out", synth.out},           {"oracle", synth.oracle}};
      status = run_synth(synth, manifest);
    } else if (*curate_cmd) {
      manifest.command = "curate";
      primary_out = curate.out;
      manifest.inputs = {curate.corpus};
      manifest.parameters = {{"corpus", curate.corpus}, {"rule", curate.rule},
                             {"c", curate.c},           {"k", curate.k},
                             {"mc_iters", curate.mc_iters}, {"mc_lr", curate.mc_lr},
                             {"out", curate.out}};
      status = run_curate(curate, manifest);
    } else if (*train_cmd) {
      manifest.command = "train";
      primary_out = train.out;
      manifest.inputs = train.corpora;
      manifest.inputs.push_back(train.set_path);
      manifest.parameters = {{"corpus", train.corpora},
                             {"set", train.set_path},
                             {"seed", train.cfg.seed},
                             {"loss", train.loss},
                             {"neg", train.cfg.n_negatives},
                             {"batch", train.cfg.batch_size},
                             {"lr", train.cfg.lr},
                             {"epochs", train.cfg.epochs},
                             {"embed_dim", train.cfg.embed_dim},
                             {"optimizer", train.optimizer},
                             {"freeze_text", train.cfg.freeze_text_head},
                             {"symmetric_neg", train.cfg.symmetric_negatives},
                             {"early_stop", train.cfg.early_stop},
                             {"out", train.out}};
      status = run_train(train, manifest);
    } else if (*pseudo_cmd) {
      manifest.command = "pseudo";
      primary_out = pseudo.out;
      manifest.inputs = {pseudo.ckpt, pseudo.corpus, pseudo.base};
      manifest.parameters = {{"ckpt", pseudo.ckpt},       {"corpus", pseudo.corpus},
                             {"base", pseudo.base},       {"threshold", pseudo.threshold},
                             {"val_set", pseudo.val_set}, {"val_corpus", pseudo.val_corpus},
                             {"rounds", pseudo.rounds},   {"seed", pseudo.seed},
                             {"out", pseudo.out}};
      status = run_pseudo(pseudo, manifest);
    } else if (*eval_cmd) {
      manifest.command = "eval";
      primary_out = evala.out.empty() ? evala.ckpt : evala.out;
      manifest.inputs = {evala.ckpt, evala.corpus, evala.gold};
      manifest.parameters = {{"ckpt", evala.ckpt},
                             {"corpus", evala.corpus},
                             {"gold", evala.gold},
                             {"out", evala.out}};
      status = run_eval(evala, manifest);
      if (evala.out.empty()) primary_out.clear();  // no outputs, no manifest
    } else if (*grid_cmd) {
      manifest.command = "grid";
      primary_out = grid.out;
      manifest.inputs = {grid.corpus, grid.gold};
      manifest.parameters = {{"corpus", grid.corpus}, {"gold", grid.gold},
                             {"c_grid", grid.c_grid}, {"n_grid", grid.n_grid},
                             {"jobs", grid.jobs},     {"seed", grid.cfg.seed},
                             {"lr", grid.cfg.lr},     {"epochs", grid.cfg.epochs},
                             {"batch", grid.cfg.batch_size},
                             {"embed_dim", grid.cfg.embed_dim},
                             {"out", grid.out}};
      status = run_grid(grid, manifest);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    manifest.write(primary_out, 1);
    return 1;
  }
  manifest.write(primary_out, status);
  return status;
}
