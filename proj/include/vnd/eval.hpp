#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "vnd/corpus.hpp"
#include "vnd/curation.hpp"
#include "vnd/metrics.hpp"
#include "vnd/trainer.hpp"

namespace vnd {

struct GridRow {
  double c = 0.0;
  std::size_t n_negatives = 0;
  double val_roc_auc = 0.0;
};

struct EvalReport {
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double roc_auc = 0.0;
  double chosen_threshold = 0.0;
  // (clip_id, score, label) in gold order
  std::vector<std::tuple<std::string, double, int>> table;
  std::vector<GridRow> grid;       // grid-search rows, sorted by (c, |N|)
  std::optional<GridRow> best;     // argmax val ROC-AUC
};

// Scores every gold clip with the checkpoint, then computes ROC-AUC and the
// Youden-optimal threshold. Gold must contain both classes.
EvalReport evaluate(const Checkpoint& ckpt, const CuratedSet& gold, const Corpus& corpus);

// For each (c, |N|) cell: derive_ss on the train split, train with the same
// seed, evaluate on the validation split against val_gold. Rows sorted by
// (c, |N|); argmax ties resolve to smaller |N| then smaller c. Cells are
// independent and may run on `jobs` threads; output is order-fixed.
EvalReport grid_search(const Corpus& corpus, const CuratedSet& val_gold,
                       const std::vector<double>& c_grid,
                       const std::vector<std::size_t>& n_grid, const TrainConfig& base_cfg,
                       std::size_t jobs = 1);

std::string format_report(const EvalReport& report);  // human-readable table
void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

}  // namespace vnd
