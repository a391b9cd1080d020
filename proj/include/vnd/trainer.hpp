#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vnd/corpus.hpp"
#include "vnd/curation.hpp"
#include "vnd/encoder.hpp"
#include "vnd/objective.hpp"

namespace vnd {

enum class LossKind { Nce, MilNce, Oc };

std::string loss_kind_str(LossKind k);
LossKind loss_kind_from_str(const std::string& s);

struct TrainConfig {
  std::size_t batch_size = 128;
  double lr = 1e-5;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t n_negatives = 4;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double c = 0.5;
  double clip_duration_s = 3.0;
  LossKind loss_kind = LossKind::Nce;
  double oc_window_s = 16.0;
  std::size_t mil_positives = 3;
  bool freeze_text_head = false;
  bool symmetric_negatives = false;  // also mismatch (v_j, t_i)
  std::size_t embed_dim = 256;
  bool early_stop = false;  // needs a validation set at train() time
  std::size_t patience = 3;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> val_roc_auc;
};

struct Checkpoint {
  DualEncoder model;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;        // epochs actually run
  double final_loss = 0.0;      // last epoch mean loss; NaN when no steps ran
  std::string provenance;       // tag of the curated set trained on
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

// Seeded shuffle into fixed-size batches of positive clip ids; a final
// partial batch is kept only when it still admits n_negatives + 1 clips.
std::vector<std::vector<std::string>> make_batches(const CuratedSet& positives,
                                                   std::size_t batch_size,
                                                   std::size_t n_negatives, std::uint64_t seed);

// n distinct indices j != i drawn uniformly without replacement from the
// batch; pairs are (video of clip i, text of clip j).
std::vector<ScoredPair> sample_negatives(const std::vector<std::string>& batch, std::size_t i,
                                         std::size_t n, std::uint64_t seed);

// Seeded parameter initialization used by train(); exposed so the zero-epoch
// contract (checkpoint == initialization) stays checkable.
DualEncoder initial_encoder(const TrainConfig& cfg, const Dims& dims);

// Full training loop. When cfg.early_stop is set, val_gold/val_corpus supply
// the held-out labels scored after each epoch.
TrainResult train(const CuratedSet& positives, const Corpus& corpus, const TrainConfig& cfg,
                  const std::string& provenance = "",
                  const CuratedSet* val_gold = nullptr, const Corpus* val_corpus = nullptr);

double score_clip(const Checkpoint& ckpt, const ClipRecord& clip);

// 1 iff score >= threshold
int detect(const Checkpoint& ckpt, const ClipRecord& clip, double threshold);

// base plus every unlabeled clip the detector fires on; base pairs win on id
// collision, and conflicting collisions are reported.
CuratedSet pseudo_label(const Checkpoint& ckpt, const Corpus& unlabeled, double threshold,
                        const CuratedSet& base,
                        std::vector<std::string>* collision_report = nullptr);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void save_train_log(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace vnd
