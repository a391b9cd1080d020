#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vnd/corpus.hpp"
#include "vnd/encoder.hpp"
#include "vnd/la.hpp"

namespace vnd {

// A (video clip, text clip) pairing scored as f_V(video)^T f_T(text).
struct ScoredPair {
  std::string video_id;
  std::string text_id;
};

// One positive with its sample-specific negative set. For the MIL variant,
// positive_candidates lists the pairs whose scores sum in the numerator; when
// empty it is treated as {positive}.
struct BatchItem {
  ScoredPair positive;                          // equal ids
  std::vector<ScoredPair> negatives;            // mismatched ids, |N| >= 1
  std::vector<ScoredPair> positive_candidates;  // MIL only
};

struct ObjectiveOptions {
  bool use_wide_video = false;  // prefer video_feat_wide when a clip has one
};

// Gradient with the same shapes as the encoder parameters.
struct EncoderGrad {
  Mat w_v;
  Vec b_v;
  Mat w_t;
  Vec b_t;
};

// ---- score-level losses (softmax over explicit score lists) ----

// -log( e^{pos} / (e^{pos} + sum_n e^{neg_n}) ), log-sum-exp stabilized.
double nce_item_loss(double pos_score, const std::vector<double>& neg_scores);

// -log( sum_p e^{p} / (sum_p e^{p} + sum_n e^{n}) )
double milnce_item_loss(const std::vector<double>& pos_scores,
                        const std::vector<double>& neg_scores);

// ---- model-level losses over batches ----

double nce_loss(const std::vector<BatchItem>& items, const DualEncoder& m, const Corpus& corpus,
                const ObjectiveOptions& opts = {});
EncoderGrad nce_grad(const std::vector<BatchItem>& items, const DualEncoder& m,
                     const Corpus& corpus, const ObjectiveOptions& opts = {});

double milnce_loss(const std::vector<BatchItem>& items, const DualEncoder& m,
                   const Corpus& corpus, const ObjectiveOptions& opts = {});
EncoderGrad milnce_grad(const std::vector<BatchItem>& items, const DualEncoder& m,
                        const Corpus& corpus, const ObjectiveOptions& opts = {});

// Mean over items of -[y log s(z) + (1-y) log(1-s(z))], softplus-stabilized.
double bce_loss(const Vec& logits, const std::vector<int>& labels);
// d(bce_loss)/d(logits)
Vec bce_grad(const Vec& logits, const std::vector<int>& labels);

// ---- optimizer ----

enum class OptimizerKind { Adam, Sgd };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step_count = 0;
  std::vector<Vec> m;  // first moments, one slot per parameter tensor
  std::vector<Vec> v;  // second moments
};

struct ParamRef {
  double* value = nullptr;
  const double* grad = nullptr;
  std::size_t size = 0;
};

// In-place update of all listed tensors. Accumulators are allocated on the
// first step and must keep their shapes afterwards.
void optimizer_step(const std::vector<ParamRef>& params, OptimizerState& state);

}  // namespace vnd
