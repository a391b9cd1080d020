#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "vnd/corpus.hpp"
#include "vnd/la.hpp"

namespace vnd {

enum class SetName { SS, VR, MC, Pseudo, Gold };

std::string set_name_str(SetName n);
SetName set_name_from_str(const std::string& s);

// A derived set of (clip, label) pairs plus the parameters that produced it.
struct CuratedSet {
  SetName name = SetName::Gold;
  std::vector<std::pair<std::string, int>> pairs;  // (clip_id, 0/1), ids unique
  std::map<std::string, double> params;            // e.g. {"c": 0.5} or {"k": 10}

  std::vector<std::string> positive_ids() const;
  std::size_t count_label(int label) const;
  const int* find_label(const std::string& clip_id) const;
};

void save_curated_set(const CuratedSet& set, const std::string& path);
// Accepts both the headered curated-set format and headerless clip_id/label
// pair files (oracle label maps); the latter load as a Gold set.
CuratedSet load_curated_set(const std::string& path);

// Clamped cosine: max(0, cos(e1, e2)). Zero vectors score 0 by convention.
double sentence_similarity(const Vec& e1, const Vec& e2);

// Keystep-bearing clips split by sentence similarity against threshold c:
// label 1 when S(sent, keystep) >= c, else label 0. Clips without a keystep
// are excluded entirely.
CuratedSet derive_ss(const Corpus& corpus, double c);

// Every keystep-bearing clip is a positive.
CuratedSet derive_vr(const Corpus& corpus);

// Multinomial logistic regression over task labels for one modality.
struct TaskClassifier {
  enum class Modality { Video, Text };

  Modality modality = Modality::Video;
  Mat weight;                      // n_tasks x D
  Vec bias;                        // n_tasks
  std::vector<std::string> tasks;  // row index -> task label

  std::size_t n_tasks() const { return tasks.size(); }
  std::size_t task_row(const std::string& task_label) const;
  // softmax(Wx + b)
  Vec predict_proba(const Vec& features) const;
};

struct TaskTrainConfig {
  std::size_t iterations = 200;
  double lr = 0.5;
};

// Full-batch gradient descent on mean cross-entropy; deterministic given
// (corpus order, cfg). Features: video_feat (video) or sent_emb (text).
TaskClassifier train_task_classifier(const Corpus& corpus, TaskClassifier::Modality modality,
                                     const TaskTrainConfig& cfg);

// Per modality, score each clip by the classifier's predicted probability of
// the clip's own task label, rank descending (rank 1 = highest, ties broken
// by ascending clip_id); positives need video-rank <= k AND text-rank <= k.
CuratedSet derive_mc(const Corpus& corpus, const TaskClassifier& fv, const TaskClassifier& ft,
                     std::size_t k);

void save_task_classifier(const TaskClassifier& clf, const std::string& path);
TaskClassifier load_task_classifier(const std::string& path);

}  // namespace vnd
