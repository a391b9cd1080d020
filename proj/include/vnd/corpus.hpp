#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vnd/la.hpp"

namespace vnd {

// Waveform reference (path + sample rate) or a precomputed pooled feature
// vector; exactly one of the two forms is populated.
struct AudioRef {
  std::string path;
  int sample_rate = 0;
  Vec feat;

  bool is_path() const { return !path.empty(); }
  bool operator==(const AudioRef&) const = default;
};

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

// One video clip with precomputed features. Immutable after load.
struct ClipRecord {
  std::string clip_id;
  std::string video_id;
  double start_s = 0.0;
  double end_s = 0.0;
  Vec video_feat;                // D_v
  Vec video_feat_wide;           // optional wide-window variant, D_v; empty if absent
  std::string narration_text;
  std::vector<Vec> token_embs;   // per-word embeddings, D_w each; may be empty
  Vec sent_emb;                  // D_s
  std::optional<std::string> keystep_text;
  std::optional<Vec> keystep_emb;  // D_s; present iff keystep_text present
  std::optional<std::string> task_label;
  std::optional<std::vector<std::string>> narration_objects;
  std::optional<std::vector<std::string>> visible_objects;
  std::optional<AudioRef> audio;
  std::optional<Split> split;

  bool operator==(const ClipRecord&) const = default;
};

struct Dims {
  std::size_t d_v = 0;
  std::size_t d_w = 0;
  std::size_t d_s = 0;

  bool operator==(const Dims&) const = default;
};

enum class CorpusSchema { Labeled, Unlabeled };

struct Corpus {
  std::vector<ClipRecord> clips;
  Dims dims;

  const ClipRecord& at(const std::string& clip_id) const;
  const ClipRecord* find(const std::string& clip_id) const;
  bool operator==(const Corpus& o) const { return clips == o.clips && dims == o.dims; }

  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// One record per line; the first line is a header object carrying dims.
Corpus load_corpus(const std::string& path, CorpusSchema schema);
void save_corpus(const Corpus& corpus, const std::string& path);
std::string corpus_to_string(const Corpus& corpus);
Corpus corpus_from_string(const std::string& text, CorpusSchema schema);

struct AnnotationVotes {
  std::string clip_id;
  std::vector<bool> votes;                  // true = yes; 1..7 entries on ingest
  std::vector<std::string> confidences;     // optional: very|somewhat|not
};

enum class Consensus { Positive, Negative, Discarded };

std::string consensus_name(Consensus c);

// The five-of-seven consensus rule; defined only for exactly 7 votes.
Consensus aggregate_annotations(const AnnotationVotes& votes);

std::vector<AnnotationVotes> load_annotation_votes(const std::string& path);
void save_annotation_votes(const std::vector<AnnotationVotes>& votes, const std::string& path);

struct SynthConfig {
  std::size_t n_tasks = 4;
  std::size_t n_keysteps_per_task = 4;
  std::size_t n_clips = 100;
  double visual_rate = 0.5;
  double noise_sigma = 0.1;
  Dims dims{16, 16, 16};
};

struct SynthResult {
  Corpus corpus;
  std::map<std::string, int> oracle_labels;  // clip_id -> planted 0/1 truth
};

// Seeded synthetic corpus with planted ground truth. Pure function of
// (cfg, seed): equal inputs give byte-equal serialized output.
SynthResult synth_corpus(const SynthConfig& cfg, std::uint64_t seed);

Corpus slice_corpus(const Corpus& corpus, std::size_t begin, std::size_t end);
Corpus strip_to_unlabeled(const Corpus& corpus);
Corpus merge_corpora(const std::vector<Corpus>& parts);
Corpus split_subset(const Corpus& corpus, Split split);

void save_oracle_labels(const std::map<std::string, int>& labels, const std::string& path);
std::map<std::string, int> load_oracle_labels(const std::string& path);

}  // namespace vnd
