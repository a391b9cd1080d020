#include "vnd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json_util.hpp"
#include "vnd/rng.hpp"

namespace vnd {

using detail::json;

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  throw std::logic_error("unreachable split");
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw std::runtime_error("unknown split name: " + name);
}

void Corpus::rebuild_index() {
  index_.clear();
  index_.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) index_[clips[i].clip_id] = i;
}

const ClipRecord* Corpus::find(const std::string& clip_id) const {
  auto it = index_.find(clip_id);
  return it == index_.end() ? nullptr : &clips[it->second];
}

const ClipRecord& Corpus::at(const std::string& clip_id) const {
  const ClipRecord* clip = find(clip_id);
  if (!clip) throw std::runtime_error("clip not found in corpus: " + clip_id);
  return *clip;
}

namespace {

void require_finite(const Vec& v, const std::string& clip_id, const std::string& field) {
  if (!all_finite(v))
    throw std::runtime_error("non-finite value in " + field + " of clip " + clip_id);
}

void check_dim(const Vec& v, std::size_t want, const std::string& clip_id,
               const std::string& field) {
  if (v.size() != want)
    throw std::runtime_error("dimension mismatch in clip " + clip_id + ": " + field + " has " +
                             std::to_string(v.size()) + " entries, header declares " +
                             std::to_string(want));
}

json record_to_json(const ClipRecord& r) {
  json j;
  j["clip_id"] = r.clip_id;
  j["video_id"] = r.video_id;
  j["start_s"] = r.start_s;
  j["end_s"] = r.end_s;
  j["video_feat"] = detail::json_vec(r.video_feat);
  if (!r.video_feat_wide.empty()) j["video_feat_wide"] = detail::json_vec(r.video_feat_wide);
  j["narration_text"] = r.narration_text;
  json toks = json::array();
  for (const Vec& t : r.token_embs) toks.push_back(detail::json_vec(t));
  j["token_embs"] = toks;
  j["sent_emb"] = detail::json_vec(r.sent_emb);
  if (r.keystep_text) j["keystep_text"] = *r.keystep_text;
  if (r.keystep_emb) j["keystep_emb"] = detail::json_vec(*r.keystep_emb);
  if (r.task_label) j["task_label"] = *r.task_label;
  if (r.narration_objects) j["narration_objects"] = *r.narration_objects;
  if (r.visible_objects) j["visible_objects"] = *r.visible_objects;
  if (r.audio) {
    json a;
    if (r.audio->is_path()) {
      a["path"] = r.audio->path;
      a["sample_rate"] = r.audio->sample_rate;
    } else {
      a["feat"] = detail::json_vec(r.audio->feat);
    }
    j["audio"] = a;
  }
  if (r.split) j["split"] = split_name(*r.split);
  return j;
}

ClipRecord record_from_json(const json& j) {
  ClipRecord r;
  r.clip_id = j.at("clip_id").get<std::string>();
  r.video_id = j.at("video_id").get<std::string>();
  r.start_s = j.at("start_s").get<double>();
  r.end_s = j.at("end_s").get<double>();
  r.video_feat = detail::vec_from_json(j.at("video_feat"));
  if (j.contains("video_feat_wide"))
    r.video_feat_wide = detail::vec_from_json(j.at("video_feat_wide"));
  r.narration_text = j.at("narration_text").get<std::string>();
  for (const auto& t : j.at("token_embs")) r.token_embs.push_back(detail::vec_from_json(t));
  r.sent_emb = detail::vec_from_json(j.at("sent_emb"));
  if (j.contains("keystep_text")) r.keystep_text = j.at("keystep_text").get<std::string>();
  if (j.contains("keystep_emb")) r.keystep_emb = detail::vec_from_json(j.at("keystep_emb"));
  if (j.contains("task_label")) r.task_label = j.at("task_label").get<std::string>();
  if (j.contains("narration_objects"))
    r.narration_objects = j.at("narration_objects").get<std::vector<std::string>>();
  if (j.contains("visible_objects"))
    r.visible_objects = j.at("visible_objects").get<std::vector<std::string>>();
  if (j.contains("audio")) {
    const json& a = j.at("audio");
    AudioRef ref;
    if (a.contains("path")) {
      ref.path = a.at("path").get<std::string>();
      ref.sample_rate = a.at("sample_rate").get<int>();
    } else {
      ref.feat = detail::vec_from_json(a.at("feat"));
    }
    r.audio = ref;
  }
  if (j.contains("split")) r.split = split_from_name(j.at("split").get<std::string>());
  return r;
}

void validate_record(const ClipRecord& r, const Dims& dims, CorpusSchema schema) {
  const std::string& id = r.clip_id;
  if (id.empty()) throw std::runtime_error("record with empty clip_id");
  if (!(r.end_s > r.start_s))
    throw std::runtime_error("clip " + id + ": end_s must exceed start_s");
  check_dim(r.video_feat, dims.d_v, id, "video_feat");
  require_finite(r.video_feat, id, "video_feat");
  if (!r.video_feat_wide.empty()) {
    check_dim(r.video_feat_wide, dims.d_v, id, "video_feat_wide");
    require_finite(r.video_feat_wide, id, "video_feat_wide");
  }
  for (const Vec& t : r.token_embs) {
    check_dim(t, dims.d_w, id, "token_embs");
    require_finite(t, id, "token_embs");
  }
  check_dim(r.sent_emb, dims.d_s, id, "sent_emb");
  require_finite(r.sent_emb, id, "sent_emb");
  if (r.keystep_text.has_value() != r.keystep_emb.has_value())
    throw std::runtime_error("clip " + id +
                             ": keystep_text and keystep_emb must be present together");
  if (r.keystep_emb) {
    check_dim(*r.keystep_emb, dims.d_s, id, "keystep_emb");
    require_finite(*r.keystep_emb, id, "keystep_emb");
  }
  if (r.audio && !r.audio->is_path()) require_finite(r.audio->feat, id, "audio.feat");
  if (schema == CorpusSchema::Unlabeled) {
    if (r.keystep_text || r.keystep_emb)
      throw std::runtime_error("clip " + id + ": keystep fields not allowed under the "
                               "unlabeled schema");
    if (r.task_label)
      throw std::runtime_error("clip " + id + ": task_label not allowed under the "
                               "unlabeled schema");
  }
}

}  // namespace

std::string corpus_to_string(const Corpus& corpus) {
  std::ostringstream out;
  json header;
  header["dims"] = {corpus.dims.d_v, corpus.dims.d_w, corpus.dims.d_s};
  out << header.dump() << "\n";
  for (const ClipRecord& r : corpus.clips) out << record_to_json(r).dump() << "\n";
  return out.str();
}

Corpus corpus_from_string(const std::string& text, CorpusSchema schema) {
  Corpus corpus;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    if (!have_header) {
      if (!j.contains("dims") || !j.at("dims").is_array() || j.at("dims").size() != 3)
        throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                 ": first line must be a header with \"dims\": [D_v, D_w, D_s]");
      corpus.dims.d_v = j.at("dims")[0].get<std::size_t>();
      corpus.dims.d_w = j.at("dims")[1].get<std::size_t>();
      corpus.dims.d_s = j.at("dims")[2].get<std::size_t>();
      if (corpus.dims.d_v == 0 || corpus.dims.d_w == 0 || corpus.dims.d_s == 0)
        throw std::runtime_error("header dims must be positive");
      have_header = true;
      continue;
    }
    ClipRecord r;
    try {
      r = record_from_json(j);
    } catch (const json::exception& e) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    validate_record(r, corpus.dims, schema);
    if (!seen.insert(r.clip_id).second)
      throw std::runtime_error("duplicate clip_id at line " + std::to_string(line_no) + ": " +
                               r.clip_id);
    corpus.clips.push_back(std::move(r));
  }
  if (!have_header)
    throw std::runtime_error("corpus file has no header record (expected "
                             "{\"dims\": [D_v, D_w, D_s]} on the first line)");
  corpus.rebuild_index();
  return corpus;
}

Corpus load_corpus(const std::string& path, CorpusSchema schema) {
  return corpus_from_string(detail::read_file(path), schema);
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  detail::write_file(path, corpus_to_string(corpus));
}

std::string consensus_name(Consensus c) {
  switch (c) {
    case Consensus::Positive: return "positive";
    case Consensus::Negative: return "negative";
    case Consensus::Discarded: return "discarded";
  }
  throw std::logic_error("unreachable consensus");
}

Consensus aggregate_annotations(const AnnotationVotes& votes) {
  if (votes.votes.size() != 7)
    throw std::runtime_error("consensus requires exactly 7 votes, got " +
                             std::to_string(votes.votes.size()) + " for clip " + votes.clip_id);
  std::size_t yes = 0;
  for (bool v : votes.votes) yes += v ? 1 : 0;
  const std::size_t no = 7 - yes;
  if (yes >= 5) return Consensus::Positive;
  if (no >= 5) return Consensus::Negative;
  return Consensus::Discarded;
}

std::vector<AnnotationVotes> load_annotation_votes(const std::string& path) {
  std::istringstream in(detail::read_file(path));
  std::vector<AnnotationVotes> all;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    AnnotationVotes v;
    v.clip_id = j.at("clip_id").get<std::string>();
    for (const auto& x : j.at("votes")) {
      const std::string s = x.get<std::string>();
      if (s == "yes") v.votes.push_back(true);
      else if (s == "no") v.votes.push_back(false);
      else
        throw std::runtime_error("line " + std::to_string(line_no) + ": vote must be yes|no, got " + s);
    }
    if (v.votes.empty() || v.votes.size() > 7)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": vote count must be in [1, 7]");
    if (j.contains("confidences"))
      v.confidences = j.at("confidences").get<std::vector<std::string>>();
    all.push_back(std::move(v));
  }
  return all;
}

void save_annotation_votes(const std::vector<AnnotationVotes>& votes, const std::string& path) {
  std::ostringstream out;
  for (const AnnotationVotes& v : votes) {
    json j;
    j["clip_id"] = v.clip_id;
    json arr = json::array();
    for (bool b : v.votes) arr.push_back(b ? "yes" : "no");
    j["votes"] = arr;
    if (!v.confidences.empty()) j["confidences"] = v.confidences;
    out << j.dump() << "\n";
  }
  detail::write_file(path, out.str());
}

namespace {

Vec normalized(Vec v) {
  double n = norm(v);
  if (n > 0)
    for (double& x : v) x /= n;
  return v;
}

// Anchor directions for the planted keysteps. When they fit, anchors are
// orthonormalized so distinct keysteps have near-zero cosine; otherwise we
// fall back to rejection sampling with a separation target.
std::vector<Vec> make_anchors(std::size_t n, std::size_t dim, Rng& rng) {
  std::vector<Vec> anchors;
  anchors.reserve(n);
  if (n <= dim) {
    for (std::size_t i = 0; i < n; ++i) {
      Vec v(dim);
      while (true) {
        for (double& x : v) x = rng.normal();
        for (const Vec& q : anchors) add_scaled(v, -dot(v, q), q);
        if (norm(v) > 1e-8) break;
        for (double& x : v) x = rng.normal();
      }
      anchors.push_back(normalized(std::move(v)));
    }
    return anchors;
  }
  const double max_cos = 0.35;
  for (std::size_t i = 0; i < n; ++i) {
    Vec best;
    double best_worst = 2.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
      Vec v(dim);
      for (double& x : v) x = rng.normal();
      v = normalized(std::move(v));
      double worst = 0.0;
      for (const Vec& q : anchors) worst = std::max(worst, std::abs(dot(v, q)));
      if (worst < best_worst) {
        best_worst = worst;
        best = v;
      }
      if (worst < max_cos) break;
    }
    anchors.push_back(std::move(best));
  }
  return anchors;
}

// Fixed deterministic expansion of the sentence embedding into word tokens:
// three rotations of the coordinate vector.
std::vector<Vec> expand_tokens(const Vec& sent, std::size_t d_w) {
  const std::size_t d_s = sent.size();
  std::vector<Vec> tokens;
  for (std::size_t t = 0; t < 3; ++t) {
    Vec tok(d_w);
    for (std::size_t c = 0; c < d_w; ++c) tok[c] = sent[(c + t) % d_s];
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::string zero_pad(std::size_t value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

SynthResult synth_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.n_clips < 1) throw std::invalid_argument("synth_corpus: n_clips must be >= 1");
  if (cfg.dims.d_v == 0 || cfg.dims.d_w == 0 || cfg.dims.d_s == 0)
    throw std::invalid_argument("synth_corpus: dims must be positive");
  if (cfg.n_tasks < 1 || cfg.n_keysteps_per_task < 1)
    throw std::invalid_argument("synth_corpus: need at least one task and keystep");
  if (cfg.visual_rate < 0.0 || cfg.visual_rate > 1.0)
    throw std::invalid_argument("synth_corpus: visual_rate must be in [0, 1]");
  if (cfg.noise_sigma < 0.0)
    throw std::invalid_argument("synth_corpus: noise_sigma must be >= 0");
  const std::size_t n_anchor = cfg.n_tasks * cfg.n_keysteps_per_task;
  if (n_anchor < 2 && cfg.visual_rate < 1.0)
    throw std::invalid_argument("synth_corpus: non-visual clips need a second keystep anchor");

  Rng rng(mix_seed(seed, 0xC0FFEEull));
  std::vector<Vec> video_anchors = make_anchors(n_anchor, cfg.dims.d_v, rng);
  std::vector<Vec> text_anchors = make_anchors(n_anchor, cfg.dims.d_s, rng);

  const std::size_t clips_per_video = 5;
  SynthResult out;
  out.corpus.dims = cfg.dims;
  for (std::size_t i = 0; i < cfg.n_clips; ++i) {
    const bool visual = rng.bernoulli(cfg.visual_rate);
    const std::size_t k = rng.below(n_anchor);  // demonstrated keystep
    std::size_t j = k;                          // narrated keystep
    if (!visual) {
      j = rng.below(n_anchor - 1);
      if (j >= k) ++j;
    }

    ClipRecord r;
    r.clip_id = "clip_" + zero_pad(i, 6);
    r.video_id = "vid_" + zero_pad(i / clips_per_video, 5);
    r.start_s = static_cast<double>(i % clips_per_video) * 3.0;
    r.end_s = r.start_s + 3.0;

    Vec vf = video_anchors[k];
    for (double& x : vf) x += cfg.noise_sigma * rng.normal();
    r.video_feat = normalized(std::move(vf));

    Vec se = text_anchors[j];
    for (double& x : se) x += cfg.noise_sigma * rng.normal();
    r.sent_emb = normalized(std::move(se));
    r.token_embs = expand_tokens(r.sent_emb, cfg.dims.d_w);

    const std::string step_j = "keystep_" + std::to_string(j);
    const std::string step_k = "keystep_" + std::to_string(k);
    r.narration_text = "now we " + step_j + " as you can see";
    r.keystep_text = step_k;
    r.keystep_emb = text_anchors[k];
    r.task_label = "task_" + std::to_string(k / cfg.n_keysteps_per_task);
    r.narration_objects = {"obj_" + std::to_string(j) + "_a", "obj_" + std::to_string(j) + "_b",
                           "common_tool"};
    r.visible_objects = {"obj_" + std::to_string(k) + "_a", "obj_" + std::to_string(k) + "_b",
                         "obj_" + std::to_string(k) + "_c", "common_tool"};

    if (i < (cfg.n_clips * 64) / 100) r.split = Split::Train;
    else if (i < (cfg.n_clips * 80) / 100) r.split = Split::Val;
    else r.split = Split::Test;

    out.oracle_labels[r.clip_id] = visual ? 1 : 0;
    out.corpus.clips.push_back(std::move(r));
  }
  out.corpus.rebuild_index();
  return out;
}

Corpus slice_corpus(const Corpus& corpus, std::size_t begin, std::size_t end) {
  if (begin > end || end > corpus.clips.size())
    throw std::invalid_argument("slice_corpus: invalid range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") for " +
                                std::to_string(corpus.clips.size()) + " clips");
  Corpus out;
  out.dims = corpus.dims;
  out.clips.assign(corpus.clips.begin() + static_cast<std::ptrdiff_t>(begin),
                   corpus.clips.begin() + static_cast<std::ptrdiff_t>(end));
  out.rebuild_index();
  return out;
}

Corpus strip_to_unlabeled(const Corpus& corpus) {
  Corpus out;
  out.dims = corpus.dims;
  out.clips = corpus.clips;
  for (ClipRecord& r : out.clips) {
    r.keystep_text.reset();
    r.keystep_emb.reset();
    r.task_label.reset();
  }
  out.rebuild_index();
  return out;
}

Corpus merge_corpora(const std::vector<Corpus>& parts) {
  if (parts.empty()) throw std::invalid_argument("merge_corpora: no corpora given");
  Corpus out;
  out.dims = parts.front().dims;
  std::unordered_set<std::string> seen;
  for (const Corpus& part : parts) {
    if (!(part.dims == out.dims))
      throw std::runtime_error("merge_corpora: corpora have differing dims");
    for (const ClipRecord& r : part.clips) {
      if (!seen.insert(r.clip_id).second)
        throw std::runtime_error("merge_corpora: duplicate clip_id " + r.clip_id);
      out.clips.push_back(r);
    }
  }
  out.rebuild_index();
  return out;
}

Corpus split_subset(const Corpus& corpus, Split split) {
  Corpus out;
  out.dims = corpus.dims;
  for (const ClipRecord& r : corpus.clips)
    if (r.split && *r.split == split) out.clips.push_back(r);
  out.rebuild_index();
  return out;
}

void save_oracle_labels(const std::map<std::string, int>& labels, const std::string& path) {
  std::ostringstream out;
  for (const auto& [id, label] : labels) out << id << "\t" << label << "\n";
  detail::write_file(path, out.str());
}

std::map<std::string, int> load_oracle_labels(const std::string& path) {
  std::istringstream in(detail::read_file(path));
  std::map<std::string, int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("oracle labels: missing tab at line " + std::to_string(line_no));
    const std::string id = line.substr(0, tab);
    const std::string lab = line.substr(tab + 1);
    if (lab != "0" && lab != "1")
      throw std::runtime_error("oracle labels: label must be 0 or 1 at line " +
                               std::to_string(line_no));
    labels[id] = lab == "1" ? 1 : 0;
  }
  return labels;
}

}  // namespace vnd
