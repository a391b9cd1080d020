#include "vnd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "json_util.hpp"
#include "vnd/metrics.hpp"
#include "vnd/rng.hpp"

namespace vnd {

using detail::json;

namespace {
// stream tags for deriving child seeds from the master seed
constexpr std::uint64_t kInitStream = 0xA11CEull;
constexpr std::uint64_t kBatchStream = 0xBA7C4ull;
constexpr std::uint64_t kNegStream = 0x17E6Aull;
}  // namespace

std::string loss_kind_str(LossKind k) {
  switch (k) {
    case LossKind::Nce: return "nce";
    case LossKind::MilNce: return "milnce";
    case LossKind::Oc: return "oc";
  }
  throw std::logic_error("unreachable loss kind");
}

LossKind loss_kind_from_str(const std::string& s) {
  if (s == "nce") return LossKind::Nce;
  if (s == "milnce") return LossKind::MilNce;
  if (s == "oc") return LossKind::Oc;
  throw std::runtime_error("unknown loss kind: " + s);
}

void TrainConfig::validate() const {
  if (n_negatives < 1) throw std::invalid_argument("TrainConfig: n_negatives must be >= 1");
  if (batch_size < n_negatives + 1)
    throw std::invalid_argument("TrainConfig: batch_size must be >= n_negatives + 1");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (c < 0.0 || c > 1.0) throw std::invalid_argument("TrainConfig: c must be in [0, 1]");
  if (embed_dim < 1) throw std::invalid_argument("TrainConfig: embed_dim must be >= 1");
  if (mil_positives < 1) throw std::invalid_argument("TrainConfig: mil_positives must be >= 1");
  if (early_stop && patience < 1)
    throw std::invalid_argument("TrainConfig: patience must be >= 1");
}

std::vector<std::vector<std::string>> make_batches(const CuratedSet& positives,
                                                   std::size_t batch_size,
                                                   std::size_t n_negatives,
                                                   std::uint64_t seed) {
  if (batch_size < n_negatives + 1)
    throw std::invalid_argument("make_batches: batch_size must be >= n_negatives + 1");
  std::vector<std::string> ids = positives.positive_ids();
  if (ids.size() < n_negatives + 1)
    throw std::runtime_error("make_batches: need at least " + std::to_string(n_negatives + 1) +
                             " positives, got " + std::to_string(ids.size()));
  Rng rng(mix_seed(seed, kBatchStream));
  rng.shuffle(ids);
  std::vector<std::vector<std::string>> batches;
  for (std::size_t start = 0; start < ids.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, ids.size());
    if (end - start < n_negatives + 1) break;  // drop a too-small trailing batch
    batches.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(start),
                         ids.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<ScoredPair> sample_negatives(const std::vector<std::string>& batch, std::size_t i,
                                         std::size_t n, std::uint64_t seed) {
  if (i >= batch.size()) throw std::invalid_argument("sample_negatives: index out of range");
  if (n + 1 > batch.size())
    throw std::invalid_argument("sample_negatives: n must be smaller than the batch size");
  std::vector<std::size_t> pool;
  pool.reserve(batch.size() - 1);
  for (std::size_t j = 0; j < batch.size(); ++j)
    if (j != i) pool.push_back(j);
  Rng rng(mix_seed(seed, kNegStream));
  // partial Fisher-Yates: first n entries form the sample
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t pick = t + rng.below(pool.size() - t);
    std::swap(pool[t], pool[pick]);
  }
  std::vector<ScoredPair> negatives;
  negatives.reserve(n);
  for (std::size_t t = 0; t < n; ++t)
    negatives.push_back({batch[i], batch[pool[t]]});
  return negatives;
}

DualEncoder initial_encoder(const TrainConfig& cfg, const Dims& dims) {
  return init_encoder(dims.d_v, dims.d_w, cfg.embed_dim, mix_seed(cfg.seed, kInitStream));
}

namespace {

// (mil_positives - 1) temporally nearest same-video narrations, plus the clip
// itself in front.
std::vector<ScoredPair> mil_candidates(const Corpus& corpus, const std::string& clip_id,
                                       std::size_t mil_positives) {
  const ClipRecord& self = corpus.at(clip_id);
  std::vector<const ClipRecord*> same_video;
  for (const ClipRecord& r : corpus.clips)
    if (r.video_id == self.video_id && r.clip_id != clip_id) same_video.push_back(&r);
  std::sort(same_video.begin(), same_video.end(),
            [&](const ClipRecord* a, const ClipRecord* b) {
              const double da = std::abs(a->start_s - self.start_s);
              const double db = std::abs(b->start_s - self.start_s);
              if (da != db) return da < db;
              return a->clip_id < b->clip_id;
            });
  std::vector<ScoredPair> cands{{clip_id, clip_id}};
  for (std::size_t t = 0; t + 1 < mil_positives && t < same_video.size(); ++t)
    cands.push_back({clip_id, same_video[t]->clip_id});
  return cands;
}

double validation_auc(const DualEncoder& model, const CuratedSet& gold, const Corpus& corpus) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(gold.pairs.size());
  for (const auto& [id, label] : gold.pairs) {
    const ClipRecord& clip = corpus.at(id);
    scores.push_back(score(embed_video(clip.video_feat, model),
                           embed_text(clip.token_embs, model)));
    labels.push_back(label);
  }
  return roc_auc(scores, labels);
}

}  // namespace

TrainResult train(const CuratedSet& positives, const Corpus& corpus, const TrainConfig& cfg,
                  const std::string& provenance, const CuratedSet* val_gold,
                  const Corpus* val_corpus) {
  cfg.validate();
  if (cfg.early_stop && (!val_gold || !val_corpus))
    throw std::invalid_argument("train: early_stop requires a validation set and corpus");
  const std::size_t n_pos = positives.count_label(1);
  if (n_pos < cfg.n_negatives + 1)
    throw std::runtime_error("train: need at least " + std::to_string(cfg.n_negatives + 1) +
                             " positives, got " + std::to_string(n_pos));
  for (const auto& [id, label] : positives.pairs)
    if (label == 1) corpus.at(id);  // every referenced clip must exist

  TrainResult result;
  DualEncoder model = initial_encoder(cfg, corpus.dims);
  OptimizerState opt;
  opt.kind = cfg.optimizer;
  opt.lr = cfg.lr;

  ObjectiveOptions opts;
  opts.use_wide_video = cfg.loss_kind == LossKind::Oc;

  double best_val = -std::numeric_limits<double>::infinity();
  std::size_t epochs_without_gain = 0;
  std::size_t epochs_run = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = make_batches(positives, cfg.batch_size, cfg.n_negatives,
                                      mix_seed(cfg.seed, kBatchStream, epoch));
    double epoch_loss = 0.0;
    std::size_t epoch_items = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const std::vector<std::string>& batch = batches[bi];
      std::vector<BatchItem> items;
      items.reserve(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        BatchItem item;
        item.positive = {batch[i], batch[i]};
        item.negatives = sample_negatives(batch, i, cfg.n_negatives,
                                          mix_seed(cfg.seed, kNegStream, epoch, bi, i));
        if (cfg.symmetric_negatives) {
          const std::size_t n = item.negatives.size();
          for (std::size_t k = 0; k < n; ++k)
            item.negatives.push_back(
                {item.negatives[k].text_id, item.negatives[k].video_id});
        }
        if (cfg.loss_kind == LossKind::MilNce)
          item.positive_candidates = mil_candidates(corpus, batch[i], cfg.mil_positives);
        items.push_back(std::move(item));
      }

      double loss = 0.0;
      EncoderGrad grad;
      if (cfg.loss_kind == LossKind::MilNce) {
        loss = milnce_loss(items, model, corpus, opts);
        grad = milnce_grad(items, model, corpus, opts);
      } else {
        loss = nce_loss(items, model, corpus, opts);
        grad = nce_grad(items, model, corpus, opts);
      }
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss (epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(bi) + ")");
      const double scale = 1.0 / static_cast<double>(items.size());
      for (double& g : grad.w_v.data) g *= scale;
      for (double& g : grad.b_v) g *= scale;
      for (double& g : grad.w_t.data) g *= scale;
      for (double& g : grad.b_t) g *= scale;

      std::vector<ParamRef> params{
          {model.w_v.data.data(), grad.w_v.data.data(), model.w_v.data.size()},
          {model.b_v.data(), grad.b_v.data(), model.b_v.size()},
      };
      if (!cfg.freeze_text_head) {
        params.push_back({model.w_t.data.data(), grad.w_t.data.data(), model.w_t.data.size()});
        params.push_back({model.b_t.data(), grad.b_t.data(), model.b_t.size()});
      }
      optimizer_step(params, opt);

      epoch_loss += loss;
      epoch_items += items.size();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = epoch_loss / static_cast<double>(epoch_items);
    final_loss = entry.mean_loss;
    epochs_run = epoch + 1;

    if (val_gold && val_corpus) {
      const double auc = validation_auc(model, *val_gold, *val_corpus);
      entry.val_roc_auc = auc;
      if (cfg.early_stop) {
        if (auc > best_val + 1e-12) {
          best_val = auc;
          epochs_without_gain = 0;
        } else if (++epochs_without_gain >= cfg.patience) {
          result.log.push_back(entry);
          break;
        }
      }
    }
    result.log.push_back(entry);
  }

  result.checkpoint.model = std::move(model);
  result.checkpoint.config = cfg;
  result.checkpoint.seed = cfg.seed;
  result.checkpoint.epoch = epochs_run;
  result.checkpoint.final_loss = final_loss;
  result.checkpoint.provenance = provenance.empty() ? set_name_str(positives.name) : provenance;
  return result;
}

double score_clip(const Checkpoint& ckpt, const ClipRecord& clip) {
  return score(embed_video(clip.video_feat, ckpt.model),
               embed_text(clip.token_embs, ckpt.model));
}

int detect(const Checkpoint& ckpt, const ClipRecord& clip, double threshold) {
  return score_clip(ckpt, clip) >= threshold ? 1 : 0;
}

CuratedSet pseudo_label(const Checkpoint& ckpt, const Corpus& unlabeled, double threshold,
                        const CuratedSet& base, std::vector<std::string>* collision_report) {
  if (std::isnan(threshold)) throw std::invalid_argument("pseudo_label: threshold is NaN");
  CuratedSet out;
  out.name = SetName::Pseudo;
  out.params = base.params;
  out.params["threshold"] = threshold;
  out.pairs = base.pairs;
  std::unordered_map<std::string, int> base_labels;
  for (const auto& [id, label] : base.pairs) base_labels.emplace(id, label);
  for (const ClipRecord& clip : unlabeled.clips) {
    if (detect(ckpt, clip, threshold) != 1) continue;
    auto it = base_labels.find(clip.clip_id);
    if (it != base_labels.end()) {
      if (it->second != 1 && collision_report)
        collision_report->push_back("clip " + clip.clip_id +
                                    ": base label 0 kept, detector said 1");
      continue;  // base wins
    }
    out.pairs.emplace_back(clip.clip_id, 1);
  }
  return out;
}

namespace {

json config_to_json(const TrainConfig& cfg) {
  json j;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["optimizer"] = cfg.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
  j["n_negatives"] = cfg.n_negatives;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["c"] = cfg.c;
  j["clip_duration_s"] = cfg.clip_duration_s;
  j["loss_kind"] = loss_kind_str(cfg.loss_kind);
  j["oc_window_s"] = cfg.oc_window_s;
  j["mil_positives"] = cfg.mil_positives;
  j["freeze_text_head"] = cfg.freeze_text_head;
  j["symmetric_negatives"] = cfg.symmetric_negatives;
  j["embed_dim"] = cfg.embed_dim;
  j["early_stop"] = cfg.early_stop;
  j["patience"] = cfg.patience;
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.lr = j.at("lr").get<double>();
  cfg.optimizer = j.at("optimizer").get<std::string>() == "sgd" ? OptimizerKind::Sgd
                                                                : OptimizerKind::Adam;
  cfg.n_negatives = j.at("n_negatives").get<std::size_t>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.c = j.at("c").get<double>();
  cfg.clip_duration_s = j.at("clip_duration_s").get<double>();
  cfg.loss_kind = loss_kind_from_str(j.at("loss_kind").get<std::string>());
  cfg.oc_window_s = j.at("oc_window_s").get<double>();
  cfg.mil_positives = j.at("mil_positives").get<std::size_t>();
  cfg.freeze_text_head = j.at("freeze_text_head").get<bool>();
  cfg.symmetric_negatives = j.at("symmetric_negatives").get<bool>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.early_stop = j.at("early_stop").get<bool>();
  cfg.patience = j.at("patience").get<std::size_t>();
  return cfg;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json j;
  j["format"] = "vnd-checkpoint-v1";
  j["dims"] = {{"d_v", ckpt.model.w_v.cols},
               {"d_w", ckpt.model.w_t.cols},
               {"d_e", ckpt.model.w_v.rows}};
  j["w_v"] = ckpt.model.w_v.data;
  j["b_v"] = ckpt.model.b_v;
  j["w_t"] = ckpt.model.w_t.data;
  j["b_t"] = ckpt.model.b_t;
  j["config"] = config_to_json(ckpt.config);
  j["seed"] = ckpt.seed;
  j["epoch"] = ckpt.epoch;
  j["final_loss"] = detail::json_double(ckpt.final_loss);
  j["provenance"] = ckpt.provenance;
  detail::write_file(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint parse error in " + path + ": " + e.what());
  }
  if (!j.contains("format") || j.at("format").get<std::string>() != "vnd-checkpoint-v1")
    throw std::runtime_error("not a checkpoint file: " + path);
  Checkpoint ckpt;
  const std::size_t d_v = j.at("dims").at("d_v").get<std::size_t>();
  const std::size_t d_w = j.at("dims").at("d_w").get<std::size_t>();
  const std::size_t d_e = j.at("dims").at("d_e").get<std::size_t>();
  ckpt.model.w_v.rows = d_e;
  ckpt.model.w_v.cols = d_v;
  ckpt.model.w_v.data = detail::vec_from_json(j.at("w_v"));
  ckpt.model.b_v = detail::vec_from_json(j.at("b_v"));
  ckpt.model.w_t.rows = d_e;
  ckpt.model.w_t.cols = d_w;
  ckpt.model.w_t.data = detail::vec_from_json(j.at("w_t"));
  ckpt.model.b_t = detail::vec_from_json(j.at("b_t"));
  if (ckpt.model.w_v.data.size() != d_e * d_v || ckpt.model.b_v.size() != d_e ||
      ckpt.model.w_t.data.size() != d_e * d_w || ckpt.model.b_t.size() != d_e)
    throw std::runtime_error("checkpoint parameter sizes disagree with dims header");
  ckpt.config = config_from_json(j.at("config"));
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  ckpt.epoch = j.at("epoch").get<std::size_t>();
  ckpt.final_loss = detail::double_from_json(j.at("final_loss"));
  ckpt.provenance = j.at("provenance").get<std::string>();
  return ckpt;
}

void save_train_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ostringstream out;
  for (const EpochLog& e : log) {
    json j;
    j["epoch"] = e.epoch;
    j["mean_loss"] = detail::json_double(e.mean_loss);
    if (e.val_roc_auc) j["val_roc_auc"] = detail::json_double(*e.val_roc_auc);
    out << j.dump() << "\n";
  }
  detail::write_file(path, out.str());
}

}  // namespace vnd
