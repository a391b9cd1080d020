#include "vnd/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace vnd {

namespace {

double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  // log(1 + e^z) without overflow
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Text-head forward pass with the bookkeeping the backward pass needs:
// which token won each max-pool coordinate and whether its pre-activation
// was strictly positive (ReLU'(0) = 0, first-token tie-break).
struct TextForward {
  Vec emb;
  std::vector<std::ptrdiff_t> argmax;
  std::vector<char> active;
};

TextForward text_forward(const std::vector<Vec>& tokens, const DualEncoder& m) {
  const std::size_t d_e = m.w_t.rows;
  TextForward out;
  out.emb.assign(d_e, 0.0);
  out.argmax.assign(d_e, -1);
  out.active.assign(d_e, 0);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const Vec& u = tokens[t];
    if (u.size() != m.w_t.cols)
      throw std::invalid_argument("text token dimension mismatch");
    for (std::size_t d = 0; d < d_e; ++d) {
      double a = m.b_t[d];
      const double* row = m.w_t.data.data() + d * m.w_t.cols;
      for (std::size_t c = 0; c < u.size(); ++c) a += row[c] * u[c];
      const double h = a > 0.0 ? a : 0.0;
      if (t == 0 || h > out.emb[d]) {
        out.emb[d] = h;
        out.argmax[d] = static_cast<std::ptrdiff_t>(t);
      }
    }
  }
  for (std::size_t d = 0; d < d_e; ++d) out.active[d] = out.emb[d] > 0.0 ? 1 : 0;
  return out;
}

const Vec& video_features(const ClipRecord& clip, const ObjectiveOptions& opts) {
  if (opts.use_wide_video && !clip.video_feat_wide.empty()) return clip.video_feat_wide;
  return clip.video_feat;
}

struct ForwardCache {
  const DualEncoder& model;
  const Corpus& corpus;
  const ObjectiveOptions& opts;
  std::unordered_map<std::string, Vec> video;
  std::unordered_map<std::string, TextForward> text;

  const Vec& video_emb(const std::string& clip_id) {
    auto it = video.find(clip_id);
    if (it != video.end()) return it->second;
    const ClipRecord& clip = corpus.at(clip_id);
    return video.emplace(clip_id, embed_video(video_features(clip, opts), model)).first->second;
  }

  const TextForward& text_fwd(const std::string& clip_id) {
    auto it = text.find(clip_id);
    if (it != text.end()) return it->second;
    return text.emplace(clip_id, text_forward(corpus.at(clip_id).token_embs, model))
        .first->second;
  }

  double pair_score(const ScoredPair& pair) {
    const double s = dot(video_emb(pair.video_id), text_fwd(pair.text_id).emb);
    if (!std::isfinite(s))
      throw std::runtime_error("non-finite score for pair (" + pair.video_id + ", " +
                               pair.text_id + ")");
    return s;
  }
};

void validate_item(const BatchItem& item, bool mil) {
  if (item.positive.video_id != item.positive.text_id)
    throw std::invalid_argument("positive pair must reference one clip, got (" +
                                item.positive.video_id + ", " + item.positive.text_id + ")");
  if (item.negatives.empty()) throw std::invalid_argument("batch item needs >= 1 negative");
  for (const ScoredPair& n : item.negatives)
    if (n.video_id == n.text_id)
      throw std::invalid_argument("negative pair must mismatch clips, got (" + n.video_id +
                                  ", " + n.text_id + ")");
  if (mil) {
    // an empty candidate list means {positive}
    for (const ScoredPair& p : item.positive_candidates)
      if (p.video_id.empty() || p.text_id.empty())
        throw std::invalid_argument("malformed positive candidate");
  }
}

// dLoss/dscore contributions routed into the parameter gradients for one
// scored pair.
void accumulate_pair(const ScoredPair& pair, double weight, ForwardCache& cache,
                     EncoderGrad& grad) {
  if (weight == 0.0) return;
  const ClipRecord& vclip = cache.corpus.at(pair.video_id);
  const Vec& x = video_features(vclip, cache.opts);
  const Vec& z_v = cache.video_emb(pair.video_id);
  const TextForward& tf = cache.text_fwd(pair.text_id);
  const std::size_t d_e = grad.w_v.rows;

  for (std::size_t d = 0; d < d_e; ++d) {
    const double we = weight * tf.emb[d];
    if (we != 0.0) {
      double* row = grad.w_v.data.data() + d * grad.w_v.cols;
      for (std::size_t c = 0; c < x.size(); ++c) row[c] += we * x[c];
    }
    grad.b_v[d] += we;
  }

  const std::vector<Vec>& tokens = cache.corpus.at(pair.text_id).token_embs;
  for (std::size_t d = 0; d < d_e; ++d) {
    if (!tf.active[d]) continue;  // ReLU dead or max-pool stuck at zero
    const Vec& u = tokens[static_cast<std::size_t>(tf.argmax[d])];
    const double wz = weight * z_v[d];
    if (wz == 0.0) continue;
    double* row = grad.w_t.data.data() + d * grad.w_t.cols;
    for (std::size_t c = 0; c < u.size(); ++c) row[c] += wz * u[c];
    grad.b_t[d] += wz;
  }
}

EncoderGrad zero_grad(const DualEncoder& m) {
  EncoderGrad g;
  g.w_v = Mat(m.w_v.rows, m.w_v.cols, 0.0);
  g.b_v = Vec(m.b_v.size(), 0.0);
  g.w_t = Mat(m.w_t.rows, m.w_t.cols, 0.0);
  g.b_t = Vec(m.b_t.size(), 0.0);
  return g;
}

double nce_core(const std::vector<BatchItem>& items, const DualEncoder& m, const Corpus& corpus,
                const ObjectiveOptions& opts, EncoderGrad* grad) {
  ForwardCache cache{m, corpus, opts, {}, {}};
  double loss = 0.0;
  for (const BatchItem& item : items) {
    validate_item(item, false);
    const double pos = cache.pair_score(item.positive);
    std::vector<double> scores{pos};
    for (const ScoredPair& n : item.negatives) scores.push_back(cache.pair_score(n));
    const double lse = log_sum_exp(scores);
    loss += lse - pos;
    if (grad) {
      // softmax weights: d(lse - pos)/ds_k
      for (std::size_t k = 0; k < scores.size(); ++k) {
        double w = std::exp(scores[k] - lse);
        if (k == 0) w -= 1.0;
        accumulate_pair(k == 0 ? item.positive : item.negatives[k - 1], w, cache, *grad);
      }
    }
  }
  return loss;
}

double milnce_core(const std::vector<BatchItem>& items, const DualEncoder& m,
                   const Corpus& corpus, const ObjectiveOptions& opts, EncoderGrad* grad) {
  ForwardCache cache{m, corpus, opts, {}, {}};
  double loss = 0.0;
  for (const BatchItem& item : items) {
    validate_item(item, true);
    std::vector<ScoredPair> candidates = item.positive_candidates;
    if (candidates.empty()) candidates.push_back(item.positive);
    std::vector<double> pos_scores;
    for (const ScoredPair& p : candidates) pos_scores.push_back(cache.pair_score(p));
    std::vector<double> all_scores = pos_scores;
    for (const ScoredPair& n : item.negatives) all_scores.push_back(cache.pair_score(n));
    const double lse_all = log_sum_exp(all_scores);
    const double lse_pos = log_sum_exp(pos_scores);
    loss += lse_all - lse_pos;
    if (grad) {
      for (std::size_t k = 0; k < candidates.size(); ++k) {
        const double w =
            std::exp(all_scores[k] - lse_all) - std::exp(pos_scores[k] - lse_pos);
        accumulate_pair(candidates[k], w, cache, *grad);
      }
      for (std::size_t k = 0; k < item.negatives.size(); ++k) {
        const double w = std::exp(all_scores[candidates.size() + k] - lse_all);
        accumulate_pair(item.negatives[k], w, cache, *grad);
      }
    }
  }
  return loss;
}

}  // namespace

double nce_item_loss(double pos_score, const std::vector<double>& neg_scores) {
  if (neg_scores.empty()) throw std::invalid_argument("nce_item_loss: needs >= 1 negative");
  std::vector<double> scores{pos_score};
  scores.insert(scores.end(), neg_scores.begin(), neg_scores.end());
  return log_sum_exp(scores) - pos_score;
}

double milnce_item_loss(const std::vector<double>& pos_scores,
                        const std::vector<double>& neg_scores) {
  if (pos_scores.empty()) throw std::invalid_argument("milnce_item_loss: needs >= 1 positive");
  if (neg_scores.empty()) throw std::invalid_argument("milnce_item_loss: needs >= 1 negative");
  std::vector<double> all = pos_scores;
  all.insert(all.end(), neg_scores.begin(), neg_scores.end());
  return log_sum_exp(all) - log_sum_exp(pos_scores);
}

double nce_loss(const std::vector<BatchItem>& items, const DualEncoder& m, const Corpus& corpus,
                const ObjectiveOptions& opts) {
  return nce_core(items, m, corpus, opts, nullptr);
}

EncoderGrad nce_grad(const std::vector<BatchItem>& items, const DualEncoder& m,
                     const Corpus& corpus, const ObjectiveOptions& opts) {
  EncoderGrad g = zero_grad(m);
  nce_core(items, m, corpus, opts, &g);
  return g;
}

double milnce_loss(const std::vector<BatchItem>& items, const DualEncoder& m,
                   const Corpus& corpus, const ObjectiveOptions& opts) {
  return milnce_core(items, m, corpus, opts, nullptr);
}

EncoderGrad milnce_grad(const std::vector<BatchItem>& items, const DualEncoder& m,
                        const Corpus& corpus, const ObjectiveOptions& opts) {
  EncoderGrad g = zero_grad(m);
  milnce_core(items, m, corpus, opts, &g);
  return g;
}

double bce_loss(const Vec& logits, const std::vector<int>& labels) {
  if (logits.size() != labels.size())
    throw std::invalid_argument("bce_loss: length mismatch (" + std::to_string(logits.size()) +
                                " logits vs " + std::to_string(labels.size()) + " labels)");
  if (logits.empty()) throw std::invalid_argument("bce_loss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("bce_loss: labels must be 0 or 1");
    total += labels[i] == 1 ? softplus(-logits[i]) : softplus(logits[i]);
  }
  return total / static_cast<double>(logits.size());
}

Vec bce_grad(const Vec& logits, const std::vector<int>& labels) {
  if (logits.size() != labels.size())
    throw std::invalid_argument("bce_grad: length mismatch");
  if (logits.empty()) throw std::invalid_argument("bce_grad: empty input");
  Vec g(logits.size());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i)
    g[i] = (stable_sigmoid(logits[i]) - static_cast<double>(labels[i])) * inv_n;
  return g;
}

void optimizer_step(const std::vector<ParamRef>& params, OptimizerState& state) {
  if (params.empty()) throw std::invalid_argument("optimizer_step: no parameters");
  for (const ParamRef& p : params) {
    if (!p.value || !p.grad || p.size == 0)
      throw std::invalid_argument("optimizer_step: malformed parameter reference");
    for (std::size_t i = 0; i < p.size; ++i)
      if (!std::isfinite(p.grad[i]))
        throw std::runtime_error("optimizer_step: non-finite gradient");
  }
  if (state.m.empty()) {
    for (const ParamRef& p : params) {
      state.m.emplace_back(p.size, 0.0);
      state.v.emplace_back(p.size, 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("optimizer_step: parameter count changed mid-run");
  for (std::size_t t = 0; t < params.size(); ++t)
    if (state.m[t].size() != params[t].size)
      throw std::invalid_argument("optimizer_step: shape mismatch on parameter " +
                                  std::to_string(t));

  state.step_count += 1;
  if (state.kind == OptimizerKind::Sgd) {
    for (const ParamRef& p : params)
      for (std::size_t i = 0; i < p.size; ++i) p.value[i] -= state.lr * p.grad[i];
    return;
  }
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t t = 0; t < params.size(); ++t) {
    const ParamRef& p = params[t];
    Vec& m = state.m[t];
    Vec& v = state.v[t];
    for (std::size_t i = 0; i < p.size; ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace vnd
