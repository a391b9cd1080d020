#include "vnd/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "vnd/rng.hpp"

namespace vnd {

DualEncoder init_encoder(std::size_t d_v, std::size_t d_w, std::size_t d_e,
                         std::uint64_t seed) {
  if (d_v == 0 || d_w == 0 || d_e == 0)
    throw std::invalid_argument("init_encoder: dimensions must be positive");
  DualEncoder m;
  m.w_v = Mat(d_e, d_v);
  m.b_v = Vec(d_e, 0.0);
  m.w_t = Mat(d_e, d_w);
  m.b_t = Vec(d_e, 0.0);
  Rng rng(seed);
  const double bound_v = 1.0 / std::sqrt(static_cast<double>(d_v));
  for (double& x : m.w_v.data) x = rng.uniform(-bound_v, bound_v);
  const double bound_t = 1.0 / std::sqrt(static_cast<double>(d_w));
  for (double& x : m.w_t.data) x = rng.uniform(-bound_t, bound_t);
  return m;
}

Vec embed_video(const Vec& feat, const DualEncoder& m) {
  if (feat.size() != m.w_v.cols)
    throw std::invalid_argument("embed_video: feature has " + std::to_string(feat.size()) +
                                " entries, encoder expects " + std::to_string(m.w_v.cols));
  Vec z = matvec(m.w_v, feat);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += m.b_v[i];
  if (!all_finite(z)) throw std::runtime_error("embed_video: non-finite output");
  return z;
}

Vec embed_text(const std::vector<Vec>& tokens, const DualEncoder& m) {
  Vec out(m.w_t.rows, 0.0);
  if (tokens.empty()) return out;  // degenerate narration scores 0 against everything
  bool first = true;
  for (const Vec& tok : tokens) {
    if (tok.size() != m.w_t.cols)
      throw std::invalid_argument("embed_text: token has " + std::to_string(tok.size()) +
                                  " entries, encoder expects " + std::to_string(m.w_t.cols));
    Vec h = matvec(m.w_t, tok);
    for (std::size_t i = 0; i < h.size(); ++i) {
      double v = h[i] + m.b_t[i];
      if (v < 0.0) v = 0.0;
      if (first || v > out[i]) out[i] = v;
    }
    first = false;
  }
  if (!all_finite(out)) throw std::runtime_error("embed_text: non-finite output");
  return out;
}

double score(const Vec& v_emb, const Vec& t_emb) {
  if (v_emb.size() != t_emb.size())
    throw std::invalid_argument("score: dimension mismatch (" + std::to_string(v_emb.size()) +
                                " vs " + std::to_string(t_emb.size()) + ")");
  return dot(v_emb, t_emb);
}

}  // namespace vnd
