#pragma once

#include <cstdint>
#include <vector>

#include "vnd/la.hpp"

namespace vnd {

// Trainable projections for the two modalities. The video head is a linear
// map over the precomputed clip feature; the text head is linear + ReLU per
// token followed by element-wise max-pooling.
struct DualEncoder {
  Mat w_v;  // D_e x D_v
  Vec b_v;  // D_e
  Mat w_t;  // D_e x D_w
  Vec b_t;  // D_e

  std::size_t embed_dim() const { return w_v.rows; }
  std::size_t video_dim() const { return w_v.cols; }
  std::size_t word_dim() const { return w_t.cols; }
};

// Weights uniform in [-1/sqrt(D_in), +1/sqrt(D_in)], biases zero.
DualEncoder init_encoder(std::size_t d_v, std::size_t d_w, std::size_t d_e,
                         std::uint64_t seed);

// W_v * feat + b_v
Vec embed_video(const Vec& feat, const DualEncoder& m);

// max-pool over per-token ReLU(W_t * u + b_t); empty token list -> zero vector
Vec embed_text(const std::vector<Vec>& tokens, const DualEncoder& m);

// dot product
double score(const Vec& v_emb, const Vec& t_emb);

}  // namespace vnd
