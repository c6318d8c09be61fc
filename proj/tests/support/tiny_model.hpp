#pragma once

#include <string>
#include <vector>

#include "crnmt/corpus.hpp"
#include "crnmt/model.hpp"
#include "crnmt/model_config.hpp"
#include "crnmt/random.hpp"

namespace crnmt::testing {

// d=8, H=6, H_d=8, L=2, n=3, V=20 on both sides.
inline ModelConfig tiny_model_config(std::size_t conv_layers = 2) {
  ModelConfig c;
  c.src_vocab = 20;
  c.tgt_vocab = 20;
  c.embed_dim = 8;
  c.max_positions = 8;
  c.conv_layers = conv_layers;
  c.conv_width = 3;
  c.enc_hidden = 6;
  c.dec_hidden = 8;
  c.attn_dim = 8;
  c.tgt_embed_dim = 8;
  return c;
}

inline Vocabulary word_vocab(std::size_t size, const std::string& prefix = "w") {
  std::vector<std::string> tokens = Vocabulary::reserved_tokens();
  for (std::size_t i = tokens.size(); i < size; ++i) tokens.push_back(prefix + std::to_string(i));
  return Vocabulary(tokens);
}

inline Tokens random_sentence(Rng& rng, std::size_t length, std::size_t vocab, const std::string& prefix = "w") {
  Tokens out;
  for (std::size_t i = 0; i < length; ++i) {
    out.push_back(prefix + std::to_string(Vocabulary::kNumReserved + rng.below(vocab - Vocabulary::kNumReserved)));
  }
  return out;
}

/// `count` random pairs with source and target lengths in [1, max_len].
inline std::vector<SentencePair> random_pairs(Rng& rng, std::size_t count, std::size_t max_len, std::size_t vocab = 20) {
  std::vector<SentencePair> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({random_sentence(rng, 1 + rng.below(max_len), vocab), random_sentence(rng, 1 + rng.below(max_len), vocab)});
  }
  return out;
}

inline Batch whole_batch(const std::vector<SentencePair>& pairs, const Vocabulary& src, const Vocabulary& tgt) {
  std::vector<std::size_t> idx(pairs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(pairs, idx, src, tgt);
}

}  // namespace crnmt::testing
