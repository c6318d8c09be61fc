#pragma once

#include <cstddef>

namespace crnmt {

/// Architecture sizes shared by the encoder and decoder.
struct ModelConfig {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t embed_dim = 512;      // d: word + position embedding width, conv channels
  std::size_t max_positions = 100;  // rows of the position table
  std::size_t conv_layers = 3;
  std::size_t conv_width = 3;
  std::size_t enc_hidden = 256;     // per direction; annotations are 2x this wide
  std::size_t dec_hidden = 512;
  std::size_t attn_dim = 512;
  std::size_t tgt_embed_dim = 512;
  bool position_embedding = true;
  double layer_norm_eps = 1e-5;
  double init_range = 0.08;

  /// Throws ConfigError on inconsistent sizes.
  void validate() const;
};

}  // namespace crnmt
