#pragma once

// Convolutional-recurrent source encoder: word + position embeddings, a
// stack of SAME-padded tanh convolutions with per-layer skips, a residual
// sum back to the embeddings followed by layer normalization, and a
// bidirectional GRU whose concatenated states are the annotations.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crnmt/corpus.hpp"
#include "crnmt/model_config.hpp"
#include "crnmt/random.hpp"
#include "crnmt/tensor.hpp"

namespace crnmt {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Gate weights act on the concatenation [input : hidden], so each W has
/// input_size + hidden_size rows.
struct GruParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Tensor w_z, w_r, w_h;
  Tensor b_z, b_r, b_h;

  static GruParams create(std::size_t input_size, std::size_t hidden_size, Rng& rng, double init_range);
  void append_to(std::vector<NamedTensor>& out, const std::string& prefix) const;
};

/// x: [B x in], h_prev: [B x H] (or unbatched [in], [H]).
Tensor gru_cell(const GruParams& params, const Tensor& x, const Tensor& h_prev);

struct ConvLayer {
  Tensor kernel;  // [n x d x d]
  Tensor bias;    // [d]
};

struct EncoderParams {
  Tensor word_emb;  // [V_src x d]
  Tensor pos_emb;   // [P_max x d]; all zeros and frozen when position embedding is off
  std::vector<ConvLayer> conv;
  Tensor ln_gain;
  Tensor ln_bias;
  GruParams gru_fwd;
  GruParams gru_bwd;
};

/// Per-token encoder outputs, zero beyond each sentence's length.
struct Annotations {
  Tensor states;  // [B x T x 2H]; columns [0, H) forward, [H, 2H) backward
  std::vector<std::size_t> lengths;
  std::vector<std::uint8_t> mask;  // [B x T]
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::size_t hidden = 0;  // H, one direction
};

std::vector<std::uint8_t> lengths_to_mask(std::span<const std::size_t> lengths, std::size_t steps);

class Encoder {
 public:
  Encoder() = default;
  Encoder(const ModelConfig& config, Rng& rng);

  /// a[b, t] = word_emb[ids[b, t]] + pos_emb[t]; ids is row-major [B x T].
  Tensor embed(std::span<const std::int64_t> ids, std::size_t batch, std::size_t steps) const;
  /// Runs the conv layers over [B x T x d]; masked positions are zeroed
  /// before each convolution.
  Tensor conv_stack(const Tensor& embedded, std::span<const std::uint8_t> mask) const;
  Tensor residual_layernorm(const Tensor& conv_out, const Tensor& embedded) const;
  Annotations bigru_encode(const Tensor& inputs, std::span<const std::size_t> lengths) const;

  Annotations encode(std::span<const std::int64_t> ids, std::span<const std::size_t> lengths, std::size_t batch,
                     std::size_t steps) const;
  Annotations encode(const Batch& batch) const;

  EncoderParams& params() { return params_; }
  const EncoderParams& params() const { return params_; }
  void append_to(std::vector<NamedTensor>& out) const;

 private:
  ModelConfig config_;
  EncoderParams params_;
};

}  // namespace crnmt
