#pragma once

// Attention-based GRU decoder. Each step scores every annotation against the
// previous decoder state with an additive scorer, forms the context vector as
// the attention-weighted sum, feeds [context : previous target embedding]
// through a GRU, and projects the new state to vocabulary logits.

#include <cstdint>
#include <span>
#include <vector>

#include "crnmt/corpus.hpp"
#include "crnmt/encoder.hpp"
#include "crnmt/model_config.hpp"
#include "crnmt/random.hpp"
#include "crnmt/tensor.hpp"

namespace crnmt {

struct DecoderParams {
  Tensor tgt_emb;    // [V_tgt x d_y]
  Tensor attn_w1;    // [H_d x A]
  Tensor attn_b1;    // [A]
  Tensor attn_w2;    // [2H x A]
  Tensor attn_b2;    // [A]
  Tensor attn_v;     // [A x 1] reduces tanh(...) to one score per position
  GruParams gru;     // input 2H + d_y, hidden H_d
  Tensor out_proj;   // [H_d x V_tgt]
  Tensor out_bias;   // [V_tgt]
  Tensor init_proj;  // [2H x H_d]
  Tensor init_bias;  // [H_d]
};

struct DecodeState {
  Tensor h;                               // [B x H_d]
  std::vector<std::int64_t> prev_tokens;  // one per batch row
  std::size_t step = 0;
};

/// Projected annotations W_2 e_t + b_2, computed once per source batch.
struct AttentionKeys {
  Tensor keys;  // [B x T x A]
};

struct StepOutput {
  Tensor h;        // [B x H_d]
  Tensor weights;  // attention, [B x T]
  Tensor logits;   // [B x V_tgt]
  Tensor dist;     // softmax(logits)
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(const ModelConfig& config, Rng& rng);

  AttentionKeys prepare_keys(const Annotations& e) const;

  /// Unmasked raw scores v . tanh(W_1 h + b_1 + W_2 e_t + b_2), [B x T].
  Tensor attention_scores(const Tensor& h_prev, const Annotations& e, const AttentionKeys& keys) const;
  Tensor attention_scores(const Tensor& h_prev, const Annotations& e) const;
  /// Softmax over positions; padded positions get exactly zero weight.
  static Tensor attention_weights(const Tensor& scores, std::span<const std::uint8_t> mask);
  static Tensor context_vector(const Tensor& weights, const Annotations& e);

  DecodeState init_state(const Annotations& e) const;
  StepOutput decode_step(const DecodeState& state, const Annotations& e, const AttentionKeys& keys) const;
  StepOutput decode_step(const DecodeState& state, const Annotations& e) const;

  /// Logits for every position of the gold target after BOS, conditioned on
  /// the gold history: [B x (M_max - 1) x V_tgt].
  Tensor teacher_forced_logits(const Batch& batch, const Annotations& e) const;

  /// Argmax decoding per batch row, lowest id wins ties. The EOS that stops
  /// a row is not included.
  std::vector<std::vector<std::int64_t>> greedy_decode(const Annotations& e, std::size_t max_len) const;

  DecoderParams& params() { return params_; }
  const DecoderParams& params() const { return params_; }
  void append_to(std::vector<NamedTensor>& out) const;

 private:
  // GRU update from h_prev given the previous tokens; returns (h_new, weights).
  std::pair<Tensor, Tensor> advance(const Tensor& h_prev, std::span<const std::int64_t> prev_tokens,
                                    const Annotations& e, const AttentionKeys& keys) const;

  ModelConfig config_;
  DecoderParams params_;
};

}  // namespace crnmt
