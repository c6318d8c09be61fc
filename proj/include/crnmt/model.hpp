#pragma once

#include <cstdint>
#include <vector>

#include "crnmt/corpus.hpp"
#include "crnmt/decoder.hpp"
#include "crnmt/encoder.hpp"
#include "crnmt/model_config.hpp"

namespace crnmt {

/// Encoder, decoder and the vocabularies they index.
class Model {
 public:
  Model(const ModelConfig& config, Vocabulary src_vocab, Vocabulary tgt_vocab, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& src_vocab() const { return src_vocab_; }
  const Vocabulary& tgt_vocab() const { return tgt_vocab_; }
  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  Decoder& decoder() { return decoder_; }
  const Decoder& decoder() const { return decoder_; }

  /// Every parameter array in a fixed order; names are stable across runs.
  std::vector<NamedTensor> parameters() const;
  /// The subset that receives gradient updates.
  std::vector<NamedTensor> trainable_parameters() const;
  void zero_grad();

  /// Masked per-token NLL of the batch's targets under teacher forcing.
  Tensor batch_loss(const Batch& batch) const;
  static std::size_t target_tokens(const Batch& batch);

  /// Greedy translation of tokenized sources into target tokens.
  std::vector<Tokens> translate(const std::vector<Tokens>& sources, std::size_t max_len) const;

  /// FNV-1a over every parameter's bytes.
  std::uint64_t parameter_checksum() const;

 private:
  ModelConfig config_;
  Vocabulary src_vocab_;
  Vocabulary tgt_vocab_;
  Encoder encoder_;
  Decoder decoder_;
};

}  // namespace crnmt
