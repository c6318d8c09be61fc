#include "crnmt/model.hpp"

#include <algorithm>
#include <cstring>

#include "crnmt/errors.hpp"

namespace crnmt {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(src_vocab, "source vocabulary size");
  positive(tgt_vocab, "target vocabulary size");
  positive(embed_dim, "embed_dim");
  positive(max_positions, "max_positions");
  positive(enc_hidden, "enc_hidden");
  positive(dec_hidden, "dec_hidden");
  positive(attn_dim, "attn_dim");
  positive(tgt_embed_dim, "tgt_embed_dim");
  if (conv_layers > 5) throw ConfigError("conv_layers must be in 0..5, got " + std::to_string(conv_layers));
  if (conv_width % 2 == 0) throw ConfigError("conv_width must be odd, got " + std::to_string(conv_width));
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
  if (!(init_range > 0.0)) throw ConfigError("init_range must be positive");
}

namespace {
// Separate streams so the decoder's initial weights do not depend on the
// encoder's depth.
constexpr std::uint64_t kDecoderSeedSalt = 0x9e3779b97f4a7c15ULL;

Encoder make_encoder(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return Encoder(config, rng);
}

Decoder make_decoder(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed ^ kDecoderSeedSalt);
  return Decoder(config, rng);
}

ModelConfig with_vocab(ModelConfig config, const Vocabulary& src, const Vocabulary& tgt) {
  config.src_vocab = src.size();
  config.tgt_vocab = tgt.size();
  return config;
}
}  // namespace

Model::Model(const ModelConfig& config, Vocabulary src_vocab, Vocabulary tgt_vocab, std::uint64_t init_seed)
    : config_(with_vocab(config, src_vocab, tgt_vocab)),
      src_vocab_(std::move(src_vocab)),
      tgt_vocab_(std::move(tgt_vocab)),
      encoder_(make_encoder(config_, init_seed)),
      decoder_(make_decoder(config_, init_seed)) {}

std::vector<NamedTensor> Model::parameters() const {
  std::vector<NamedTensor> out;
  encoder_.append_to(out);
  decoder_.append_to(out);
  return out;
}

std::vector<NamedTensor> Model::trainable_parameters() const {
  auto all = parameters();
  std::erase_if(all, [](const NamedTensor& p) { return !p.tensor.requires_grad(); });
  return all;
}

void Model::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

std::size_t Model::target_tokens(const Batch& batch) {
  std::size_t n = 0;
  for (auto len : batch.tgt_lengths) n += len - 1;
  return n;
}

Tensor Model::batch_loss(const Batch& batch) const {
  const Annotations e = encoder_.encode(batch);
  const Tensor logits = decoder_.teacher_forced_logits(batch, e);
  const std::size_t B = batch.size, steps = batch.tgt_len - 1;
  std::vector<std::int64_t> targets(B * steps);
  std::vector<std::uint8_t> mask(B * steps);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < steps; ++i) {
      targets[b * steps + i] = batch.tgt_ids[b * batch.tgt_len + i + 1];
      mask[b * steps + i] = batch.tgt_mask[b * batch.tgt_len + i + 1];
    }
  }
  return nll_loss(reshape(logits, {B * steps, logits.dim(2)}), targets, mask);
}

std::vector<Tokens> Model::translate(const std::vector<Tokens>& sources, std::size_t max_len) const {
  NoGradGuard no_grad;
  constexpr std::size_t kChunk = 64;
  std::vector<Tokens> out(sources.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (!sources[i].empty()) pending.push_back(i);
  }
  for (std::size_t start = 0; start < pending.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, pending.size() - start);
    std::size_t T = 0;
    for (std::size_t k = 0; k < n; ++k) T = std::max(T, sources[pending[start + k]].size());
    std::vector<std::int64_t> ids(n * T, Vocabulary::kPad);
    std::vector<std::size_t> lengths(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto enc = src_vocab_.encode(sources[pending[start + k]]);
      std::copy(enc.begin(), enc.end(), ids.begin() + static_cast<std::ptrdiff_t>(k * T));
      lengths[k] = enc.size();
    }
    const Annotations e = encoder_.encode(ids, lengths, n, T);
    const auto decoded = decoder_.greedy_decode(e, max_len);
    for (std::size_t k = 0; k < n; ++k) out[pending[start + k]] = tgt_vocab_.decode(decoded[k]);
  }
  return out;
}

std::uint64_t Model::parameter_checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : parameters()) {
    for (double v : p.tensor.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

}  // namespace crnmt
