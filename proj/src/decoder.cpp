#include "crnmt/decoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace crnmt {

namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, double range) {
  Tensor t(std::move(shape), 0.0, true);
  for (auto& v : t.mutable_data()) v = rng.uniform(-range, range);
  return t;
}

Tensor zeros_param(Shape shape) { return Tensor(std::move(shape), 0.0, true); }

}  // namespace

Decoder::Decoder(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const double r = config.init_range;
  const std::size_t ann = 2 * config.enc_hidden;
  params_.tgt_emb = uniform_tensor({config.tgt_vocab, config.tgt_embed_dim}, rng, r);
  params_.attn_w1 = uniform_tensor({config.dec_hidden, config.attn_dim}, rng, r);
  params_.attn_b1 = zeros_param({config.attn_dim});
  params_.attn_w2 = uniform_tensor({ann, config.attn_dim}, rng, r);
  params_.attn_b2 = zeros_param({config.attn_dim});
  params_.attn_v = uniform_tensor({config.attn_dim, 1}, rng, r);
  params_.gru = GruParams::create(ann + config.tgt_embed_dim, config.dec_hidden, rng, r);
  params_.out_proj = uniform_tensor({config.dec_hidden, config.tgt_vocab}, rng, r);
  params_.out_bias = zeros_param({config.tgt_vocab});
  params_.init_proj = uniform_tensor({ann, config.dec_hidden}, rng, r);
  params_.init_bias = zeros_param({config.dec_hidden});
}

AttentionKeys Decoder::prepare_keys(const Annotations& e) const {
  const std::size_t B = e.batch, T = e.steps, C = 2 * e.hidden, A = params_.attn_w2.dim(1);
  const Tensor flat = reshape(e.states, {B * T, C});
  return AttentionKeys{reshape(add(matmul(flat, params_.attn_w2), params_.attn_b2), {B, T, A})};
}

Tensor Decoder::attention_scores(const Tensor& h_prev, const Annotations& e, const AttentionKeys& keys) const {
  if (e.steps == 0) throw std::invalid_argument("attention_scores: empty annotations");
  const std::size_t B = e.batch, T = e.steps, A = params_.attn_w1.dim(1);
  const Tensor query = reshape(add(matmul(h_prev, params_.attn_w1), params_.attn_b1), {B, 1, A});
  const Tensor hidden = tanh(add(keys.keys, query));
  return reshape(matmul(reshape(hidden, {B * T, A}), params_.attn_v), {B, T});
}

Tensor Decoder::attention_scores(const Tensor& h_prev, const Annotations& e) const {
  return attention_scores(h_prev, e, prepare_keys(e));
}

Tensor Decoder::attention_weights(const Tensor& scores, std::span<const std::uint8_t> mask) {
  return masked_softmax(scores, mask);
}

Tensor Decoder::context_vector(const Tensor& weights, const Annotations& e) { return weighted_sum(weights, e.states); }

DecodeState Decoder::init_state(const Annotations& e) const {
  if (e.steps == 0 || std::any_of(e.lengths.begin(), e.lengths.end(), [](std::size_t n) { return n == 0; })) {
    throw std::invalid_argument("init_state: every source sentence needs at least one token");
  }
  std::vector<std::size_t> last(e.batch), first(e.batch, 0);
  for (std::size_t b = 0; b < e.batch; ++b) last[b] = e.lengths[b] - 1;
  const Tensor fwd_last = slice(take_steps(e.states, last), 1, 0, e.hidden);
  const Tensor bwd_first = slice(take_steps(e.states, first), 1, e.hidden, e.hidden);
  DecodeState state;
  state.h = tanh(add(matmul(concat(fwd_last, bwd_first, 1), params_.init_proj), params_.init_bias));
  state.prev_tokens.assign(e.batch, Vocabulary::kBos);
  state.step = 0;
  return state;
}

std::pair<Tensor, Tensor> Decoder::advance(const Tensor& h_prev, std::span<const std::int64_t> prev_tokens,
                                           const Annotations& e, const AttentionKeys& keys) const {
  const Tensor weights = attention_weights(attention_scores(h_prev, e, keys), e.mask);
  const Tensor context = context_vector(weights, e);
  const Tensor prev = embedding_lookup(params_.tgt_emb, prev_tokens);
  return {gru_cell(params_.gru, concat(context, prev, 1), h_prev), weights};
}

StepOutput Decoder::decode_step(const DecodeState& state, const Annotations& e, const AttentionKeys& keys) const {
  auto [h, weights] = advance(state.h, state.prev_tokens, e, keys);
  StepOutput out;
  out.logits = add(matmul(h, params_.out_proj), params_.out_bias);
  out.dist = softmax(out.logits, 1);
  out.h = std::move(h);
  out.weights = std::move(weights);
  return out;
}

StepOutput Decoder::decode_step(const DecodeState& state, const Annotations& e) const {
  return decode_step(state, e, prepare_keys(e));
}

Tensor Decoder::teacher_forced_logits(const Batch& batch, const Annotations& e) const {
  if (batch.tgt_len < 2) throw std::invalid_argument("teacher_forced_logits: targets need BOS and EOS");
  const std::size_t B = batch.size, steps = batch.tgt_len - 1, H = params_.gru.hidden_size;
  const AttentionKeys keys = prepare_keys(e);
  Tensor h = init_state(e).h;
  std::vector<Tensor> states;
  states.reserve(steps);
  std::vector<std::int64_t> prev(B);
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t b = 0; b < B; ++b) prev[b] = batch.tgt_ids[b * batch.tgt_len + i];
    h = advance(h, prev, e, keys).first;
    states.push_back(h);
  }
  const Tensor all = reshape(concat(states, 1), {B * steps, H});
  const Tensor logits = add(matmul(all, params_.out_proj), params_.out_bias);
  return reshape(logits, {B, steps, params_.out_proj.dim(1)});
}

std::vector<std::vector<std::int64_t>> Decoder::greedy_decode(const Annotations& e, std::size_t max_len) const {
  if (max_len == 0) throw std::invalid_argument("greedy_decode: max_len must be at least 1");
  const AttentionKeys keys = prepare_keys(e);
  DecodeState state = init_state(e);
  std::vector<std::vector<std::int64_t>> out(e.batch);
  std::vector<bool> done(e.batch, false);
  const std::size_t V = params_.out_proj.dim(1);
  for (std::size_t step = 0; step < max_len; ++step) {
    auto [h, weights] = advance(state.h, state.prev_tokens, e, keys);
    const Tensor logits = add(matmul(h, params_.out_proj), params_.out_bias);
    const auto x = logits.data();
    bool all_done = true;
    for (std::size_t b = 0; b < e.batch; ++b) {
      const double* row = x.data() + b * V;
      const auto best = static_cast<std::int64_t>(std::max_element(row, row + V) - row);
      state.prev_tokens[b] = best;
      if (done[b]) continue;
      if (best == Vocabulary::kEos) {
        done[b] = true;
      } else {
        out[b].push_back(best);
      }
      all_done = all_done && done[b];
    }
    state.h = h;
    state.step = step + 1;
    if (all_done) break;
  }
  return out;
}

void Decoder::append_to(std::vector<NamedTensor>& out) const {
  out.push_back({"decoder.tgt_emb", params_.tgt_emb});
  out.push_back({"decoder.attn_w1", params_.attn_w1});
  out.push_back({"decoder.attn_b1", params_.attn_b1});
  out.push_back({"decoder.attn_w2", params_.attn_w2});
  out.push_back({"decoder.attn_b2", params_.attn_b2});
  out.push_back({"decoder.attn_v", params_.attn_v});
  params_.gru.append_to(out, "decoder.gru");
  out.push_back({"decoder.out_proj", params_.out_proj});
  out.push_back({"decoder.out_bias", params_.out_bias});
  out.push_back({"decoder.init_proj", params_.init_proj});
  out.push_back({"decoder.init_bias", params_.init_bias});
}

}  // namespace crnmt
