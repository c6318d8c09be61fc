#include "crnmt/encoder.hpp"

#include <algorithm>
#include <stdexcept>

#include "crnmt/errors.hpp"

namespace crnmt {

namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, double range) {
  Tensor t(std::move(shape), 0.0, true);
  for (auto& v : t.mutable_data()) v = rng.uniform(-range, range);
  return t;
}

Tensor zeros_param(Shape shape) { return Tensor(std::move(shape), 0.0, true); }

// [B x 1] column of 0/1 values for time step t.
Tensor step_mask(std::span<const std::size_t> lengths, std::size_t t, bool& all_on) {
  std::vector<double> m(lengths.size());
  all_on = true;
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    m[b] = t < lengths[b] ? 1.0 : 0.0;
    all_on = all_on && m[b] == 1.0;
  }
  return Tensor({lengths.size(), 1}, std::move(m));
}

struct GruWeights {
  Tensor zx, zh, rx, rh, hx, hh;
};

GruWeights split_weights(const GruParams& p) {
  const std::size_t in = p.input_size, H = p.hidden_size;
  return GruWeights{slice(p.w_z, 0, 0, in), slice(p.w_z, 0, in, H), slice(p.w_r, 0, 0, in),
                    slice(p.w_r, 0, in, H), slice(p.w_h, 0, 0, in), slice(p.w_h, 0, in, H)};
}

// One direction of the recurrence with the input projections hoisted out of
// the time loop. Returns per-step outputs (zero past each length) in time order.
std::vector<Tensor> run_direction(const GruParams& p, const Tensor& inputs, std::span<const std::size_t> lengths,
                                  bool reverse) {
  const std::size_t B = inputs.dim(0), T = inputs.dim(1), in = inputs.dim(2), H = p.hidden_size;
  const GruWeights w = split_weights(p);
  const Tensor flat = reshape(inputs, {B * T, in});
  const Tensor xz = reshape(add(matmul(flat, w.zx), p.b_z), {B, T, H});
  const Tensor xr = reshape(add(matmul(flat, w.rx), p.b_r), {B, T, H});
  const Tensor xh = reshape(add(matmul(flat, w.hx), p.b_h), {B, T, H});

  std::vector<Tensor> outputs(T);
  Tensor h(Shape{B, H}, 0.0);
  std::vector<std::size_t> idx(B);
  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t t = reverse ? T - 1 - k : k;
    std::fill(idx.begin(), idx.end(), t);
    const Tensor z = sigmoid(add(take_steps(xz, idx), matmul(h, w.zh)));
    const Tensor r = sigmoid(add(take_steps(xr, idx), matmul(h, w.rh)));
    const Tensor cand = tanh(add(take_steps(xh, idx), matmul(mul(r, h), w.hh)));
    const Tensor h_new = add(mul(affine(z, -1.0, 1.0), h), mul(z, cand));
    bool all_on = false;
    const Tensor m = step_mask(lengths, t, all_on);
    if (all_on) {
      h = h_new;
      outputs[t] = h_new;
    } else {
      outputs[t] = mul(m, h_new);
      h = add(outputs[t], mul(affine(m, -1.0, 1.0), h));
    }
  }
  return outputs;
}

Tensor stack_steps(const std::vector<Tensor>& steps) {
  const std::size_t B = steps.front().dim(0), C = steps.front().dim(1);
  return reshape(concat(steps, 1), {B, steps.size(), C});
}

}  // namespace

GruParams GruParams::create(std::size_t input_size, std::size_t hidden_size, Rng& rng, double init_range) {
  GruParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  const Shape w{input_size + hidden_size, hidden_size};
  p.w_z = uniform_tensor(w, rng, init_range);
  p.w_r = uniform_tensor(w, rng, init_range);
  p.w_h = uniform_tensor(w, rng, init_range);
  p.b_z = zeros_param({hidden_size});
  p.b_r = zeros_param({hidden_size});
  p.b_h = zeros_param({hidden_size});
  return p;
}

void GruParams::append_to(std::vector<NamedTensor>& out, const std::string& prefix) const {
  out.push_back({prefix + ".w_z", w_z});
  out.push_back({prefix + ".w_r", w_r});
  out.push_back({prefix + ".w_h", w_h});
  out.push_back({prefix + ".b_z", b_z});
  out.push_back({prefix + ".b_r", b_r});
  out.push_back({prefix + ".b_h", b_h});
}

Tensor gru_cell(const GruParams& p, const Tensor& x, const Tensor& h_prev) {
  const bool unbatched = x.rank() == 1;
  const Tensor xb = unbatched ? reshape(x, {1, x.numel()}) : x;
  const Tensor hb = unbatched ? reshape(h_prev, {1, h_prev.numel()}) : h_prev;
  if (xb.dim(1) != p.input_size || hb.dim(1) != p.hidden_size || xb.dim(0) != hb.dim(0)) {
    throw ShapeError("gru_cell: input " + to_string(x.shape()) + " / state " + to_string(h_prev.shape()) +
                     " do not match a GRU of input " + std::to_string(p.input_size) + " and hidden " +
                     std::to_string(p.hidden_size));
  }
  const Tensor xh = concat(xb, hb, 1);
  const Tensor z = sigmoid(add(matmul(xh, p.w_z), p.b_z));
  const Tensor r = sigmoid(add(matmul(xh, p.w_r), p.b_r));
  const Tensor cand = tanh(add(matmul(concat(xb, mul(r, hb), 1), p.w_h), p.b_h));
  const Tensor h = add(mul(affine(z, -1.0, 1.0), hb), mul(z, cand));
  return unbatched ? reshape(h, {p.hidden_size}) : h;
}

std::vector<std::uint8_t> lengths_to_mask(std::span<const std::size_t> lengths, std::size_t steps) {
  std::vector<std::uint8_t> mask(lengths.size() * steps, 0);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    for (std::size_t t = 0; t < std::min(lengths[b], steps); ++t) mask[b * steps + t] = 1;
  }
  return mask;
}

Encoder::Encoder(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t d = config.embed_dim;
  const double r = config.init_range;
  params_.word_emb = uniform_tensor({config.src_vocab, d}, rng, r);
  if (config.position_embedding) {
    params_.pos_emb = uniform_tensor({config.max_positions, d}, rng, r);
  } else {
    params_.pos_emb = Tensor({config.max_positions, d}, 0.0, false);
  }
  for (std::size_t l = 0; l < config.conv_layers; ++l) {
    ConvLayer layer;
    layer.kernel = uniform_tensor({config.conv_width, d, d}, rng, r);
    layer.bias = zeros_param({d});
    params_.conv.push_back(std::move(layer));
  }
  params_.ln_gain = Tensor({d}, 1.0, true);
  params_.ln_bias = zeros_param({d});
  params_.gru_fwd = GruParams::create(d, config.enc_hidden, rng, r);
  params_.gru_bwd = GruParams::create(d, config.enc_hidden, rng, r);
}

Tensor Encoder::embed(std::span<const std::int64_t> ids, std::size_t batch, std::size_t steps) const {
  if (ids.size() != batch * steps) {
    throw ShapeError("embed: " + std::to_string(ids.size()) + " ids for a " + std::to_string(batch) + "x" +
                     std::to_string(steps) + " batch");
  }
  const std::size_t limit = params_.pos_emb.dim(0);
  if (steps > limit) {
    throw std::length_error("source sentence of " + std::to_string(steps) +
                            " tokens exceeds the position-embedding limit of " + std::to_string(limit));
  }
  const std::size_t d = params_.word_emb.dim(1);
  const Tensor words = reshape(embedding_lookup(params_.word_emb, ids), {batch, steps, d});
  return add(words, slice(params_.pos_emb, 0, 0, steps));
}

Tensor Encoder::conv_stack(const Tensor& embedded, std::span<const std::uint8_t> mask) const {
  if (embedded.rank() != 3) throw ShapeError("conv_stack: expected [B x T x d], got " + to_string(embedded.shape()));
  const std::size_t B = embedded.dim(0), T = embedded.dim(1);
  if (mask.size() != B * T) throw ShapeError("conv_stack: mask size does not match input");
  const bool all_on = std::all_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
  Tensor mask_t;
  if (!all_on) {
    std::vector<double> m(mask.begin(), mask.end());
    mask_t = Tensor({B, T, 1}, std::move(m));
  }
  Tensor x = embedded;
  for (const auto& layer : params_.conv) {
    const Tensor input = all_on ? x : mul(x, mask_t);
    x = add(tanh(conv1d(input, layer.kernel, layer.bias)), x);
  }
  return x;
}

Tensor Encoder::residual_layernorm(const Tensor& conv_out, const Tensor& embedded) const {
  if (conv_out.shape() != embedded.shape()) {
    throw ShapeError("residual_layernorm: " + to_string(conv_out.shape()) + " vs " + to_string(embedded.shape()));
  }
  return layer_norm(add(conv_out, embedded), params_.ln_gain, params_.ln_bias, config_.layer_norm_eps);
}

Annotations Encoder::bigru_encode(const Tensor& inputs, std::span<const std::size_t> lengths) const {
  if (inputs.rank() != 3 || lengths.size() != inputs.dim(0)) {
    throw ShapeError("bigru_encode: expected [B x T x d] input and B lengths");
  }
  const std::size_t B = inputs.dim(0), T = inputs.dim(1);
  for (auto len : lengths) {
    if (len > T) throw ShapeError("bigru_encode: length " + std::to_string(len) + " exceeds " + std::to_string(T));
  }
  Annotations out;
  out.batch = B;
  out.steps = T;
  out.hidden = params_.gru_fwd.hidden_size;
  out.lengths.assign(lengths.begin(), lengths.end());
  out.mask = lengths_to_mask(lengths, T);
  if (T == 0) {
    out.states = Tensor({B, 0, 2 * out.hidden}, 0.0);
    return out;
  }
  const auto fwd = run_direction(params_.gru_fwd, inputs, lengths, false);
  const auto bwd = run_direction(params_.gru_bwd, inputs, lengths, true);
  out.states = concat(stack_steps(fwd), stack_steps(bwd), 2);
  return out;
}

Annotations Encoder::encode(std::span<const std::int64_t> ids, std::span<const std::size_t> lengths,
                            std::size_t batch, std::size_t steps) const {
  const Tensor a = embed(ids, batch, steps);
  const auto mask = lengths_to_mask(lengths, steps);
  const Tensor c = conv_stack(a, mask);
  return bigru_encode(residual_layernorm(c, a), lengths);
}

Annotations Encoder::encode(const Batch& batch) const {
  return encode(batch.src_ids, batch.src_lengths, batch.size, batch.src_len);
}

void Encoder::append_to(std::vector<NamedTensor>& out) const {
  out.push_back({"encoder.word_emb", params_.word_emb});
  out.push_back({"encoder.pos_emb", params_.pos_emb});
  for (std::size_t l = 0; l < params_.conv.size(); ++l) {
    const std::string p = "encoder.conv" + std::to_string(l);
    out.push_back({p + ".kernel", params_.conv[l].kernel});
    out.push_back({p + ".bias", params_.conv[l].bias});
  }
  out.push_back({"encoder.ln_gain", params_.ln_gain});
  out.push_back({"encoder.ln_bias", params_.ln_bias});
  params_.gru_fwd.append_to(out, "encoder.gru_fwd");
  params_.gru_bwd.append_to(out, "encoder.gru_bwd");
}

}  // namespace crnmt
