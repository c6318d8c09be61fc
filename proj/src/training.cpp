#include "crnmt/training.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "crnmt/errors.hpp"

namespace crnmt {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(adadelta_lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adadelta_eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  if (conv_layers < 1 || conv_layers > 5) {
    throw ConfigError("conv_layers must be between 1 and 5, got " + std::to_string(conv_layers));
  }
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("grad_clip must be positive");
  if (!(val_frac >= 0.0 && val_frac < 1.0)) throw ConfigError("val_frac must lie in [0, 1)");
  if (patience == 0) throw ConfigError("patience must be positive");
}

void adadelta_step(std::span<double> param, std::span<const double> grad, AdadeltaSlot& slot, double lr,
                   double rho, double eps) {
  if (grad.size() != param.size()) throw ShapeError("adadelta_step: gradient size does not match parameter");
  if (slot.sq_grad.size() != param.size()) slot.sq_grad.assign(param.size(), 0.0);
  if (slot.sq_update.size() != param.size()) slot.sq_update.assign(param.size(), 0.0);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    slot.sq_grad[i] = rho * slot.sq_grad[i] + (1.0 - rho) * g * g;
    const double dx = -(std::sqrt(slot.sq_update[i] + eps) / std::sqrt(slot.sq_grad[i] + eps)) * g;
    slot.sq_update[i] = rho * slot.sq_update[i] + (1.0 - rho) * dx * dx;
    param[i] += lr * dx;
  }
}

AdadeltaState::AdadeltaState(const std::vector<NamedTensor>& params) {
  slots_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    slots_[i].sq_grad.assign(params[i].tensor.numel(), 0.0);
    slots_[i].sq_update.assign(params[i].tensor.numel(), 0.0);
  }
}

void AdadeltaState::step(std::vector<NamedTensor>& params, double lr, double rho, double eps) {
  if (slots_.size() != params.size()) throw std::logic_error("AdadeltaState: parameter list changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i].tensor;
    const auto g = t.grad();
    adadelta_step(t.mutable_data(), g, slots_[i], lr, rho, eps);
  }
}

double global_grad_norm(const std::vector<NamedTensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_gradients(std::vector<NamedTensor>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (auto& g : p.tensor.mutable_grad()) g *= factor;
  }
  return factor;
}

EpochStats train_epoch(Model& model, const std::vector<Batch>& batches, const TrainConfig& config,
                       AdadeltaState& state) {
  auto params = model.trainable_parameters();
  Tape& tape = Tape::current();
  double weighted = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    tape.clear();
    const Tensor loss = model.batch_loss(batches[i]);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      tape.clear();
      std::ostringstream os;
      os << "non-finite training loss " << value << " at batch " << i;
      throw NumericalError(os.str());
    }
    backward(loss);
    clip_gradients(params, config.grad_clip_norm);
    state.step(params, config.adadelta_lr, config.adadelta_rho, config.adadelta_eps);
    model.zero_grad();
    const std::size_t n = Model::target_tokens(batches[i]);
    weighted += value * static_cast<double>(n);
    tokens += n;
  }
  tape.clear();
  return EpochStats{tokens ? weighted / static_cast<double>(tokens) : 0.0, tokens};
}

double validate(const Model& model, const std::vector<Batch>& batches) {
  NoGradGuard no_grad;
  double weighted = 0.0;
  std::size_t tokens = 0;
  for (const auto& b : batches) {
    const std::size_t n = Model::target_tokens(b);
    weighted += model.batch_loss(b).item() * static_cast<double>(n);
    tokens += n;
  }
  return tokens ? weighted / static_cast<double>(tokens) : std::numeric_limits<double>::quiet_NaN();
}

FitResult fit(Model& model, const std::vector<SentencePair>& train, const std::vector<SentencePair>& validation,
              const TrainConfig& config, const FitCallbacks& callbacks) {
  config.validate();
  if (train.empty()) throw DataError("no training pairs");
  auto params = model.trainable_parameters();
  AdadeltaState state(params);
  const auto val_batches =
      make_batches(validation, model.src_vocab(), model.tgt_vocab(), config.batch_size, config.seed);

  FitResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_values;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(train, model.src_vocab(), model.tgt_vocab(), config.batch_size,
                                      config.seed + epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_epoch(model, batches, config, state).mean_loss;
    rec.val_loss = validation.empty() ? std::numeric_limits<double>::quiet_NaN() : validate(model, val_batches);
    const double monitored = validation.empty() ? rec.train_loss : rec.val_loss;
    rec.improved = monitored < result.best_loss;
    if (rec.improved) {
      result.best_loss = monitored;
      result.best_epoch = epoch;
      since_best = 0;
      best_values.clear();
      for (const auto& p : params) best_values.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    } else {
      ++since_best;
    }
    result.history.push_back(rec);
    if (callbacks.on_epoch) callbacks.on_epoch(rec);
    if (rec.improved && callbacks.on_improved) callbacks.on_improved(model, rec);
    if (!validation.empty() && since_best >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  if (!best_values.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto dst = params[i].tensor.mutable_data();
      std::copy(best_values[i].begin(), best_values[i].end(), dst.begin());
    }
  }
  return result;
}

}  // namespace crnmt
