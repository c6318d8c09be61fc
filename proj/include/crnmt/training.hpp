#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "crnmt/corpus.hpp"
#include "crnmt/model.hpp"

namespace crnmt {

struct TrainConfig {
  std::size_t batch_size = 128;
  double adadelta_lr = 0.1;
  double adadelta_eps = 1e-6;
  double adadelta_rho = 0.95;
  std::size_t conv_layers = 3;
  bool position_embedding = true;
  std::size_t epochs = 30;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 1;
  double val_frac = 0.05;
  std::size_t patience = 5;

  void validate() const;
};

/// Running averages E[g^2] and E[dx^2] for one parameter array.
struct AdadeltaSlot {
  std::vector<double> sq_grad;
  std::vector<double> sq_update;
};

/// One Adadelta update of `param` in place:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   dx       = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
///   x       <- x + lr dx
void adadelta_step(std::span<double> param, std::span<const double> grad, AdadeltaSlot& slot, double lr,
                   double rho, double eps);

class AdadeltaState {
 public:
  AdadeltaState() = default;
  explicit AdadeltaState(const std::vector<NamedTensor>& params);

  /// Applies one update to every parameter using its accumulated gradient.
  void step(std::vector<NamedTensor>& params, double lr, double rho, double eps);
  const std::vector<AdadeltaSlot>& slots() const { return slots_; }

 private:
  std::vector<AdadeltaSlot> slots_;
};

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the factor applied (1 when untouched).
double clip_gradients(std::vector<NamedTensor>& params, double max_norm);
double global_grad_norm(const std::vector<NamedTensor>& params);

struct EpochStats {
  double mean_loss = 0.0;  // per target token
  std::size_t tokens = 0;
};

EpochStats train_epoch(Model& model, const std::vector<Batch>& batches, const TrainConfig& config,
                       AdadeltaState& state);

/// Forward-only masked NLL per target token.
double validate(const Model& model, const std::vector<Batch>& batches);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation data
  bool improved = false;
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_loss = 0.0;  // validation loss, or training loss without validation data
  bool early_stopped = false;
};

struct FitCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Called after an epoch that improved the monitored loss, between
  /// optimizer steps, while the model holds the improved parameters.
  std::function<void(const Model&, const EpochRecord&)> on_improved;
};

/// Trains for up to config.epochs, stopping after `patience` epochs without
/// validation improvement, and leaves the best parameters in `model`.
FitResult fit(Model& model, const std::vector<SentencePair>& train, const std::vector<SentencePair>& validation,
              const TrainConfig& config, const FitCallbacks& callbacks = {});

}  // namespace crnmt
