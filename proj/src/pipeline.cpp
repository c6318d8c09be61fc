#include "crnmt/pipeline.hpp"

#include <algorithm>

#include "crnmt/errors.hpp"

namespace crnmt {

PreparedData prepare_data(const std::vector<SentencePair>& pairs, const RunConfig& config, const LogFn& log) {
  config.validate();
  std::vector<SentencePair> kept;
  kept.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.source.size() <= config.max_sentence_len && p.target.size() <= config.max_sentence_len) kept.push_back(p);
  }
  PreparedData data;
  data.dropped_long = pairs.size() - kept.size();
  if (kept.empty()) throw DataError("no sentence pairs within max_sentence_len " + std::to_string(config.max_sentence_len));

  std::size_t test_size = config.test_size;
  if (test_size > 0 && 2 * (test_size + static_cast<std::size_t>(config.train.val_frac * kept.size())) > kept.size()) {
    if (log) {
      log("test_size " + std::to_string(test_size) + " is too large for " + std::to_string(kept.size()) +
          " pairs; splitting by fractions instead");
    }
    test_size = 0;
  }
  data.split = split_dataset(kept, config.train_frac, config.train.val_frac, config.train.seed, test_size);
  data.src_vocab = build_vocab(data.split.train, Side::kSource, config.src_vocab_size, config.min_freq);
  data.tgt_vocab = build_vocab(data.split.train, Side::kTarget, config.tgt_vocab_size, config.min_freq);
  if (log) {
    log("pairs: " + std::to_string(data.split.train.size()) + " train / " + std::to_string(data.split.validation.size()) +
        " validation / " + std::to_string(data.split.test.size()) + " test (" + std::to_string(data.dropped_long) +
        " dropped as too long); vocabularies: " + std::to_string(data.src_vocab.size()) + " source, " +
        std::to_string(data.tgt_vocab.size()) + " target");
  }
  return data;
}

TrainedModel train_model(const PreparedData& data, const RunConfig& config, const FitCallbacks& callbacks) {
  config.validate();
  Model model(config.model_config(), data.src_vocab, data.tgt_vocab, config.train.seed);
  FitResult result = fit(model, data.split.train, data.split.validation, config.train, callbacks);
  return TrainedModel{std::move(model), std::move(result)};
}

}  // namespace crnmt
