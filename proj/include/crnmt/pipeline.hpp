#pragma once

#include <functional>
#include <string>
#include <vector>

#include "crnmt/config.hpp"
#include "crnmt/corpus.hpp"
#include "crnmt/model.hpp"
#include "crnmt/training.hpp"

namespace crnmt {

using LogFn = std::function<void(const std::string&)>;

struct PreparedData {
  DatasetSplit split;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  std::size_t dropped_long = 0;
};

/// Drops pairs longer than max_sentence_len, splits with the run seed and
/// builds both vocabularies from the training split.
PreparedData prepare_data(const std::vector<SentencePair>& pairs, const RunConfig& config, const LogFn& log = {});

struct TrainedModel {
  Model model;
  FitResult fit;
};

TrainedModel train_model(const PreparedData& data, const RunConfig& config, const FitCallbacks& callbacks = {});

}  // namespace crnmt
