#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "crnmt/config.hpp"
#include "crnmt/corpus.hpp"
#include "crnmt/model.hpp"
#include "crnmt/pipeline.hpp"

namespace crnmt {

/// Corpus-level BLEU-4 against a single reference per hypothesis.
struct BleuReport {
  double bleu = 0.0;  // 0..100
  std::array<double, 4> precisions{};
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  std::string to_text() const;
  static std::string csv_header();
  std::string csv_fields() const;
};

/// Clipped n-gram precisions summed over the corpus, geometric mean over
/// orders 1-4, brevity penalty min(1, exp(1 - r/h)). A zero precision is
/// floored at 1 / (2 * hypothesis n-gram count).
BleuReport bleu_corpus(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references);

/// Tokenizes each line, translates greedily and returns target tokens.
std::vector<Tokens> translate_corpus(const Model& model, const std::vector<std::string>& sources,
                                     std::size_t max_len);

/// Translates the sources of `pairs` and scores them against the targets.
BleuReport evaluate_pairs(const Model& model, const std::vector<SentencePair>& pairs, std::size_t max_len);

struct AblationOptions {
  std::vector<std::size_t> depths{1, 2, 3, 4, 5};
  std::vector<bool> position_embedding{true, false};
  std::vector<std::uint64_t> seeds;  // training seeds; empty means the config's seed
};

struct AblationRow {
  std::size_t conv_layers = 0;
  bool position_embedding = true;
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double val_loss = 0.0;
  BleuReport test;
  std::vector<std::pair<std::string, std::string>> config;  // effective settings of the run
};

/// Trains one model per (depth, position embedding, seed) on a split shared
/// by every run, reporting best validation loss and test BLEU.
std::vector<AblationRow> ablation_sweep(const std::vector<SentencePair>& corpus, const AblationOptions& options,
                                        const RunConfig& base, const LogFn& log = {});

std::string format_ablation_table(const std::vector<AblationRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace crnmt
