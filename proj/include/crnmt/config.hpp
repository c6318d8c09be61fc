#pragma once

// Run configuration: every tunable of the pipeline as a typed field, plus a
// flat `key = value` view used by config files, command-line flags,
// checkpoint manifests and the startup echo.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crnmt/model_config.hpp"
#include "crnmt/training.hpp"

namespace crnmt {

struct RunConfig {
  std::string preset = "paper";

  // corpus
  bool swap_columns = false;
  std::size_t src_vocab_size = 20000;
  std::size_t tgt_vocab_size = 20000;
  std::size_t min_freq = 2;
  std::size_t max_sentence_len = 100;  // longer training pairs are dropped
  double train_frac = 0.90;
  std::size_t test_size = 3900;  // >0 pins the test split to an absolute size

  ModelConfig model;
  TrainConfig train;
  std::size_t max_decode_len = 50;

  /// Resets every field to the named preset ("paper" or "tiny").
  void apply_preset(std::string_view name);
  /// Sets one field from its textual form; throws ConfigError on unknown
  /// keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  /// Key-value pairs in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string describe() const;

  /// The model architecture with the training-level depth and position
  /// embedding switch folded in.
  ModelConfig model_config() const;

  void validate() const;

  static const std::vector<std::string>& keys();
};

/// Parses `key = value` lines; `#` starts a comment.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

}  // namespace crnmt
