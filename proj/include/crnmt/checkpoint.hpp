#pragma once

// Checkpoint directory layout:
//
//   manifest    UTF-8 text. Header lines are `key<TAB>value`: magic,
//               format_version, config.<key> for every run setting, the
//               vocabulary file names, epoch and best_val_loss. Then one
//               line per parameter: `name<TAB>f32<TAB>d1,d2,...<TAB>offset`.
//   params.bin  Row-major little-endian float32 arrays, back to back, at the
//               byte offsets listed in the manifest.
//   vocab.src   One token per line; line number (from 0) is the id.
//   vocab.tgt

#include <filesystem>
#include <string>
#include <vector>

#include "crnmt/config.hpp"
#include "crnmt/errors.hpp"
#include "crnmt/model.hpp"

namespace crnmt {

inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointInfo {
  RunConfig config;
  std::size_t epoch = 0;
  double best_val_loss = 0.0;
};

struct ManifestEntry {
  std::string name;
  std::string dtype;
  Shape shape;
  std::size_t offset = 0;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

void save_checkpoint(const Model& model, const CheckpointInfo& info, const std::filesystem::path& dir);

struct LoadedCheckpoint {
  Model model;
  CheckpointInfo info;
  std::vector<ManifestEntry> manifest;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

/// Parameter lines of a manifest, validated for layout but not against a model.
std::vector<ManifestEntry> read_manifest_entries(const std::filesystem::path& dir);

}  // namespace crnmt
