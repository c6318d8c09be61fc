#pragma once

// Parallel corpus ingestion: TSV reading, tokenization, vocabularies and
// padded mini-batches.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace crnmt {

using Tokens = std::vector<std::string>;

struct SentencePair {
  Tokens source;
  Tokens target;
};

struct LoadStats {
  std::size_t lines = 0;
  std::size_t skipped = 0;  // too few fields or empty after tokenization
};

/// Lowercase, NFC-normalize, split on whitespace, and emit every
/// punctuation character as its own token.
Tokens tokenize(std::string_view text);
std::string detokenize(const Tokens& tokens);

/// Reads `target<TAB>source[<TAB>attribution]` lines. With `swap_columns`
/// the first column is the source instead.
std::vector<SentencePair> load_tsv(const std::filesystem::path& path, bool swap_columns = false,
                                   LoadStats* stats = nullptr);

enum class Side { kSource, kTarget };

class Vocabulary {
 public:
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kBos = 1;
  static constexpr std::int64_t kEos = 2;
  static constexpr std::int64_t kUnk = 3;
  static constexpr std::size_t kNumReserved = 4;

  /// Only the reserved entries.
  Vocabulary();
  /// Rebuilds a vocabulary from its id-ordered token list; the first four
  /// entries must be the reserved tokens.
  explicit Vocabulary(std::vector<std::string> id_to_token);

  std::size_t size() const { return id_to_token_.size(); }
  bool contains(std::string_view token) const;
  std::int64_t id(std::string_view token) const;  // kUnk when absent
  const std::string& token(std::int64_t id) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  std::vector<std::int64_t> encode(const Tokens& tokens) const;
  Tokens decode(std::span<const std::int64_t> ids) const;

  static const std::vector<std::string>& reserved_tokens();

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int64_t> token_to_id_;
};

/// Most frequent first, ties broken by byte-wise token order. `max_size`
/// counts the reserved entries.
Vocabulary build_vocab(const std::vector<SentencePair>& pairs, Side side, std::size_t max_size,
                       std::size_t min_freq);

/// Row-major padded id matrices. Targets are BOS-prefixed and EOS-suffixed;
/// lengths count those markers.
struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<std::int64_t> src_ids;
  std::vector<std::size_t> src_lengths;
  std::vector<std::uint8_t> src_mask;
  std::vector<std::int64_t> tgt_ids;
  std::vector<std::size_t> tgt_lengths;
  std::vector<std::uint8_t> tgt_mask;
  std::vector<std::size_t> pair_index;  // position of each row in the input pair list
};

Batch make_batch(const std::vector<SentencePair>& pairs, std::span<const std::size_t> indices,
                 const Vocabulary& src_vocab, const Vocabulary& tgt_vocab);

/// Groups pairs of similar source length. Batch order is shuffled with
/// `shuffle_seed`; a short final batch, if any, comes last.
std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs, const Vocabulary& src_vocab,
                                const Vocabulary& tgt_vocab, std::size_t batch_size,
                                std::uint64_t shuffle_seed);

struct DatasetSplit {
  std::vector<SentencePair> train;
  std::vector<SentencePair> validation;
  std::vector<SentencePair> test;
};

/// Deterministic shuffled split. The test share is whatever the two
/// fractions leave, unless `test_size` > 0 pins it to an absolute count.
DatasetSplit split_dataset(const std::vector<SentencePair>& pairs, double train_frac, double val_frac,
                           std::uint64_t seed, std::size_t test_size = 0);

}  // namespace crnmt
