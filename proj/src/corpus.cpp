#include "crnmt/corpus.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "crnmt/errors.hpp"
#include "crnmt/random.hpp"
#include "crnmt/tensor.hpp"

namespace crnmt {

namespace {

icu::UnicodeString nfc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString out = normalizer->normalize(s, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");
  return out;
}

std::string utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

Tokens tokenize(std::string_view text) {
  icu::UnicodeString u = nfc(icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size()))));
  u.toLower(icu::Locale::getRoot());
  u = nfc(u);

  Tokens tokens;
  icu::UnicodeString current;
  auto flush = [&] {
    if (!current.isEmpty()) {
      tokens.push_back(utf8(current));
      current.remove();
    }
  };
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    const UChar32 c = u.char32At(i);
    if (u_isUWhiteSpace(c)) {
      flush();
    } else if (u_ispunct(c)) {
      flush();
      tokens.push_back(utf8(icu::UnicodeString(c)));
    } else {
      current.append(c);
    }
  }
  flush();
  return tokens;
}

std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<SentencePair> load_tsv(const std::filesystem::path& path, bool swap_columns, LoadStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus file '" + path.string() + "'");
  std::vector<SentencePair> pairs;
  LoadStats local;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++local.lines;
    const auto fields = split_tabs(line);
    if (fields.size() < 2) {
      ++local.skipped;
      continue;
    }
    SentencePair pair;
    pair.target = tokenize(fields[swap_columns ? 1 : 0]);
    pair.source = tokenize(fields[swap_columns ? 0 : 1]);
    if (pair.source.empty() || pair.target.empty()) {
      ++local.skipped;
      continue;
    }
    pairs.push_back(std::move(pair));
  }
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  if (stats) *stats = local;
  if (pairs.empty()) {
    throw FormatError("corpus file '" + path.string() + "' has no usable tab-separated sentence pairs (" +
                      std::to_string(local.skipped) + " malformed lines)");
  }
  return pairs;
}

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> reserved{"<pad>", "<s>", "</s>", "<unk>"};
  return reserved;
}

Vocabulary::Vocabulary() : Vocabulary(reserved_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> id_to_token) : id_to_token_(std::move(id_to_token)) {
  const auto& reserved = reserved_tokens();
  if (id_to_token_.size() < kNumReserved || !std::equal(reserved.begin(), reserved.end(), id_to_token_.begin())) {
    throw FormatError("vocabulary must start with the reserved tokens <pad> <s> </s> <unk>");
  }
  token_to_id_.reserve(id_to_token_.size());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    if (!token_to_id_.emplace(id_to_token_[i], static_cast<std::int64_t>(i)).second) {
      throw FormatError("vocabulary lists token '" + id_to_token_[i] + "' twice");
    }
  }
}

bool Vocabulary::contains(std::string_view token) const { return token_to_id_.contains(std::string(token)); }

std::int64_t Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int64_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw IndexError("vocabulary id " + std::to_string(id) + " outside [0, " + std::to_string(size()) + ")");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<std::int64_t> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<std::int64_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Tokens Vocabulary::decode(std::span<const std::int64_t> ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(token(i));
  return out;
}

Vocabulary build_vocab(const std::vector<SentencePair>& pairs, Side side, std::size_t max_size, std::size_t min_freq) {
  if (max_size < Vocabulary::kNumReserved + 1) {
    throw std::invalid_argument("build_vocab: max_size must be at least 5, got " + std::to_string(max_size));
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& p : pairs) {
    for (const auto& t : side == Side::kSource ? p.source : p.target) ++counts[t];
  }
  const auto& reserved = Vocabulary::reserved_tokens();
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, count] : counts) {
    if (count < min_freq) continue;
    if (std::find(reserved.begin(), reserved.end(), token) != reserved.end()) continue;
    ranked.emplace_back(token, count);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = reserved;
  for (auto& [token, count] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(token);
  }
  return Vocabulary(std::move(tokens));
}

Batch make_batch(const std::vector<SentencePair>& pairs, std::span<const std::size_t> indices,
                 const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  Batch b;
  b.size = indices.size();
  for (auto i : indices) {
    b.src_len = std::max(b.src_len, pairs.at(i).source.size());
    b.tgt_len = std::max(b.tgt_len, pairs.at(i).target.size() + 2);
  }
  b.src_ids.assign(b.size * b.src_len, Vocabulary::kPad);
  b.src_mask.assign(b.size * b.src_len, 0);
  b.tgt_ids.assign(b.size * b.tgt_len, Vocabulary::kPad);
  b.tgt_mask.assign(b.size * b.tgt_len, 0);
  for (std::size_t row = 0; row < b.size; ++row) {
    const auto& pair = pairs[indices[row]];
    const auto src = src_vocab.encode(pair.source);
    for (std::size_t t = 0; t < src.size(); ++t) {
      b.src_ids[row * b.src_len + t] = src[t];
      b.src_mask[row * b.src_len + t] = 1;
    }
    b.src_lengths.push_back(src.size());
    auto tgt = tgt_vocab.encode(pair.target);
    tgt.insert(tgt.begin(), Vocabulary::kBos);
    tgt.push_back(Vocabulary::kEos);
    for (std::size_t t = 0; t < tgt.size(); ++t) {
      b.tgt_ids[row * b.tgt_len + t] = tgt[t];
      b.tgt_mask[row * b.tgt_len + t] = 1;
    }
    b.tgt_lengths.push_back(tgt.size());
    b.pair_index.push_back(indices[row]);
  }
  return b;
}

std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs, const Vocabulary& src_vocab,
                                const Vocabulary& tgt_vocab, std::size_t batch_size, std::uint64_t shuffle_seed) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be at least 1");
  Rng rng(shuffle_seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pairs[a].source.size() < pairs[b].source.size(); });

  std::vector<Batch> full;
  std::vector<Batch> partial;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    auto batch = make_batch(pairs, std::span(order).subspan(start, n), src_vocab, tgt_vocab);
    (n == batch_size ? full : partial).push_back(std::move(batch));
  }
  rng.shuffle(full);
  for (auto& b : partial) full.push_back(std::move(b));
  return full;
}

DatasetSplit split_dataset(const std::vector<SentencePair>& pairs, double train_frac, double val_frac,
                           std::uint64_t seed, std::size_t test_size) {
  if (!(train_frac > 0.0) || !(val_frac >= 0.0) || train_frac + val_frac > 1.0 + 1e-12) {
    throw ConfigError("split fractions must satisfy train > 0, validation >= 0, train + validation <= 1 (got " +
                      std::to_string(train_frac) + ", " + std::to_string(val_frac) + ")");
  }
  const std::size_t n = pairs.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_frac));
  std::size_t n_train = 0;
  if (test_size > 0) {
    if (test_size + n_val >= n) {
      throw ConfigError("test size " + std::to_string(test_size) + " leaves no training data in a corpus of " +
                        std::to_string(n) + " pairs");
    }
    n_train = n - n_val - test_size;
  } else {
    n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_frac)));
    n_val = std::min(n_val, n - n_train);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  DatasetSplit split;
  for (std::size_t k = 0; k < n; ++k) {
    auto& dst = k < n_train ? split.train : (k < n_train + n_val ? split.validation : split.test);
    dst.push_back(pairs[order[k]]);
  }
  return split;
}

}  // namespace crnmt
