#pragma once

// Template-grammar German->English pairs with verb-second inversion,
// verb-final subordinate clauses and case-marked articles, so word order
// differs between the two sides.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace crnmt::testing {

struct SyntheticPair {
  std::string english;
  std::string german;
};

/// `count` distinct pairs, deterministic in `seed`.
std::vector<SyntheticPair> synthetic_pairs(std::size_t count, std::uint64_t seed);

/// Writes `english<TAB>german` lines.
void write_synthetic_tsv(const std::filesystem::path& path, std::size_t count, std::uint64_t seed);

}  // namespace crnmt::testing
