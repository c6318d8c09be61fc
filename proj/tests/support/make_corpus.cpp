// Writes the synthetic parallel corpus used by the ablation acceptance run.
#include <cstdlib>
#include <iostream>

#include "synthetic_corpus.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_corpus OUT.tsv [count] [seed]\n";
    return 1;
  }
  const std::size_t count = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 5000;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 7;
  crnmt::testing::write_synthetic_tsv(argv[1], count, seed);
  return 0;
}
