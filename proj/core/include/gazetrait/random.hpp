#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace gazetrait {

using Rng = std::mt19937_64;

/// Independent stream keyed by e.g. (seed, fold, trait, purpose).
inline Rng make_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * keys.size());
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Stream purposes, so that seeds derived for different jobs never collide.
enum class Stream : std::uint64_t {
  FoldPlan = 1,
  Validation = 2,
  ModelInit = 3,
  Shuffle = 4,
  Dropout = 5,
  Forest = 6,
  Synth = 7,
};

inline std::uint64_t key(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace gazetrait
