#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace al4rag {

/// Name recorded in run manifests.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64/lemire-bounded/fisher-yates-v1";

/// mt19937_64 with portable bounded draws (no std distributions).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  // Uniform double in [0, 1) built from the top 53 bits.
  double unit();

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Seeded uniform permutation of [0, n).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace al4rag
