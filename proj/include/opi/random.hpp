#pragma once

#include <cstdint>
#include <random>

namespace opi {

using Rng = std::mt19937_64;

/// Independent generator for a named sub-stream of a run seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

// Stream ids. Predictors take kPredictorStream + bank position.
inline constexpr std::uint64_t kAgentInitStream = 1;
inline constexpr std::uint64_t kAgentPolicyStream = 2;
inline constexpr std::uint64_t kAgentReplayStream = 3;
inline constexpr std::uint64_t kSeriesStream = 4;
inline constexpr std::uint64_t kPredictorStream = 1000;

}  // namespace opi
