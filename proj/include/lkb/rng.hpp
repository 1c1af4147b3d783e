#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lkb {

/// All randomness flows through 64-bit Mersenne Twister engines. Each
/// independent stream gets its own engine seeded by `derive_seed`, so adding
/// a consumer (a new algorithm, say) never shifts another consumer's draws.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed-splitting rule:
///   seed = splitmix64(splitmix64(master ^ fnv1a(tag)) + index)
/// `tag` names the stream ("graph", "pool", "truth", "rounds",
/// "policy/<algo>", ...), `index` is normally the trial number.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                          std::string_view tag);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline Rng make_rng(std::uint64_t master, std::uint64_t index,
                    std::string_view tag) {
  return Rng(derive_seed(master, index, tag));
}

}  // namespace lkb
