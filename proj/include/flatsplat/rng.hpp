#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace flatsplat {

using Rng = std::mt19937_64;

// Independent generator for a named sub-stream of one experiment seed, so that
// e.g. the "init" stream is unaffected by how many draws "dataset" made.
inline Rng make_stream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

}  // namespace flatsplat
