#include "socialrec/rng.hpp"

namespace socialrec {

std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

Rng make_rng(std::uint64_t root_seed, std::string_view stream, std::uint64_t index) {
  const std::uint64_t name = fnv1a(stream);
  std::seed_seq seq{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32),
                    static_cast<std::uint32_t>(name), static_cast<std::uint32_t>(name >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

}  // namespace socialrec
