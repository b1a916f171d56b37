#include "relarb/rng.hpp"

namespace relarb {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(const StreamKey& key) noexcept {
  std::uint64_t h = splitmix64(key.seed);
  h = splitmix64(h ^ key.index);
  h = splitmix64(h ^ static_cast<std::uint64_t>(key.purpose));
  h = splitmix64(h ^ key.sub);
  return h;
}

PathRng::PathRng(const StreamKey& key) {
  const std::uint64_t s = derive_seed(key);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(key.index), static_cast<std::uint32_t>(key.sub)};
  engine_.seed(seq);
}

}  // namespace relarb
