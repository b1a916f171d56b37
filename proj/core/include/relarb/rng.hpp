#pragma once

#include <cstdint>
#include <random>

namespace relarb {

// Purpose tags keep streams for different uses of the same path index apart.
enum class StreamPurpose : std::uint64_t {
  market_noise = 1,
  population = 2,
  projection = 3,
  fichera = 4,
  nash_node = 5,
  mf_node = 6,
  deviation = 7,
  sampling = 8,
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  StreamPurpose purpose = StreamPurpose::market_noise;
  std::uint64_t sub = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(const StreamKey& key) noexcept;

// One independent generator per (seed, index, purpose, sub) key. Streams do
// not depend on which thread consumes them.
class PathRng {
 public:
  explicit PathRng(const StreamKey& key);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace relarb
