#pragma once

#include <cstdint>
#include <random>

namespace colldiff {

using Engine = std::mt19937_64;

// SplitMix64 finalizer. Used to turn (master seed, stream index) pairs into
// well-separated engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of substream `index` under `master`. Substreams are independent of
// the order in which they are consumed, so batch work can be scheduled on
// any number of threads and still reproduce bit-for-bit.
constexpr std::uint64_t substream_seed(std::uint64_t master,
                                       std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  Rng substream(std::uint64_t index) const {
    return Rng(substream_seed(seed_, index));
  }

  std::uint64_t seed() const { return seed_; }
  Engine& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  Engine engine_;
};

}  // namespace colldiff
