#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mscal {

// Seeded random stream with portable transforms.  std::mt19937_64 output is
// fully specified by the standard; the distribution transforms here are our
// own (the std:: ones are implementation-defined), so identical seeds give
// identical draws on every platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t integer() { return gen_(); }

  // uniform on [0, 1)
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller, one cached mate
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = double((gen_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(6.283185307179586476925287 * u2);
    has_spare_ = true;
    return r * std::cos(6.283185307179586476925287 * u2);
  }

  // derived stream, independent of draws taken from this one so far
  RandomStream split() { return RandomStream(mix(seed_, ++splits_)); }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_, splits_ = 0;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mscal
