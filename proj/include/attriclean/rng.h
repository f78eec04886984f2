#ifndef ATTRICLEAN_RNG_H
#define ATTRICLEAN_RNG_H

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace attriclean {

// Deterministic random numbers with no dependence on the standard library's
// unspecified distribution algorithms, so streams are identical across
// compilers and platforms. splitmix64 core, Box-Muller for normals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be >= 1.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  double normal() {
    // Box-Muller; discard the second deviate to keep the stream simple.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Derives an independent child seed from (seed, stream index). Used to split
// a master seed into per-song / per-target / per-stage seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (0x517cc1b727220a95ULL * (stream + 1)));
  return r.next_u64();
}

inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
  // FNV-1a over the tag, then mix with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return derive_seed(seed, h);
}

}  // namespace attriclean

#endif  // ATTRICLEAN_RNG_H
