#pragma once

#include <cstdint>
#include <random>

namespace gqstn {

// All randomness in the project flows through this wrapper.
// Generator: std::mt19937_64 (standardized output sequence), with
// per-index substreams derived via splitmix64. Identifier recorded in
// dataset sidecars: "mt19937_64+splitmix64/v1".
inline constexpr const char* kRngId = "mt19937_64+splitmix64/v1";

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Substream seed for (root, index); used for per-scene / per-op streams.
inline uint64_t derive_seed(uint64_t root, uint64_t index) {
  return splitmix64(root ^ splitmix64(index + 1));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive. Modulo bias is negligible at
  // desk-scale ranges and keeps the draw count fixed.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + int64_t(gen_() % uint64_t(hi - lo + 1));
  }

  // Box-Muller; draws two uniforms per call, second value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gqstn
