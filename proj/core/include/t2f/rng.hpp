#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace t2f {

// xoshiro256** with splitmix64 seeding. Self-contained so that every draw is
// reproducible across compilers and platforms; the four-word state also makes
// checkpointed RNG state trivial to serialize. Standard-library engines are
// portable but their distributions are not, so the uniform/normal transforms
// live here too.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Independent stream for a named purpose and index, so consumers such as the
  // trainer can reconstruct any draw from (seed, purpose, index) alone without
  // replaying history.
  static Rng derive(std::uint64_t seed, std::string_view purpose,
                    std::uint64_t index) {
    std::uint64_t x = seed;
    for (char c : purpose) {
      x ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      (void)splitmix64(x);
    }
    x ^= index * 0x2545f4914f6cdd1dull;
    return Rng(splitmix64(x));
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t v, int k) {
      return (v << k) | (v >> (64 - k));
    };
    std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Index in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller. Both values of the pair are computed and the second is
  // discarded: a fixed two-draws-per-sample cost keeps the state a pure
  // function of the draw count, which checkpoint resume relies on.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  const std::array<std::uint64_t, 4>& state() const { return state_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

 private:
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace t2f
