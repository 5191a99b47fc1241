#pragma once

#include <cstdint>
#include <random>

namespace cfkt {

// Deterministic RNG helpers. std::uniform_real_distribution is
// implementation-defined, and seeds must reproduce datasets and splits
// bit-for-bit across builds, so the few draws we need are derived from the
// raw 64-bit stream directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0; modulo bias is irrelevant at
  /// the vocabulary sizes used here but we reject via rejection sampling
  /// anyway to keep draws exact.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

  int index(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Derive an independent child stream; used to give each component
  /// (init, shuffling, dropout, data synthesis) its own seed from one master.
  Rng fork() { return Rng(gen_() ^ 0x9e3779b97f4a7c15ull); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cfkt
