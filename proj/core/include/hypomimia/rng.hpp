#pragma once

#include <cstdint>
#include <vector>

namespace hypomimia {

/// xoshiro256++ generator seeded through splitmix64. The sequence depends
/// only on the seed, never on platform or standard-library internals, so
/// identical seeds reproduce identical runs everywhere.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; the spare draw is cached.
  double normal();
  double normal(double mu, double sigma);

  // Unbiased integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Fisher-Yates shuffle, descending index order.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // Independent stream derived from this generator's seed and a salt;
  // forking does not advance this generator.
  SeededRng fork(std::uint64_t salt) const;

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hypomimia
