#include "hypomimia/rng.hpp"

#include <cmath>

namespace hypomimia {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t SeededRng::next_u64() {
  std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u is nudged away from 0 so log stays finite.
  double u = uniform();
  if (u <= 0.0) u = 0x1.0p-53;
  double v = uniform();
  double r = std::sqrt(-2.0 * std::log(u));
  double theta = 2.0 * 3.14159265358979323846 * v;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double SeededRng::normal(double mu, double sigma) {
  return mu + sigma * normal();
}

std::uint64_t SeededRng::below(std::uint64_t n) {
  // Rejection sampling over the largest multiple of n that fits in 64 bits
  // keeps the draw unbiased.
  std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

SeededRng SeededRng::fork(std::uint64_t salt) const {
  std::uint64_t mix = seed_;
  std::uint64_t a = splitmix64(mix);
  mix ^= salt;
  std::uint64_t b = splitmix64(mix);
  return SeededRng(a ^ rotl(b, 31) ^ salt);
}

}  // namespace hypomimia
