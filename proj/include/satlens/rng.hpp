#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "satlens/error.hpp"
#include "satlens/matrix.hpp"

namespace satlens {

namespace detail {

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: the stream is a pure function of (seed, splits,
/// counter). There is no global state; identical construction gives an
/// identical stream on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(detail::mix64(seed ^ 0x5853656e734c6100ULL)) {}

  /// Derives an independent stream; child streams never collide with the
  /// parent's counter sequence.
  CounterRng split(std::uint64_t label) const {
    CounterRng child(0);
    child.key_ = detail::mix64(key_ ^ detail::mix64(label + 0x51ed270b2f6ea3f7ULL));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return detail::mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  /// Standard normal via Box-Muller; pairs are consumed from the counter
  /// stream so the sequence stays reproducible.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Random w-by-k matrix with orthonormal columns, deterministic in the seed.
/// Gaussian fill followed by two rounds of modified Gram-Schmidt; a column
/// that collapses during orthogonalization is redrawn from the same stream.
inline Matrix random_orthonormal_basis(std::size_t w, std::size_t k, std::uint64_t seed) {
  require(w >= 1 && k >= 1, ErrorKind::DimensionError, "basis dimensions must be positive");
  require(k <= w, ErrorKind::DimensionError,
          "requested basis dimension " + std::to_string(k) + " exceeds width " + std::to_string(w));

  CounterRng rng = CounterRng(seed).split(0x6f72746862617369ULL);
  Matrix b(w, k);
  for (std::size_t j = 0; j < k; ++j) {
    int attempts = 0;
    while (true) {
      for (std::size_t i = 0; i < w; ++i) b(i, j) = rng.next_normal();
      bool ok = true;
      for (int round = 0; round < 2; ++round) {
        for (std::size_t prev = 0; prev < j; ++prev) {
          double dot = 0.0;
          for (std::size_t i = 0; i < w; ++i) dot += b(i, j) * b(i, prev);
          for (std::size_t i = 0; i < w; ++i) b(i, j) -= dot * b(i, prev);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < w; ++i) norm += b(i, j) * b(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-8) {
          ok = false;
          break;
        }
        for (std::size_t i = 0; i < w; ++i) b(i, j) /= norm;
      }
      if (ok) break;
      require(++attempts < 64, ErrorKind::NoConvergence, "orthonormal basis generation stalled");
    }
  }
  return b;
}

}  // namespace satlens
