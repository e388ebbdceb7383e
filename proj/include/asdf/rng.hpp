#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "asdf/common.hpp"
#include "asdf/vec3.hpp"

namespace asdf {

// Deterministic RNG wrapper. All stochastic steps in the project draw from a
// Rng derived from (seed, path...), so results are reproducible regardless of
// thread scheduling and standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Child stream for a labelled subtask, e.g. derive(seed, {kCodes, n}).
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = hash_mix(0x9e3779b97f4a7c15ULL, seed);
    for (std::uint64_t v : path) h = hash_mix(h, v);
    return Rng(h);
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1. Rejection-free modulo is fine here:
  // n is tiny relative to 2^64, bias is unobservable at our sample counts.
  std::uint64_t uniform_index(std::uint64_t n) { return eng_() % n; }

  // Standard normal via Box-Muller (two uniforms per draw, no caching).
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  Vec3 gaussian_vec3(double stddev) {
    return {gaussian() * stddev, gaussian() * stddev, gaussian() * stddev};
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // First k entries of a random permutation of [0, n): partial Fisher-Yates.
  std::vector<int> sample_without_replacement(int n, int k, std::vector<int>* scratch = nullptr) {
    std::vector<int> local;
    std::vector<int>& idx = scratch ? *scratch : local;
    idx.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    k = std::min(k, n);
    std::vector<int> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      std::size_t j = static_cast<std::size_t>(i) + uniform_index(static_cast<std::uint64_t>(n - i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
      out[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i)];
    }
    return out;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace asdf
