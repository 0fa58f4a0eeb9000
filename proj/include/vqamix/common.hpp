// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vqamix {

// Error taxonomy. The CLI maps these to categorized exit codes.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};
struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};
// Shape/contract violations in the numerical engine.
struct DimensionError : NumericError {
  explicit DimensionError(const std::string& m) : NumericError(m) {}
};

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);
inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), seed);
}

uint64_t splitmix64(uint64_t x);

// Derive an independent stream seed from (seed, label). Pure.
uint64_t derive_seed(uint64_t seed, std::string_view label);
uint64_t derive_seed(uint64_t seed, std::string_view label, uint64_t index);

// Deterministic RNG. All value mappings are implemented here rather than via
// std distributions so streams are stable across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t u64() { return engine_(); }

  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw NumericError("uniform_int: empty range");
    uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    return lo + static_cast<int>(u64() % span);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; one fresh draw per call keeps replay simple.
  double normal(double mean = 0.0, double stddev = 1.0);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = u64() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    if (v.empty()) throw NumericError("pick: empty vector");
    return v[u64() % v.size()];
  }

  // k distinct indices from [0, n), ascending.
  std::vector<int> sample_indices(int n, int k);

  Rng fork(std::string_view label) { return Rng(derive_seed(u64(), label)); }

 private:
  std::mt19937_64 engine_;
};

std::string spell_number(int n);  // 0..20, used for count answers

}  // namespace vqamix
