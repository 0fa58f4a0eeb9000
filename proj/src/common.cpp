// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace vqamix {

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t seed, std::string_view label) {
  return splitmix64(seed ^ fnv1a64(label));
}

uint64_t derive_seed(uint64_t seed, std::string_view label, uint64_t index) {
  return splitmix64(derive_seed(seed, label) ^ splitmix64(index + 0x9e3779b97f4a7c15ull));
}

double Rng::normal(double mean, double stddev) {
  // u1 in (0,1] so log() is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

std::vector<int> Rng::sample_indices(int n, int k) {
  if (k > n) throw NumericError("sample_indices: k > n");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(u64() % static_cast<uint64_t>(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string spell_number(int n) {
  static const std::array<const char*, 21> words = {
      "zero", "one",  "two",  "three",  "four",     "five",    "six",
      "seven", "eight", "nine", "ten",   "eleven",   "twelve",  "thirteen",
      "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty"};
  if (n < 0 || n >= static_cast<int>(words.size()))
    throw DataError("spell_number: out of range: " + std::to_string(n));
  return words[static_cast<size_t>(n)];
}

}  // namespace vqamix
