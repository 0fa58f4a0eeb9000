// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqamix/common.hpp"

namespace vqamix {

// Lowercase, split out .,!?;: as their own tokens, split on whitespace, then
// drop trailing punctuation tokens. This is the one normalization used by
// encoding and by exact-match scoring, so "True." and "true" compare equal.
std::vector<std::string> tokenize(const std::string& text);
std::string normalize(const std::string& text);

// Word-level vocabulary with a contiguous id space. Specials occupy the lowest
// ids: <pad> <eos> <unk> <mask> then <sent_0>..<sent_{k-1}>. Immutable after
// construction.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kMask = 3;

  // Tokens ranked by (frequency desc, lexicographic asc), truncated to
  // max_size including specials.
  static Vocab build(const std::vector<std::string>& corpus, int max_size,
                     int num_sentinels = 8);

  static Vocab load(const std::string& path);
  void save(const std::string& path) const;
  std::string serialize() const;  // one token per line; line number == id
  static Vocab deserialize(const std::string& text);

  int size() const { return static_cast<int>(tokens_.size()); }
  int num_specials() const { return 4 + num_sentinels_; }
  int num_sentinels() const { return num_sentinels_; }
  int sentinel_id(int k) const;
  bool is_special(int id) const { return id < num_specials(); }
  bool is_sentinel(int id) const { return id >= 4 && id < num_specials(); }

  // -1 when the token is absent.
  int lookup(const std::string& token) const;
  const std::string& token(int id) const;

  uint64_t hash() const { return hash_; }
  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  Vocab() = default;
  void index();
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int num_sentinels_ = 0;
  uint64_t hash_ = 0;
};

std::vector<int> encode(const std::string& text, const Vocab& v, bool append_eos);
std::string decode(const std::vector<int>& seq, const Vocab& v);

}  // namespace vqamix
