// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace vqamix {

namespace {
bool is_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}
}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char ch : text) {
    unsigned char uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      flush();
    } else if (is_punct(ch)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  flush();
  while (!out.empty() && out.back().size() == 1 && is_punct(out.back()[0])) out.pop_back();
  return out;
}

std::string normalize(const std::string& text) {
  std::string s;
  for (const std::string& t : tokenize(text)) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

Vocab Vocab::build(const std::vector<std::string>& corpus, int max_size, int num_sentinels) {
  if (num_sentinels < 0) throw ConfigError("vocab: negative sentinel count");
  Vocab v;
  v.num_sentinels_ = num_sentinels;
  if (max_size <= v.num_specials())
    throw ConfigError("vocab: max_size " + std::to_string(max_size) +
                      " does not exceed the " + std::to_string(v.num_specials()) +
                      " reserved specials");

  std::map<std::string, long> freq;  // ordered map gives the lexicographic tie-break
  bool any = false;
  for (const std::string& line : corpus)
    for (const std::string& tok : tokenize(line)) {
      ++freq[tok];
      any = true;
    }
  if (!any) throw DataError("vocab: empty corpus");

  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  v.tokens_ = {"<pad>", "<eos>", "<unk>", "<mask>"};
  for (int k = 0; k < num_sentinels; ++k) v.tokens_.push_back("<sent_" + std::to_string(k) + ">");
  for (const auto& [tok, n] : ranked) {
    if (static_cast<int>(v.tokens_.size()) >= max_size) break;
    if (std::find(v.tokens_.begin(), v.tokens_.begin() + v.num_specials(), tok) !=
        v.tokens_.begin() + v.num_specials())
      continue;  // corpus text that collides with a special keeps the special id
    v.tokens_.push_back(tok);
  }
  v.index();
  return v;
}

void Vocab::index() {
  ids_.clear();
  for (size_t i = 0; i < tokens_.size(); ++i) ids_[tokens_[i]] = static_cast<int>(i);
  hash_ = fnv1a64(serialize());
}

std::string Vocab::serialize() const {
  std::string s;
  for (const std::string& t : tokens_) {
    s += t;
    s += '\n';
  }
  return s;
}

Vocab Vocab::deserialize(const std::string& text) {
  Vocab v;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) v.tokens_.push_back(line);
  if (v.tokens_.size() < 4 || v.tokens_[0] != "<pad>" || v.tokens_[1] != "<eos>" ||
      v.tokens_[2] != "<unk>" || v.tokens_[3] != "<mask>")
    throw IoError("vocab: malformed file (missing special tokens)");
  int k = 0;
  while (4 + k < static_cast<int>(v.tokens_.size()) &&
         v.tokens_[static_cast<size_t>(4 + k)] == "<sent_" + std::to_string(k) + ">")
    ++k;
  v.num_sentinels_ = k;
  v.index();
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("vocab: cannot write " + path);
  out << serialize();
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("vocab: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

int Vocab::sentinel_id(int k) const {
  if (k < 0 || k >= num_sentinels_)
    throw DataError("vocab: sentinel index " + std::to_string(k) + " out of " +
                    std::to_string(num_sentinels_));
  return 4 + k;
}

int Vocab::lookup(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size())
    throw DataError("vocab: token id " + std::to_string(id) + " out of range [0, " +
                    std::to_string(size()) + ")");
  return tokens_[static_cast<size_t>(id)];
}

std::vector<int> encode(const std::string& text, const Vocab& v, bool append_eos) {
  std::vector<int> ids;
  for (const std::string& tok : tokenize(text)) {
    int id = v.lookup(tok);
    ids.push_back(id < 0 ? Vocab::kUnk : id);
  }
  if (append_eos) ids.push_back(Vocab::kEos);
  return ids;
}

std::string decode(const std::vector<int>& seq, const Vocab& v) {
  std::string out;
  for (int id : seq) {
    if (id == Vocab::kPad || id == Vocab::kEos || id == Vocab::kMask) continue;
    const std::string& tok = v.token(id);  // validates range
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

}  // namespace vqamix
