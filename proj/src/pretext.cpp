// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/pretext.hpp"

#include <cmath>

#include "vqamix/vocab.hpp"

namespace vqamix {

namespace {
int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

std::vector<std::string> caption_words(const CaptionPair& pair) {
  std::vector<std::string> words = tokenize(pair.caption);
  if (words.empty()) throw DataError("caption pair with an empty caption");
  return words;
}

std::string join(const std::vector<std::string>& words, size_t begin, size_t end) {
  std::string out;
  for (size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += words[i];
  }
  return out;
}
}  // namespace

const std::string& CaptionPool::sample_different(const std::string& not_this, Rng& rng) const {
  bool has_other = false;
  for (const std::string& c : captions_)
    if (c != not_this) {
      has_other = true;
      break;
    }
  if (!has_other)
    throw DataError("caption pool cannot supply a negative: every entry equals the query");
  for (;;) {
    const std::string& c = captions_[rng.u64() % captions_.size()];
    if (c != not_this) return c;
  }
}

TaskExample make_ic(const CaptionPair& pair) {
  caption_words(pair);  // validates non-empty
  TaskExample e;
  e.images.push_back(pair.image);
  e.scene_id = pair.scene_id;
  e.input_text = kCaptionPrompt;
  e.target_text = pair.caption;
  e.tag = TaskTag::ic;
  return e;
}

TaskExample make_cmp(const CaptionPair& pair, Rng& rng, CmpDraw* draw) {
  std::vector<std::string> words = caption_words(pair);
  TaskExample e;
  e.images.push_back(pair.image);
  e.scene_id = pair.scene_id;
  e.tag = TaskTag::cmp;
  double f = rng.uniform(0.10, 0.40);
  if (words.size() < 2) {
    // No split keeps the target non-empty; emit the captioning form instead.
    e.input_text = kCaptionPrompt;
    e.target_text = pair.caption;
    if (draw) *draw = {f, 0, true};
    return e;
  }
  int n = static_cast<int>(words.size());
  int prefix = std::max(1, round_half_up(f * n));
  e.input_text = join(words, 0, static_cast<size_t>(prefix));
  e.target_text = join(words, static_cast<size_t>(prefix), words.size());
  if (draw) *draw = {f, prefix, false};
  return e;
}

TaskExample make_mlm(const CaptionPair& pair, Rng& rng, bool full_caption_target) {
  std::vector<std::string> words = caption_words(pair);
  int n = static_cast<int>(words.size());
  int k = std::max(1, round_half_up(0.25 * n));
  std::vector<int> masked = rng.sample_indices(n, k);  // ascending

  TaskExample e;
  e.images.push_back(pair.image);
  e.scene_id = pair.scene_id;
  e.tag = TaskTag::mlm;

  std::string input, target;
  size_t next = 0;
  for (int i = 0; i < n; ++i) {
    if (!input.empty()) input += ' ';
    if (next < masked.size() && masked[next] == i) {
      std::string sentinel = "<sent_" + std::to_string(next) + ">";
      input += sentinel;
      if (!target.empty()) target += ' ';
      target += sentinel + " " + words[static_cast<size_t>(i)];
      ++next;
    } else {
      input += words[static_cast<size_t>(i)];
    }
  }
  e.input_text = input;
  e.target_text = full_caption_target ? pair.caption : target;
  return e;
}

TaskExample make_itm(const CaptionPair& pair, const CaptionPool& pool, Rng& rng) {
  caption_words(pair);
  TaskExample e;
  e.images.push_back(pair.image);
  e.scene_id = pair.scene_id;
  e.tag = TaskTag::itm;
  if (rng.bernoulli(0.5)) {
    e.input_text = pair.caption;
    e.target_text = "true";
  } else {
    e.input_text = pool.sample_different(pair.caption, rng);
    e.target_text = "false";
  }
  return e;
}

PretrainTaskSet PretrainTaskSet::only(TaskTag t) {
  PretrainTaskSet s{false, false, false, false};
  switch (t) {
    case TaskTag::ic: s.ic = true; break;
    case TaskTag::cmp: s.cmp = true; break;
    case TaskTag::mlm: s.mlm = true; break;
    case TaskTag::itm: s.itm = true; break;
    default: throw ConfigError("PretrainTaskSet::only expects a pretraining tag");
  }
  return s;
}

std::vector<TaskExample> make_pretrain_mixture(const std::vector<CaptionPair>& pairs,
                                               const PretrainTaskSet& tasks, Rng& rng,
                                               bool mlm_full_caption) {
  std::vector<TaskTag> enabled;
  if (tasks.ic) enabled.push_back(TaskTag::ic);
  if (tasks.cmp) enabled.push_back(TaskTag::cmp);
  if (tasks.mlm) enabled.push_back(TaskTag::mlm);
  if (tasks.itm) enabled.push_back(TaskTag::itm);
  if (enabled.empty()) throw ConfigError("pretraining mixture with no enabled tasks");

  std::vector<std::string> captions;
  captions.reserve(pairs.size());
  for (const CaptionPair& p : pairs) captions.push_back(p.caption);
  CaptionPool pool(std::move(captions));

  std::vector<TaskExample> out;
  out.reserve(pairs.size());
  for (const CaptionPair& p : pairs) {
    TaskTag kind = enabled[rng.u64() % enabled.size()];
    switch (kind) {
      case TaskTag::ic: out.push_back(make_ic(p)); break;
      case TaskTag::cmp: out.push_back(make_cmp(p, rng)); break;
      case TaskTag::mlm: out.push_back(make_mlm(p, rng, mlm_full_caption)); break;
      case TaskTag::itm: out.push_back(make_itm(p, pool, rng)); break;
      default: break;
    }
  }
  return out;
}

std::vector<CaptionPair> build_caption_pairs(int n, uint64_t seed, const SceneSpec& spec,
                                             const std::unordered_set<uint64_t>& exclusion) {
  FamilyDataset ds = build_dataset(Family::caption, n, seed, spec, exclusion);
  std::vector<CaptionPair> pairs;
  pairs.reserve(ds.examples.size());
  for (TaskExample& e : ds.examples)
    pairs.push_back({std::move(e.images[0]), e.target_text, e.scene_id});
  return pairs;
}

}  // namespace vqamix
