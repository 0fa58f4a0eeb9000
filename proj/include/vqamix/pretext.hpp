// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vqamix/example.hpp"
#include "vqamix/families.hpp"

namespace vqamix {

inline constexpr const char* kCaptionPrompt = "caption the image";

struct CaptionPair {
  Image image;
  std::string caption;  // at least one word
  uint64_t scene_id = 0;
};

// Negative-caption source for the matching task.
class CaptionPool {
 public:
  explicit CaptionPool(std::vector<std::string> captions) : captions_(std::move(captions)) {}
  // Uniform draw over pool entries different from `not_this`. Errors when the
  // pool cannot supply one.
  const std::string& sample_different(const std::string& not_this, Rng& rng) const;
  size_t size() const { return captions_.size(); }

 private:
  std::vector<std::string> captions_;
};

struct CmpDraw {
  double fraction = 0.0;  // the sampled f in [0.10, 0.40]
  int prefix_words = 0;
  bool degenerate = false;  // 1-word caption fell back to the captioning form
};

TaskExample make_ic(const CaptionPair& pair);
TaskExample make_cmp(const CaptionPair& pair, Rng& rng, CmpDraw* draw = nullptr);
TaskExample make_mlm(const CaptionPair& pair, Rng& rng, bool full_caption_target = false);
TaskExample make_itm(const CaptionPair& pair, const CaptionPool& pool, Rng& rng);

struct PretrainTaskSet {
  bool ic = true, cmp = true, mlm = true, itm = true;
  int enabled_count() const { return int(ic) + int(cmp) + int(mlm) + int(itm); }
  static PretrainTaskSet only(TaskTag t);
};

// One example per pair; the task kind is drawn uniformly from the enabled set.
std::vector<TaskExample> make_pretrain_mixture(const std::vector<CaptionPair>& pairs,
                                               const PretrainTaskSet& tasks, Rng& rng,
                                               bool mlm_full_caption = false);

// Scene-backed caption pairs for pretraining (fresh scenes, exclusion-aware).
std::vector<CaptionPair> build_caption_pairs(int n, uint64_t seed, const SceneSpec& spec,
                                             const std::unordered_set<uint64_t>& exclusion = {});

}  // namespace vqamix
