// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "vqamix/example.hpp"
#include "vqamix/scene.hpp"

namespace vqamix {

// Synthetic task families. Each renders (question, answer) pairs whose answer
// is derivable from the symbolic scene by the family's oracle.
enum class Family : uint8_t {
  vqa_attr,
  count,
  entail,
  nlvr_pair,
  compositional,
  caption,
  region_desc,
  match_yesno,
  detect_text,
};

inline constexpr int kNumFamilies = 9;

std::string to_string(Family f);
Family family_from_string(const std::string& s);
TaskTag tag_of(Family f);
int scenes_needed(Family f);  // 2 for nlvr_pair, 1 otherwise
// Family-specific overrides (match_yesno uses single-object scenes).
SceneSpec scene_spec_for(Family f, SceneSpec base);

// Renders one example from already-generated scenes. Throws DataError when the
// family's preconditions cannot be satisfied for these scenes; the dataset
// builder resamples scenes in that case.
TaskExample render_task(const std::vector<Scene>& scenes, Family f, Rng& rng);

// Recomputes the target from the stored scenes and question text. Used by the
// oracle-soundness audit; throws DataError for unparseable questions.
std::string family_oracle(const std::vector<Scene>& scenes, Family f,
                          const std::string& input_text);

struct FamilyDataset {
  std::string name;  // defaults to the family name
  Family family = Family::vqa_attr;
  uint64_t seed = 0;
  uint64_t vocab_hash = 0;  // 0 until bound to a run's vocabulary
  std::vector<TaskExample> examples;
  std::vector<uint64_t> scene_ids;  // unique, in first-use order

  std::unordered_set<uint64_t> scene_id_set() const {
    return {scene_ids.begin(), scene_ids.end()};
  }
};

// Deterministic per (family, n, seed, spec, exclusion). Scene ids never
// intersect the exclusion set.
FamilyDataset build_dataset(Family f, int n_examples, uint64_t seed, const SceneSpec& base_spec,
                            const std::unordered_set<uint64_t>& exclusion = {});

void save_dataset(const FamilyDataset& ds, const std::string& dir);
FamilyDataset load_dataset(const std::string& dir, const std::string& name);

// Closed lexicon corpus covering every template and answer word; the run
// vocabulary is built from this, so family outputs always tokenize UNK-free.
std::vector<std::string> canonical_corpus();

bool scene_sets_disjoint(const FamilyDataset& a, const FamilyDataset& b);

}  // namespace vqamix
