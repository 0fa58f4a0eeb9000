// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "vqamix/families.hpp"
#include "vqamix/model.hpp"
#include "vqamix/optim.hpp"

namespace vqamix {

// Equal-share multi-task mixture: every batch holds exactly batch_size/N
// examples from each member dataset.
struct MixtureSpec {
  struct Member {
    std::string name;
    const FamilyDataset* data = nullptr;
  };
  std::vector<Member> members;
  int batch_size = 16;
  int steps = 100;
  uint64_t seed = 0;

  void validate() const;
  int per_member() const { return batch_size / static_cast<int>(members.size()); }
};

// Per-dataset shuffled epoch streams; exhausted members reshuffle and restart
// independently. Deterministic per (spec.seed, member order).
class BatchComposer {
 public:
  explicit BatchComposer(const MixtureSpec& spec);
  std::vector<const TaskExample*> next();
  const std::map<std::string, long>& counts() const { return counts_; }

 private:
  struct Cursor {
    const FamilyDataset* data;
    std::vector<int> order;
    size_t pos = 0;
    Rng rng;
  };
  const MixtureSpec& spec_;
  std::vector<Cursor> cursors_;
  std::map<std::string, long> counts_;
};

struct TrainOptions {
  OptimizerConfig opt;
  int checkpoint_every = 0;  // 0: final checkpoint only
  std::string out_dir;       // empty: keep everything in memory
  uint64_t vocab_hash = 0;
  uint64_t init_steps = 0;  // continuation offset for resumed runs
  bool log_stdout = false;
};

struct TrainRunRecord {
  uint64_t config_hash = 0;
  std::vector<double> loss_curve;  // one entry per step
  std::vector<std::string> checkpoint_ids;
  std::map<std::string, long> per_task_counts;
  uint64_t final_step = 0;
};

// Runs compose -> forward -> backward -> step for spec.steps steps. Aborts
// with step context if the loss goes non-finite.
TrainRunRecord train(Model& model, Optimizer& opt, const Vocab& vocab, const MixtureSpec& spec,
                     const TrainOptions& options);

// Single-dataset continuation of a checkpointed model (the forgetting
// protocol's second phase). steps == 0 leaves the model untouched.
TrainRunRecord finetune(Model& model, Optimizer& opt, const Vocab& vocab,
                        const FamilyDataset& data, int steps, int batch_size, uint64_t seed,
                        const TrainOptions& options);

uint64_t train_config_hash(const Model& model, const MixtureSpec& spec,
                           const OptimizerConfig& opt);

}  // namespace vqamix
