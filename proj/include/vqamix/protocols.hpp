// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vqamix/families.hpp"
#include "vqamix/metrics.hpp"
#include "vqamix/model.hpp"
#include "vqamix/trainer.hpp"

namespace vqamix {

enum class ProtocolKind : uint8_t {
  zero_shot,
  forgetting,
  pretrain_ablation,
  fusion_ablation,
  detect_eval,
};

std::string to_string(ProtocolKind k);
ProtocolKind protocol_kind_from_string(const std::string& s);
std::vector<std::string> protocol_names();

// Everything a protocol run needs besides the output directory. Budgets are
// deliberate knobs: the acceptance criteria are directional orderings, not
// absolute numbers.
struct ProtocolConfig {
  ModelConfig model;
  SceneSpec scene;
  OptimizerConfig opt{OptKind::adam, 1e-3};
  int batch_size = 16;
  int train_examples = 8000;  // per family; fresh scenes keep the tasks non-memorizable
  int eval_examples = 200;
  int pretrain_pairs = 8000;
  int steps_mixture = 1500;
  int steps_single = 1000;
  int steps_finetune = 400;
  int steps_pretrain = 600;
  int steps_downstream = 300;
  std::vector<uint64_t> seeds = {11, 12, 13};
  int jobs = 0;  // 0: hardware concurrency

  // zero-shot arms; the held-out family transfers from the compositional
  // questions the same way VQA transfers from GQA-style training
  Family held_out = Family::vqa_attr;
  std::vector<Family> mix4 = {Family::count, Family::entail, Family::compositional,
                              Family::nlvr_pair};
  std::vector<Family> mix8 = {Family::count,       Family::entail,     Family::compositional,
                              Family::nlvr_pair,   Family::caption,    Family::region_desc,
                              Family::match_yesno, Family::detect_text};
  // forgetting
  std::vector<Family> forget_base = {Family::vqa_attr, Family::compositional, Family::caption};
  Family forget_probe = Family::vqa_attr;  // measured before/after the finetune
  Family forget_new = Family::count;       // the finetune target
  // pretraining ablation downstream tasks
  std::vector<Family> downstream = {Family::vqa_attr, Family::entail};
  // fusion ablation training tasks
  std::vector<Family> fusion_families = {Family::vqa_attr, Family::match_yesno};
  // detection-as-text mixture (region_desc included on purpose)
  std::vector<Family> detect_mix = {Family::vqa_attr, Family::count, Family::compositional,
                                    Family::region_desc};
};

void to_json(nlohmann::json& j, const ProtocolConfig& c);
void from_json(const nlohmann::json& j, ProtocolConfig& c);

struct EvalResult {
  std::vector<std::string> golds, preds;
  double accuracy = 0.0;
};

// Greedy open-vocabulary answers scored by exact match after normalization.
EvalResult evaluate_exact(const Model& model, const Vocab& vocab, const FamilyDataset& eval_set);

// Runs independent jobs on up to `workers` threads; rethrows the first error.
void run_parallel(std::vector<std::function<void()>>& jobs, int workers);

double median(std::vector<double> v);

// Protocol runners. Each trains everything it needs, asserts train/eval
// scene disjointness up front, writes report.json / meta.json / prediction
// dumps under out_dir (when non-empty), and returns the report.
MetricReport run_zero_shot(const ProtocolConfig& cfg, const Vocab& vocab,
                           const std::string& out_dir);
MetricReport run_forgetting(const ProtocolConfig& cfg, const Vocab& vocab,
                            const std::string& out_dir);
MetricReport run_pretrain_ablation(const ProtocolConfig& cfg, const Vocab& vocab,
                                   const std::string& out_dir);
MetricReport run_fusion_ablation(const ProtocolConfig& cfg, const Vocab& vocab,
                                 const std::string& out_dir);
MetricReport run_detect_eval(const ProtocolConfig& cfg, const Vocab& vocab,
                             const std::string& out_dir);

MetricReport run_protocol(ProtocolKind kind, const ProtocolConfig& cfg, const Vocab& vocab,
                          const std::string& out_dir);

}  // namespace vqamix
