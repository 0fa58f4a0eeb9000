// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqamix/common.hpp"

namespace vqamix {

// Mean over examples of [normalize(pred) == normalize(gold)].
double exact_match_accuracy(const std::vector<std::string>& predictions,
                            const std::vector<std::string>& golds);

// Frequency of the most common normalized gold answer; the floor any metric
// comparison is measured against.
double majority_baseline(const std::vector<std::string>& golds);

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Multiset matching: matches = sum over gold names of min(pred count, gold
// count). Words outside the gold universe never match but still count toward
// the prediction size. Empty prediction has precision 0.
Prf detection_f1(const std::string& pred_text, const std::vector<std::string>& gold_names);

// Micro-average over a set of examples (counts pooled before the ratios).
Prf detection_f1_micro(const std::vector<std::string>& pred_texts,
                       const std::vector<std::vector<std::string>>& gold_name_sets);

// Per-experiment result document. The canonical serialization is what the
// reproducibility contract compares; volatile fields (wall clock) live in a
// separate meta document.
struct MetricReport {
  std::string experiment;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
  std::string checkpoint_id;
  // row -> metric name -> value in [0, 1]
  std::map<std::string, std::map<std::string, double>> rows;
  std::map<std::string, double> baselines;
  std::map<std::string, long> integers;  // exact counts (e.g. parameter totals)
  double wall_clock_sec = 0.0;  // excluded from the canonical form

  nlohmann::json to_json() const;       // full, round-trips exactly
  nlohmann::json canonical_json() const;  // deterministic payload only
  static MetricReport from_json(const nlohmann::json& j);
  void validate() const;  // every metric within [0, 1]

  void save(const std::string& dir) const;  // report.json + meta.json
  static MetricReport load(const std::string& dir);
};

// Prediction dump: one line per example, "id<TAB>gold<TAB>prediction".
void save_predictions(const std::string& path, const std::vector<std::string>& golds,
                      const std::vector<std::string>& preds);
struct PredictionDump {
  std::vector<std::string> golds, preds;
};
PredictionDump load_predictions(const std::string& path);

}  // namespace vqamix
