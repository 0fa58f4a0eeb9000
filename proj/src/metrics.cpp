// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/metrics.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vqamix/vocab.hpp"

namespace vqamix {

double exact_match_accuracy(const std::vector<std::string>& predictions,
                            const std::vector<std::string>& golds) {
  if (predictions.size() != golds.size())
    throw DataError("exact_match_accuracy: " + std::to_string(predictions.size()) +
                    " predictions vs " + std::to_string(golds.size()) + " golds");
  if (golds.empty()) throw DataError("exact_match_accuracy: empty inputs");
  int hits = 0;
  for (size_t i = 0; i < golds.size(); ++i)
    hits += (normalize(predictions[i]) == normalize(golds[i]));
  return static_cast<double>(hits) / static_cast<double>(golds.size());
}

double majority_baseline(const std::vector<std::string>& golds) {
  if (golds.empty()) throw DataError("majority_baseline: empty inputs");
  std::map<std::string, int> freq;
  for (const std::string& g : golds) ++freq[normalize(g)];
  int best = 0;
  for (const auto& [k, n] : freq) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(golds.size());
}

Prf detection_f1(const std::string& pred_text, const std::vector<std::string>& gold_names) {
  if (gold_names.empty()) throw DataError("detection_f1: empty gold multiset");
  std::map<std::string, int> gold;
  for (const std::string& n : gold_names) ++gold[normalize(n)];
  std::vector<std::string> pred_tokens = tokenize(pred_text);
  std::map<std::string, int> pred;
  for (const std::string& t : pred_tokens) ++pred[t];
  long matches = 0;
  for (const auto& [name, gc] : gold) {
    auto it = pred.find(name);
    if (it != pred.end()) matches += std::min(it->second, gc);
  }
  Prf out;
  long psize = static_cast<long>(pred_tokens.size());
  long gsize = static_cast<long>(gold_names.size());
  out.precision = psize == 0 ? 0.0 : static_cast<double>(matches) / psize;
  out.recall = static_cast<double>(matches) / gsize;
  out.f1 = (out.precision + out.recall) == 0.0
               ? 0.0
               : 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

Prf detection_f1_micro(const std::vector<std::string>& pred_texts,
                       const std::vector<std::vector<std::string>>& gold_name_sets) {
  if (pred_texts.size() != gold_name_sets.size() || pred_texts.empty())
    throw DataError("detection_f1_micro: size mismatch or empty inputs");
  long matches = 0, psize = 0, gsize = 0;
  for (size_t i = 0; i < pred_texts.size(); ++i) {
    std::map<std::string, int> gold;
    for (const std::string& n : gold_name_sets[i]) ++gold[normalize(n)];
    if (gold.empty()) throw DataError("detection_f1_micro: empty gold multiset");
    std::vector<std::string> toks = tokenize(pred_texts[i]);
    std::map<std::string, int> pred;
    for (const std::string& t : toks) ++pred[t];
    for (const auto& [name, gc] : gold) {
      auto it = pred.find(name);
      if (it != pred.end()) matches += std::min(it->second, gc);
    }
    psize += static_cast<long>(toks.size());
    gsize += static_cast<long>(gold_name_sets[i].size());
  }
  Prf out;
  out.precision = psize == 0 ? 0.0 : static_cast<double>(matches) / psize;
  out.recall = static_cast<double>(matches) / gsize;
  out.f1 = (out.precision + out.recall) == 0.0
               ? 0.0
               : 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

nlohmann::json MetricReport::canonical_json() const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["checkpoint_id"] = checkpoint_id;
  j["rows"] = rows;
  j["baselines"] = baselines;
  j["integers"] = integers;
  return j;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j = canonical_json();
  j["wall_clock_sec"] = wall_clock_sec;
  return j;
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.config_hash = j.at("config_hash").get<uint64_t>();
  r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  r.rows = j.at("rows").get<std::map<std::string, std::map<std::string, double>>>();
  r.baselines = j.at("baselines").get<std::map<std::string, double>>();
  r.integers = j.value("integers", std::map<std::string, long>{});
  r.wall_clock_sec = j.value("wall_clock_sec", 0.0);
  return r;
}

void MetricReport::validate() const {
  for (const auto& [row, metrics] : rows)
    for (const auto& [name, v] : metrics)
      if (!(v >= 0.0 && v <= 1.0))
        throw NumericError("metric " + row + "/" + name + " = " + std::to_string(v) +
                           " escapes [0, 1]");
  for (const auto& [name, v] : baselines)
    if (!(v >= 0.0 && v <= 1.0))
      throw NumericError("baseline " + name + " escapes [0, 1]");
}

void MetricReport::save(const std::string& dir) const {
  validate();
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/report.json");
    if (!out) throw IoError("cannot write report in " + dir);
    out << canonical_json().dump(2) << "\n";
  }
  {
    std::ofstream out(dir + "/meta.json");
    out << nlohmann::json{{"wall_clock_sec", wall_clock_sec}}.dump(2) << "\n";
  }
}

MetricReport MetricReport::load(const std::string& dir) {
  std::ifstream in(dir + "/report.json");
  if (!in) throw IoError("missing report " + dir + "/report.json");
  MetricReport r = from_json(nlohmann::json::parse(in));
  std::ifstream meta(dir + "/meta.json");
  if (meta) r.wall_clock_sec = nlohmann::json::parse(meta).value("wall_clock_sec", 0.0);
  return r;
}

void save_predictions(const std::string& path, const std::vector<std::string>& golds,
                      const std::vector<std::string>& preds) {
  if (golds.size() != preds.size()) throw DataError("save_predictions: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write predictions " + path);
  for (size_t i = 0; i < golds.size(); ++i)
    out << i << '\t' << golds[i] << '\t' << preds[i] << '\n';
}

PredictionDump load_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read predictions " + path);
  PredictionDump d;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t t1 = line.find('\t');
    size_t t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw IoError("malformed prediction line: " + line);
    d.golds.push_back(line.substr(t1 + 1, t2 - t1 - 1));
    d.preds.push_back(line.substr(t2 + 1));
  }
  return d;
}

}  // namespace vqamix
