// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "vqamix/pretext.hpp"
#include "vqamix/protocols.hpp"

namespace vqamix {

struct DataGenConfig {
  std::vector<Family> families;  // empty: all families
  int train_examples = 1500;
  int eval_examples = 200;
  int vocab_size = 512;
  uint64_t seed = 11;
};

struct PretrainCmdConfig {
  int pairs = 1500;
  PretrainTaskSet tasks;  // all four by default
  int batch_size = 16;
  int steps = 400;
  uint64_t seed = 11;
};

struct TrainCmdConfig {
  std::vector<std::string> datasets;  // names under the data directory
  int batch_size = 16;
  int steps = 500;
  int checkpoint_every = 0;
  uint64_t seed = 11;
};

// The resolved configuration of a run. The protocol section inherits the
// top-level model/scene blocks unless explicitly overridden.
struct RunConfig {
  ModelConfig model;
  SceneSpec scene;
  OptimizerConfig opt{OptKind::adam, 1e-3};
  DataGenConfig data;
  PretrainCmdConfig pretrain;
  TrainCmdConfig train;
  ProtocolConfig protocol;
  uint64_t seed = 11;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json resolved_json() const;
  uint64_t hash() const;  // over the resolved form; stable under key order
  void save_resolved(const std::string& dir) const;
};

// Exclusive run-directory lock; released on destruction.
class DirLock {
 public:
  explicit DirLock(const std::string& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
};

}  // namespace vqamix
