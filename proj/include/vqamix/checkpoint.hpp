// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>

#include "vqamix/model.hpp"
#include "vqamix/optim.hpp"

namespace vqamix {

// Binary checkpoint: magic + version, serialized ModelConfig, vocabulary hash,
// step counter, named parameter tensors (f64 little-endian), and optionally
// the optimizer state. Loading rejects config or vocabulary mismatches.
struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  uint64_t vocab_hash = 0;
  uint64_t trained_steps = 0;

  bool has_optimizer = false;
  OptimizerConfig opt_config;
  uint64_t opt_step_count = 0;
  std::vector<Tensor> first_moments, second_moments;

  // Rebuilds the optimizer bound to the loaded model's parameters.
  std::unique_ptr<Optimizer> take_optimizer();
};

void save_checkpoint(const std::string& path, const Model& model, uint64_t vocab_hash,
                     uint64_t trained_steps, const Optimizer* opt = nullptr);

// expected_vocab_hash of 0 skips the vocabulary check.
LoadedCheckpoint load_checkpoint(const std::string& path, uint64_t expected_vocab_hash);

}  // namespace vqamix
