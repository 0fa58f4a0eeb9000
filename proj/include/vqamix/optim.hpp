// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqamix/tensor.hpp"

namespace vqamix {

enum class OptKind : uint8_t { sgd, adam };

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

OptKind opt_kind_from_string(const std::string& s);
std::string to_string(OptKind k);

// First-order optimizer over a fixed parameter set. Moment buffers exist only
// for adam and mirror parameter shapes.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::vector<Parameter*> params);

  // Applies one update using each parameter's grad buffer. A parameter whose
  // gradient was never produced by a backward pass is an error.
  void step();
  void zero_grad();

  uint64_t step_count() const { return step_count_; }
  const OptimizerConfig& config() const { return cfg_; }
  const std::vector<Parameter*>& params() const { return params_; }

  // Serialization access for checkpointing.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  void set_step_count(uint64_t s) { step_count_ = s; }

 private:
  OptimizerConfig cfg_;
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;  // adam only
  uint64_t step_count_ = 0;
};

}  // namespace vqamix
