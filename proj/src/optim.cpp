// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/optim.hpp"

#include <cmath>

namespace vqamix {

OptKind opt_kind_from_string(const std::string& s) {
  if (s == "sgd") return OptKind::sgd;
  if (s == "adam") return OptKind::adam;
  throw ConfigError("unknown optimizer kind '" + s + "' (expected sgd or adam)");
}

std::string to_string(OptKind k) { return k == OptKind::sgd ? "sgd" : "adam"; }

Optimizer::Optimizer(OptimizerConfig cfg, std::vector<Parameter*> params)
    : cfg_(cfg), params_(std::move(params)) {
  if (cfg_.lr <= 0.0) throw ConfigError("optimizer learning rate must be positive");
  if (cfg_.kind == OptKind::adam) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Parameter* p : params_) {
      m_.push_back(Tensor::zeros(p->value.shape()));
      v_.push_back(Tensor::zeros(p->value.shape()));
    }
  }
}

void Optimizer::step() {
  for (Parameter* p : params_)
    if (!p->grad_live)
      throw NumericError("optimizer step: no gradient for parameter '" + p->name + "'");
  ++step_count_;
  if (cfg_.kind == OptKind::sgd) {
    for (Parameter* p : params_)
      for (int i = 0; i < p->value.size(); ++i) p->value[i] -= cfg_.lr * p->grad[i];
    return;
  }
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Parameter* p = params_[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (int i = 0; i < p->value.size(); ++i) {
      double g = p->grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p->value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

void Optimizer::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace vqamix
