// Copyright 2026 spoofbench authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spoofbench/nn/autograd.hpp"

namespace spoofbench {
namespace nn {

enum class OptimKind { kAdam, kAdamW };

inline const char* optim_kind_name(OptimKind k) {
  return k == OptimKind::kAdam ? "ADAM" : "ADAMW";
}

struct OptimConfig {
  OptimKind kind = OptimKind::kAdam;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled decay; applies to AdamW only. Adam runs without decay.
  double weight_decay = 0.01;
};

// Adam / AdamW over the trainable subset of the given parameters. Parameters
// with requires_grad off are dropped at construction and never touched, so a
// frozen backbone carries no optimizer state.
class Optimizer {
 public:
  Optimizer(const std::vector<Var>& params, OptimConfig cfg) : cfg_(cfg) {
    if (!(cfg.lr > 0.0)) throw Error("optimizer: lr must be positive");
    for (const Var& p : params)
      if (p.defined() && p.requires_grad()) params_.push_back(p);
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Var& p : params_) {
      m_.push_back(Tensor::zeros(p.shape()));
      v_.push_back(Tensor::zeros(p.shape()));
    }
  }

  void zero_grad() {
    for (Var& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      Var& p = params_[i];
      if (!p.grad().defined()) continue;  // parameter unused in this graph
      float* w = p.value().data();
      const float* g = p.grad().data();
      float* m = m_[i].data();
      float* v = v_[i].data();
      const int64_t n = p.numel();
      for (int64_t k = 0; k < n; ++k) {
        const double gk = g[k];
        m[k] = static_cast<float>(cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk);
        v[k] = static_cast<float>(cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk);
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        double upd = cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        if (cfg_.kind == OptimKind::kAdamW) upd += cfg_.lr * cfg_.weight_decay * w[k];
        w[k] = static_cast<float>(w[k] - upd);
      }
    }
  }

  int64_t step_count() const { return t_; }
  const std::vector<Var>& params() const { return params_; }
  const OptimConfig& config() const { return cfg_; }

 private:
  OptimConfig cfg_;
  std::vector<Var> params_;
  std::vector<Tensor> m_, v_;
  int64_t t_ = 0;
};

}  // namespace nn
}  // namespace spoofbench
