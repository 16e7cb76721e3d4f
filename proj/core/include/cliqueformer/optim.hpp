// Copyright 2026 The cliqueformer-cpp Authors
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

#ifndef CLIQUEFORMER_OPTIM_HPP_
#define CLIQUEFORMER_OPTIM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "cliqueformer/autodiff.hpp"
#include "cliqueformer/tensor.hpp"

namespace cliqueformer {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Moment accumulators for a list of tensors plus the shared step counter.
/// Accumulators are sized lazily on the first update.
struct OptimizerState {
  AdamWOptions options;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;

  OptimizerState() = default;
  explicit OptimizerState(AdamWOptions opts) : options(opts) {}
};

/// One AdamW step with decoupled weight decay:
///   theta <- theta * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
/// where m_hat, v_hat are the bias-corrected moments.
void adamw_update(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                  OptimizerState& state);
void adamw_update(Matrix& param, const Matrix& grad, OptimizerState& state);
/// Uses each Parameter's accumulated grad.
void adamw_update(ParameterSet& params, OptimizerState& state);

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_OPTIM_HPP_
