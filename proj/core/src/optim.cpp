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

#include "cliqueformer/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cliqueformer {

void adamw_update(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
                  OptimizerState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adamw_update: " + std::to_string(params.size()) + " tensors but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adamw_update: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    check_same_shape(*params[i], *grads[i], "adamw_update param/grad");
    check_same_shape(*params[i], state.first_moment[i], "adamw_update param/state");
  }

  const AdamWOptions& o = state.options;
  ++state.step;
  const double bias1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - o.lr * o.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->array();
    const auto g = grads[i]->array();
    auto m = state.first_moment[i].array();
    auto v = state.second_moment[i].array();
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g.square();
    theta = theta * decay - o.lr * (m / bias1) / ((v / bias2).sqrt() + o.eps);
  }
}

void adamw_update(Matrix& param, const Matrix& grad, OptimizerState& state) {
  Matrix* const p[] = {&param};
  const Matrix* const g[] = {&grad};
  adamw_update(std::span<Matrix* const>(p), std::span<const Matrix* const>(g), state);
}

void adamw_update(ParameterSet& params, OptimizerState& state) {
  std::vector<Matrix*> p;
  std::vector<const Matrix*> g;
  p.reserve(params.size());
  g.reserve(params.size());
  for (auto& param : params) {
    p.push_back(&param.value);
    g.push_back(&param.grad);
  }
  adamw_update(std::span<Matrix* const>(p), std::span<const Matrix* const>(g), state);
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm > max_norm && norm > 0.0) params.scale_grad(max_norm / norm);
  return norm;
}

}  // namespace cliqueformer
