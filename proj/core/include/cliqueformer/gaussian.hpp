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

#ifndef CLIQUEFORMER_GAUSSIAN_HPP_
#define CLIQUEFORMER_GAUSSIAN_HPP_

#include <span>

#include "cliqueformer/autodiff.hpp"
#include "cliqueformer/tensor.hpp"

namespace cliqueformer {

class Rng;

inline constexpr double kLogVarianceMin = -8.0;
inline constexpr double kLogVarianceMax = 8.0;

/// Diagonal Gaussian posterior over the latent space. The constructor clamps
/// log_variance into [kLogVarianceMin, kLogVarianceMax].
class DiagonalGaussian {
 public:
  DiagonalGaussian(Vector mean, Vector log_variance);

  const Vector& mean() const { return mean_; }
  const Vector& log_variance() const { return log_variance_; }
  Index dim() const { return mean_.size(); }

 private:
  Vector mean_;
  Vector log_variance_;
};

/// 0.5 * sum over `indices` of (mu^2 + sigma^2 - 1 - log sigma^2).
double kl_to_standard_normal(const DiagonalGaussian& q, std::span<const int> indices);
double kl_to_standard_normal(const DiagonalGaussian& q);

/// z = mu + exp(log_variance / 2) * eps with eps ~ N(0, I).
Vector reparam_sample(const DiagonalGaussian& q, Rng& rng);
/// Same with caller-supplied noise.
Vector reparam_sample(const DiagonalGaussian& q, const Vector& noise);

/// Differentiable batch version on a tape: each row is one posterior.
Var reparam_sample(const Var& mean, const Var& log_variance, const Matrix& noise);

/// 0.5 * ||x - mean||^2 + (d/2) log(2 pi): unit-variance Gaussian likelihood.
double gaussian_recon_nll(std::span<const double> x, std::span<const double> mean);
/// Sum over positions of softmax cross-entropy. `onehot` and `logits` are
/// positions x vocabulary; every one-hot row must sum to 1.
double categorical_recon_nll(const Matrix& onehot, const Matrix& logits);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_GAUSSIAN_HPP_
