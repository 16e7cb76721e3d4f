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

#ifndef CLIQUEFORMER_TRAINING_HPP_
#define CLIQUEFORMER_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "cliqueformer/gaussian.hpp"
#include "cliqueformer/model.hpp"
#include "cliqueformer/tasks.hpp"

namespace cliqueformer {

class Rng;

struct TrainConfig {
  double tau = 10.0;
  double lr = 1e-4;
  Index warmup_steps = 1000;
  Index batch_size = 128;
  Index steps = 10000;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  /// Multiplies the warmed-up VIB coefficient; 0 gives the no-VIB ablation.
  double vib_scale = 1.0;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 10.0;
};

struct StepLosses {
  double kl = 0.0;   // clique-sampled KL, batch mean
  double vib = 0.0;  // kl times the VIB coefficient in effect
  double nll = 0.0;  // reconstruction negative log-likelihood
  double mse = 0.0;  // (y - f(z))^2, before the tau weight
  double total = 0.0;
};

struct TrainReport {
  std::vector<StepLosses> curve;
  double seconds = 0.0;
};

/// min(1, step / warmup_steps); 1 when warmup_steps == 0.
double warmup_coefficient(Index step, Index warmup_steps);

/// KL of one uniformly drawn clique marginal of q to the standard normal.
double vib_term(const DiagonalGaussian& q, const CliqueLayout& layout, Rng& rng);

/// B x d_z 0/1 mask selecting one uniformly drawn clique per row.
Matrix sample_clique_mask(const CliqueLayout& layout, Index batch, Rng& rng);

struct LossTerms {
  Var total;  // 1x1 batch means of every term below
  Var kl;
  Var nll;
  Var mse;
};

/// Batch-mean Cliqueformer loss with frozen reparameterization noise
/// (B x d_z) and clique mask:
///   vib_coeff * KL + NLL(x | decode(z)) + tau * (y - predict(z))^2.
/// `targets` are the normalized scores of the batch rows.
LossTerms loss_clique(Cliqueformer& model, Tape& tape, const Matrix& inputs,
                      const Vector& targets, const Matrix& noise, const Matrix& clique_mask,
                      const ForwardContext& ctx, double tau, double vib_coeff);

/// Trains `model` in place on `data` (targets normalized with data.stats).
/// Deterministic given config.seed. Throws std::runtime_error on a
/// non-finite loss.
TrainReport train(Cliqueformer& model, const Dataset& data, const TrainConfig& config);

/// Builds a model seeded from config.seed and trains it.
std::pair<Cliqueformer, TrainReport> train(const Dataset& data,
                                           const CliqueformerConfig& model_config,
                                           const TrainConfig& config);

/// CSV columns: step,vib,nll,mse,total,kl
void write_curves_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_TRAINING_HPP_
