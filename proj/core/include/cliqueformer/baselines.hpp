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

#ifndef CLIQUEFORMER_BASELINES_HPP_
#define CLIQUEFORMER_BASELINES_HPP_

#include <cstdint>
#include <vector>

#include "cliqueformer/model.hpp"
#include "cliqueformer/nn.hpp"
#include "cliqueformer/tasks.hpp"

namespace cliqueformer {

/// A differentiable regressor over model-input rows (continuous x, or
/// flattened one-hot sequences).
class Surrogate {
 public:
  virtual ~Surrogate() = default;
  virtual ParameterSet& params() = 0;
  virtual Index input_width() const = 0;
  /// x is B x input_width; returns B x 1.
  virtual Var forward(Tape& tape, const Var& x, const ForwardContext& ctx) = 0;

  /// Eval-mode predictions.
  Vector predict(const Matrix& x);
  /// Eval-mode predictions and per-row input gradients. Leaves parameter
  /// gradients zeroed.
  Vector predict_with_grad(const Matrix& x, Matrix& grad);
};

/// Fully connected regressor with two hidden layers.
class SurrogateMlp final : public Surrogate {
 public:
  SurrogateMlp(Index input_width, Index hidden, std::uint64_t seed,
               Activation activation = Activation::kGelu);

  ParameterSet& params() override { return params_; }
  Index input_width() const override { return input_width_; }
  Var forward(Tape& tape, const Var& x, const ForwardContext& ctx) override;

 private:
  ParameterSet params_;
  Mlp net_;
  Index input_width_;
};

struct TransformerSurrogateConfig {
  Index d_model = 64;
  Index n_blocks = 2;
  Index n_heads = 2;
  Index ff_hidden = 128;
  /// Width of the two hidden layers of the pooled head; 0 picks the width
  /// that matches a Cliqueformer encoder + predictor parameter count.
  Index head_hidden = 0;
  double dropout = 0.1;
  Activation activation = Activation::kGelu;
};

/// Tokenizer + transformer blocks + mean-pooled regression head.
class TransformerSurrogate final : public Surrogate {
 public:
  TransformerSurrogate(const TransformerSurrogateConfig& config, Modality modality,
                       Index design_dim, Index vocab, std::uint64_t seed);

  ParameterSet& params() override { return params_; }
  Index input_width() const override;
  Var forward(Tape& tape, const Var& x, const ForwardContext& ctx) override;
  const TransformerSurrogateConfig& config() const { return config_; }

 private:
  TransformerSurrogateConfig config_;
  Modality modality_;
  Index length_;
  Index vocab_;
  double dropout_;
  ParameterSet params_;
  Tokenizer tokenizer_;
  TransformerStack stack_;
  Mlp head_;
};

/// Scalars in the tokenizer, encoder, posterior head and predictor of a
/// Cliqueformer with this config (the decoder is excluded).
std::size_t encoder_predictor_parameter_count(const CliqueformerConfig& config);

/// Transformer surrogate config sharing the Cliqueformer's backbone sizes,
/// with head_hidden chosen so the parameter count matches
/// encoder_predictor_parameter_count(config) as closely as possible.
TransformerSurrogateConfig matched_transformer_config(const CliqueformerConfig& config);

struct SurrogateTrainConfig {
  Index hidden = 256;
  Index steps = 2000;
  Index batch_size = 128;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

/// Conservative objective models: alpha * (mean f on ascended - mean f on data).
struct ComsConfig {
  double alpha = 1.0;
  Index inner_steps = 10;
  double inner_step_size = 0.05;
};

struct SurrogateReport {
  std::vector<double> mse;
  /// Unweighted conservatism gap per step (empty without COMs).
  std::vector<double> regularizer;
  double seconds = 0.0;
};

/// Fits the surrogate to normalized scores by MSE, plus the COMs penalty
/// when `coms` is given.
SurrogateReport train_surrogate(Surrogate& surrogate, const Dataset& data,
                                const SurrogateTrainConfig& config,
                                const ComsConfig* coms = nullptr);

struct AscentConfig {
  Index batch_size = 1000;
  Index steps = 200;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

/// Clamps every length-`vocab` block of each row to [0, 1] and renormalizes
/// it to sum to 1 (uniform if the block clamps to zero).
void project_simplex_blocks(Matrix& x, Index vocab);

/// Adam ascent of the surrogate directly in design space, starting from B
/// dataset rows drawn with replacement. Discrete data ascends the one-hot
/// relaxation with projection, then takes the per-position argmax. Returns
/// designs in dataset representation. `trace` receives the mean surrogate
/// value before each step and at the end.
Matrix ascend_designs(Surrogate& surrogate, const Dataset& data, const AscentConfig& config,
                      std::vector<double>* trace = nullptr);

struct RwrConfig {
  /// Temperature as a fraction of the normalized score range.
  double beta = 0.1;
  Index iterations = 10;
  Index samples = 1000;
  double variance_floor = 1e-4;
};

/// exp((y - max y) / beta), normalized to sum 1. beta may be +infinity.
/// Throws on beta <= 0 or degenerate weights.
Vector rwr_weights(const Vector& y, double beta);

/// Policy over designs: diagonal Gaussian (continuous) or independent
/// per-position categoricals (discrete, rows of `probs` sum to 1).
struct RwrPolicy {
  Modality modality = Modality::kContinuous;
  Vector mean;
  Vector variance;
  Matrix probs;  // L x vocab

  /// Weighted maximum-likelihood fit to design rows.
  static RwrPolicy fit(const Matrix& designs, const Vector& weights, Modality modality,
                       Index vocab, double variance_floor);
  Matrix sample(Index n, Rng& rng) const;
};

struct BaselineConfig {
  SurrogateTrainConfig train;
  AscentConfig ascent;
  RwrConfig rwr;
  ComsConfig coms;
  TransformerSurrogateConfig transformer;
};

struct BaselineRun {
  Matrix designs;
  SurrogateReport report;
  std::vector<double> trace;
};

BaselineRun grad_ascent_baseline(const Dataset& data, const BaselineConfig& config);
BaselineRun rwr_baseline(const Dataset& data, const BaselineConfig& config);
BaselineRun coms_baseline(const Dataset& data, const BaselineConfig& config);
BaselineRun transformer_baseline(const Dataset& data, const BaselineConfig& config);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_BASELINES_HPP_
