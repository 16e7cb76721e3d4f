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

#ifndef CLIQUEFORMER_DESIGN_HPP_
#define CLIQUEFORMER_DESIGN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "cliqueformer/model.hpp"
#include "cliqueformer/tasks.hpp"

namespace cliqueformer {

class Rng;

/// How latent shrinkage is applied during ascent.
enum class DecayMode {
  /// Decoupled AdamW decay at rate weight_decay (one mechanism).
  kAdamW,
  /// z <- (1 - weight_decay) z before each plain Adam step.
  kExplicit,
};

struct DesignOptConfig {
  Index batch_size = 1000;
  Index steps = 50;
  double lr = 3e-4;
  double weight_decay = 0.5;
  DecodeMode decode = DecodeMode::kArgmax;
  DecayMode decay = DecayMode::kAdamW;
  std::uint64_t seed = 0;
};

struct DesignBatch {
  std::vector<std::size_t> source_rows;  // dataset rows the candidates started from
  Matrix initial_latents;                // B x d_z
  Matrix latents;                        // B x d_z after ascent
  std::vector<double> surrogate_trace;   // mean surrogate value before each step and at the end
  Matrix designs;                        // decoded candidates, one per row
};

/// Per-row surrogate values of Z (B x d) with per-row gradients written into
/// `grad` (resized by the callee).
using RowSurrogate = std::function<Vector(const Matrix& z, Matrix& grad)>;

/// Samples B dataset rows with replacement and encodes them (eval mode,
/// reparameterized sample).
DesignBatch init_designs(Cliqueformer& model, const Dataset& data, const DesignOptConfig& config,
                         Rng& rng);

/// Mean of predict over rows. If `grad` is given it receives the gradient of
/// that mean: row b holds d predict(z_b)/dz_b divided by B.
double objective(Cliqueformer& model, const Matrix& z, Matrix* grad = nullptr);

/// Predict values and per-row gradients for every row of z.
RowSurrogate model_surrogate(Cliqueformer& model);

/// Runs config.steps ascent steps on the rows of z, maximizing the
/// surrogate. Returns the mean-surrogate trace (steps + 1 entries).
/// Throws std::runtime_error if a latent becomes non-finite.
std::vector<double> ascend_latents(const RowSurrogate& surrogate, Matrix& z,
                                   const DesignOptConfig& config);

/// init_designs + ascend_latents + decode. Model parameters are not modified.
DesignBatch optimize_designs(Cliqueformer& model, const Dataset& data,
                             const DesignOptConfig& config);

/// One row per candidate: index, source_row, then design values.
void write_designs_csv(const Matrix& designs, const std::filesystem::path& path);
Matrix read_designs_csv(const std::filesystem::path& path);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_DESIGN_HPP_
