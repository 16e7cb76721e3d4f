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

#ifndef CLIQUEFORMER_MODEL_HPP_
#define CLIQUEFORMER_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cliqueformer/autodiff.hpp"
#include "cliqueformer/fgm.hpp"
#include "cliqueformer/gaussian.hpp"
#include "cliqueformer/nn.hpp"
#include "cliqueformer/tasks.hpp"

namespace cliqueformer {

class Rng;

struct CliqueformerConfig {
  Index d_model = 64;
  Index n_blocks = 2;
  Index n_heads = 2;
  Index mlp_hidden = 256;
  /// Hidden width of the position-wise feed-forward layer in each block.
  Index ff_hidden = 128;
  CliqueLayout layout{10, 3, 1};
  double dropout = 0.5;
  Activation activation = Activation::kGelu;
  Modality modality = Modality::kContinuous;
  /// d for continuous designs, sequence length L for discrete ones.
  Index design_dim = 0;
  Index vocab = 0;

  Index latent_dim() const { return layout.latent_dim(); }
  /// d_clique rounded up to an even width.
  Index clique_embed_dim() const { return layout.clique_dim() + layout.clique_dim() % 2; }
  Index input_width() const;
  void validate() const;
};

/// Trigonometric embedding of the 1-based clique i:
///   c[2j] = sin(i w_j), c[2j+1] = cos(i w_j), w_j = 10^(-8 j / d_model).
Vector clique_embedding(const CliqueLayout& layout, int i, Index embed_dim, Index d_model);
/// n_clique x embed_dim table whose row i-1 is clique_embedding(layout, i, ...).
Matrix clique_embedding_table(const CliqueLayout& layout, Index embed_dim, Index d_model);

/// Maps raw design rows to token sequences of width d_model.
struct Tokenizer {
  Modality modality = Modality::kContinuous;
  Index length = 0;
  Index vocab = 0;
  std::size_t scale = 0;      // continuous: per-position value embedding, length x width
  std::size_t embedding = 0;  // discrete: vocab x width symbol table
  std::size_t position = 0;   // length x width

  static Tokenizer create(ParameterSet& params, const std::string& name, Modality modality,
                          Index length, Index vocab, Index width, Rng& rng);
  /// x is B x input_width; returns (B * length) x width.
  Var operator()(Tape& tape, ParameterSet& params, const Var& x) const;
};

/// n_blocks pre-norm transformer blocks followed by a final layer norm.
struct TransformerStack {
  std::vector<TransformerBlock> blocks;
  LayerNorm final_norm;

  static TransformerStack create(ParameterSet& params, const std::string& name, Index n_blocks,
                                 Index width, Index heads, Index ff_hidden, Activation activation,
                                 Rng& rng);
  Var operator()(Tape& tape, ParameterSet& params, const Var& tokens, Index seq_len,
                 const ForwardContext& ctx) const;
};

struct PosteriorVars {
  Var mean;
  Var log_variance;
};

/// Batch posterior: row b holds the diagonal Gaussian for example b.
struct PosteriorBatch {
  Matrix mean;
  Matrix log_variance;

  DiagonalGaussian row(Index b) const { return {mean.row(b).transpose(), log_variance.row(b).transpose()}; }
};

enum class DecodeMode { kArgmax, kSample };

class Cliqueformer {
 public:
  Cliqueformer(CliqueformerConfig config, std::uint64_t seed);
  /// Rebuilds the architecture for `config` and adopts `params`, which must
  /// match it name for name and shape for shape.
  Cliqueformer(CliqueformerConfig config, ParameterSet params);

  const CliqueformerConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  Var tokenize(Tape& tape, const Matrix& x);
  PosteriorVars encode(Tape& tape, const Matrix& x, const ForwardContext& ctx);
  /// Per-clique predictor outputs, B x n_clique.
  Var predict_cliques(Tape& tape, const Var& z, const ForwardContext& ctx);
  /// Mean over cliques, B x 1.
  Var predict(Tape& tape, const Var& z, const ForwardContext& ctx);
  /// Continuous: B x d reconstruction means. Discrete: B x (L * vocab) logits.
  Var decode(Tape& tape, const Var& z, const ForwardContext& ctx);

  PosteriorBatch encode_eval(const Matrix& x);
  Vector predict_eval(const Matrix& z);
  Matrix decode_eval(const Matrix& z);
  /// Design rows: reconstruction means, or per-position symbols (argmax, or
  /// sampled from the softmax when mode == kSample).
  Matrix decode_designs(const Matrix& z, DecodeMode mode = DecodeMode::kArgmax,
                        Rng* rng = nullptr);

 private:
  void build(Rng& rng);

  CliqueformerConfig config_;
  ParameterSet params_;
  Tokenizer tokenizer_;
  TransformerStack encoder_;
  Linear posterior_head_;
  Mlp predictor_;
  Linear decoder_input_;
  TransformerStack decoder_;
  Linear decoder_head_;
  Matrix predictor_embedding_;  // n_clique x clique_embed_dim
  Matrix decoder_embedding_;    // n_clique x d_model
};

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_MODEL_HPP_
