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

// Layer building blocks. Each layer stores indices into a ParameterSet owned
// by the enclosing model, so models stay copyable and checkpoints only need
// the ParameterSet.

#ifndef CLIQUEFORMER_NN_HPP_
#define CLIQUEFORMER_NN_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cliqueformer/autodiff.hpp"

namespace cliqueformer {

class Rng;

enum class Mode { kTrain, kEval };
enum class Activation { kGelu, kLeakyRelu };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

/// Dropout is active only in kTrain mode, which also requires an rng.
struct ForwardContext {
  Mode mode = Mode::kEval;
  double dropout = 0.0;
  Rng* rng = nullptr;

  bool training() const { return mode == Mode::kTrain; }
  static ForwardContext eval() { return {}; }
  static ForwardContext train(double p, Rng& r) { return {Mode::kTrain, p, &r}; }
};

Var activate(const Var& x, Activation a);
Var maybe_dropout(const Var& x, const ForwardContext& ctx);

struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  bool has_bias = true;
  Index in = 0;
  Index out = 0;

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) init for weight and bias.
  static Linear create(ParameterSet& params, const std::string& name, Index in, Index out,
                       Rng& rng, bool bias = true);
  Var operator()(Tape& tape, ParameterSet& params, const Var& x) const;
};

struct LayerNorm {
  std::size_t gain = 0;
  std::size_t bias = 0;

  static LayerNorm create(ParameterSet& params, const std::string& name, Index width);
  Var operator()(Tape& tape, ParameterSet& params, const Var& x) const;
};

struct SelfAttention {
  Linear query;
  Linear key;  // no bias: it would shift every score in a row equally
  Linear value;
  Linear output;
  Index heads = 1;

  static SelfAttention create(ParameterSet& params, const std::string& name, Index width,
                              Index heads, Rng& rng);
  /// x is (B*seq_len) x width.
  Var operator()(Tape& tape, ParameterSet& params, const Var& x, Index seq_len) const;
};

/// Pre-norm block: h = x + drop(attn(LN(x))); out = h + drop(ff(LN(h))).
struct TransformerBlock {
  LayerNorm norm_attn;
  SelfAttention attn;
  LayerNorm norm_ff;
  Linear ff_in;
  Linear ff_out;
  Activation activation = Activation::kGelu;

  static TransformerBlock create(ParameterSet& params, const std::string& name, Index width,
                                 Index heads, Index ff_hidden, Activation activation, Rng& rng);
  Var operator()(Tape& tape, ParameterSet& params, const Var& x, Index seq_len,
                 const ForwardContext& ctx) const;
};

/// Stack of Linear layers with activation and dropout between them; the last
/// layer is affine.
struct Mlp {
  std::vector<Linear> layers;
  Activation activation = Activation::kGelu;

  static Mlp create(ParameterSet& params, const std::string& name,
                    const std::vector<Index>& widths, Activation activation, Rng& rng);
  Var operator()(Tape& tape, ParameterSet& params, const Var& x,
                 const ForwardContext& ctx) const;
};

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_NN_HPP_
