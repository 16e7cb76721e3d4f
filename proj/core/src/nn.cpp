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

#include "cliqueformer/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "cliqueformer/rng.hpp"

namespace cliqueformer {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kGelu:
      return "gelu";
    case Activation::kLeakyRelu:
      return "leaky_relu";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view s) {
  if (s == "gelu") return Activation::kGelu;
  if (s == "leaky_relu") return Activation::kLeakyRelu;
  throw std::invalid_argument("unknown activation: " + std::string(s));
}

Var activate(const Var& x, Activation a) {
  switch (a) {
    case Activation::kGelu:
      return gelu(x);
    case Activation::kLeakyRelu:
      return leaky_relu(x, 0.3);
  }
  throw std::logic_error("unhandled activation");
}

Var maybe_dropout(const Var& x, const ForwardContext& ctx) {
  if (!ctx.training() || ctx.dropout <= 0.0) return x;
  if (ctx.rng == nullptr) throw std::logic_error("training-mode forward pass without an rng");
  return dropout(x, ctx.dropout, *ctx.rng);
}

Linear Linear::create(ParameterSet& params, const std::string& name, Index in, Index out,
                      Rng& rng, bool bias) {
  Linear l;
  l.in = in;
  l.out = out;
  l.has_bias = bias;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  l.weight = params.add(name + ".weight", rng.uniform_matrix(in, out, -bound, bound));
  if (bias) l.bias = params.add(name + ".bias", rng.uniform_matrix(1, out, -bound, bound));
  return l;
}

Var Linear::operator()(Tape& tape, ParameterSet& params, const Var& x) const {
  Var y = matmul(x, tape.param(params, weight));
  if (has_bias) y = add_row(y, tape.param(params, bias));
  return y;
}

LayerNorm LayerNorm::create(ParameterSet& params, const std::string& name, Index width) {
  LayerNorm ln;
  ln.gain = params.add(name + ".gain", Matrix::Ones(1, width));
  ln.bias = params.add(name + ".bias", Matrix::Zero(1, width));
  return ln;
}

Var LayerNorm::operator()(Tape& tape, ParameterSet& params, const Var& x) const {
  return layer_norm(x, tape.param(params, gain), tape.param(params, bias));
}

SelfAttention SelfAttention::create(ParameterSet& params, const std::string& name, Index width,
                                    Index heads, Rng& rng) {
  if (heads < 1 || width % heads != 0) {
    throw std::invalid_argument("attention width " + std::to_string(width) +
                                " not divisible by " + std::to_string(heads) + " heads");
  }
  SelfAttention a;
  a.heads = heads;
  a.query = Linear::create(params, name + ".query", width, width, rng);
  a.key = Linear::create(params, name + ".key", width, width, rng, /*bias=*/false);
  a.value = Linear::create(params, name + ".value", width, width, rng);
  a.output = Linear::create(params, name + ".output", width, width, rng);
  return a;
}

Var SelfAttention::operator()(Tape& tape, ParameterSet& params, const Var& x,
                              Index seq_len) const {
  Var q = query(tape, params, x);
  Var k = key(tape, params, x);
  Var v = value(tape, params, x);
  return output(tape, params, attention(q, k, v, seq_len, heads));
}

TransformerBlock TransformerBlock::create(ParameterSet& params, const std::string& name,
                                          Index width, Index heads, Index ff_hidden,
                                          Activation activation, Rng& rng) {
  TransformerBlock b;
  b.norm_attn = LayerNorm::create(params, name + ".norm_attn", width);
  b.attn = SelfAttention::create(params, name + ".attn", width, heads, rng);
  b.norm_ff = LayerNorm::create(params, name + ".norm_ff", width);
  b.ff_in = Linear::create(params, name + ".ff_in", width, ff_hidden, rng);
  b.ff_out = Linear::create(params, name + ".ff_out", ff_hidden, width, rng);
  b.activation = activation;
  return b;
}

Var TransformerBlock::operator()(Tape& tape, ParameterSet& params, const Var& x, Index seq_len,
                                 const ForwardContext& ctx) const {
  Var h = add(x, maybe_dropout(attn(tape, params, norm_attn(tape, params, x), seq_len), ctx));
  Var f = maybe_dropout(activate(ff_in(tape, params, norm_ff(tape, params, h)), activation), ctx);
  return add(h, maybe_dropout(ff_out(tape, params, f), ctx));
}

Mlp Mlp::create(ParameterSet& params, const std::string& name, const std::vector<Index>& widths,
                Activation activation, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp needs at least input and output widths");
  Mlp m;
  m.activation = activation;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(
        Linear::create(params, name + ".layer" + std::to_string(i), widths[i], widths[i + 1], rng));
  }
  return m;
}

Var Mlp::operator()(Tape& tape, ParameterSet& params, const Var& x,
                    const ForwardContext& ctx) const {
  Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](tape, params, h);
    if (i + 1 < layers.size()) h = maybe_dropout(activate(h, activation), ctx);
  }
  return h;
}

}  // namespace cliqueformer
