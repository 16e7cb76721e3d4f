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

#include "cliqueformer/model.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "cliqueformer/rng.hpp"

namespace cliqueformer {

Index CliqueformerConfig::input_width() const {
  return modality == Modality::kContinuous ? design_dim : design_dim * vocab;
}

void CliqueformerConfig::validate() const {
  if (d_model < 2 || d_model % 2 != 0) {
    throw std::invalid_argument("d_model must be even and >= 2");
  }
  if (n_heads < 1 || d_model % n_heads != 0) {
    throw std::invalid_argument("d_model must be divisible by n_heads");
  }
  if (n_blocks < 0) throw std::invalid_argument("n_blocks must be >= 0");
  if (mlp_hidden < 1 || ff_hidden < 1) throw std::invalid_argument("hidden widths must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (design_dim < 1) throw std::invalid_argument("design_dim must be >= 1");
  if (modality == Modality::kDiscrete && vocab < 2) {
    throw std::invalid_argument("discrete designs need vocab >= 2");
  }
}

Vector clique_embedding(const CliqueLayout& layout, int i, Index embed_dim, Index d_model) {
  if (i < 1 || i > layout.n_clique()) {
    throw std::out_of_range("clique_embedding: clique " + std::to_string(i) + " outside [1, " +
                            std::to_string(layout.n_clique()) + "]");
  }
  if (embed_dim < 0 || embed_dim % 2 != 0) {
    throw std::invalid_argument("clique_embedding: embed_dim must be even");
  }
  Vector c(embed_dim);
  for (Index j = 0; j < embed_dim / 2; ++j) {
    const double omega =
        std::pow(10.0, -8.0 * static_cast<double>(j) / static_cast<double>(d_model));
    c(2 * j) = std::sin(static_cast<double>(i) * omega);
    c(2 * j + 1) = std::cos(static_cast<double>(i) * omega);
  }
  return c;
}

Matrix clique_embedding_table(const CliqueLayout& layout, Index embed_dim, Index d_model) {
  Matrix table(layout.n_clique(), embed_dim);
  for (int i = 1; i <= layout.n_clique(); ++i) {
    table.row(i - 1) = clique_embedding(layout, i, embed_dim, d_model).transpose();
  }
  return table;
}

// ---------------------------------------------------------------------------

Tokenizer Tokenizer::create(ParameterSet& params, const std::string& name, Modality modality,
                            Index length, Index vocab, Index width, Rng& rng) {
  Tokenizer t;
  t.modality = modality;
  t.length = length;
  t.vocab = vocab;
  if (modality == Modality::kContinuous) {
    t.scale = params.add(name + ".scale", rng.normal_matrix(length, width));
  } else {
    t.embedding = params.add(name + ".embedding", rng.normal_matrix(vocab, width));
  }
  t.position = params.add(name + ".position", rng.normal_matrix(length, width, 0.02));
  return t;
}

Var Tokenizer::operator()(Tape& tape, ParameterSet& params, const Var& x) const {
  if (modality == Modality::kContinuous) {
    if (x.cols() != length) {
      throw ShapeError("tokenizer: expected " + std::to_string(length) + " inputs, got " +
                       std::to_string(x.cols()));
    }
    return position_affine(x, tape.param(params, scale), tape.param(params, position));
  }
  if (x.cols() != length * vocab) {
    throw ShapeError("tokenizer: expected one-hot width " + std::to_string(length * vocab) +
                     ", got " + std::to_string(x.cols()));
  }
  const Index batch = x.rows();
  Var symbols = matmul(reshape(x, batch * length, vocab), tape.param(params, embedding));
  return add(symbols, tile_rows(tape.param(params, position), batch));
}

TransformerStack TransformerStack::create(ParameterSet& params, const std::string& name,
                                          Index n_blocks, Index width, Index heads,
                                          Index ff_hidden, Activation activation, Rng& rng) {
  TransformerStack s;
  for (Index b = 0; b < n_blocks; ++b) {
    s.blocks.push_back(TransformerBlock::create(params, name + ".block" + std::to_string(b),
                                                width, heads, ff_hidden, activation, rng));
  }
  s.final_norm = LayerNorm::create(params, name + ".norm", width);
  return s;
}

Var TransformerStack::operator()(Tape& tape, ParameterSet& params, const Var& tokens,
                                 Index seq_len, const ForwardContext& ctx) const {
  Var h = tokens;
  for (const auto& block : blocks) h = block(tape, params, h, seq_len, ctx);
  return final_norm(tape, params, h);
}

// ---------------------------------------------------------------------------

Cliqueformer::Cliqueformer(CliqueformerConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  build(rng);
}

Cliqueformer::Cliqueformer(CliqueformerConfig config, ParameterSet params)
    : config_(std::move(config)) {
  config_.validate();
  Rng rng(0);
  build(rng);
  if (params.size() != params_.size()) {
    throw std::invalid_argument("checkpoint has " + std::to_string(params.size()) +
                                " tensors, architecture expects " +
                                std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& want = params_[i];
    const Parameter& got = params[i];
    if (want.name != got.name || want.value.rows() != got.value.rows() ||
        want.value.cols() != got.value.cols()) {
      throw std::invalid_argument("checkpoint tensor '" + got.name +
                                  "' does not match architecture tensor '" + want.name + "'");
    }
  }
  params_ = std::move(params);
}

void Cliqueformer::build(Rng& rng) {
  const auto& c = config_;
  const Index n = c.layout.n_clique();
  const Index dc = c.layout.clique_dim();
  const Index dz = c.latent_dim();

  tokenizer_ = Tokenizer::create(params_, "tokenizer", c.modality, c.design_dim, c.vocab,
                                 c.d_model, rng);
  encoder_ = TransformerStack::create(params_, "encoder", c.n_blocks, c.d_model, c.n_heads,
                                      c.ff_hidden, c.activation, rng);
  posterior_head_ =
      Linear::create(params_, "encoder.posterior", c.design_dim * c.d_model, 2 * dz, rng);
  predictor_ = Mlp::create(params_, "predictor",
                           {dc + c.clique_embed_dim(), c.mlp_hidden, c.mlp_hidden, 1},
                           c.activation, rng);
  decoder_input_ = Linear::create(params_, "decoder.input", dc, c.d_model, rng);
  decoder_ = TransformerStack::create(params_, "decoder", c.n_blocks, c.d_model, c.n_heads,
                                      c.ff_hidden, c.activation, rng);
  decoder_head_ = Linear::create(params_, "decoder.head", n * c.d_model, c.input_width(), rng);

  predictor_embedding_ = clique_embedding_table(c.layout, c.clique_embed_dim(), c.d_model);
  decoder_embedding_ = clique_embedding_table(c.layout, c.d_model, c.d_model);
}

Var Cliqueformer::tokenize(Tape& tape, const Matrix& x) {
  return tokenizer_(tape, params_, tape.constant(x));
}

PosteriorVars Cliqueformer::encode(Tape& tape, const Matrix& x, const ForwardContext& ctx) {
  if (x.cols() != config_.input_width()) {
    throw ShapeError("encode: expected input width " + std::to_string(config_.input_width()) +
                     ", got " + std::to_string(x.cols()));
  }
  const Index batch = x.rows();
  const Index len = config_.design_dim;
  const Index dz = config_.latent_dim();
  Var tokens = tokenize(tape, x);
  Var h = encoder_(tape, params_, tokens, len, ctx);
  Var flat = reshape(h, batch, len * config_.d_model);
  Var head = posterior_head_(tape, params_, flat);
  PosteriorVars out;
  out.mean = slice_cols(head, 0, dz);
  out.log_variance = clamp(slice_cols(head, dz, dz), kLogVarianceMin, kLogVarianceMax);
  return out;
}

Var Cliqueformer::predict_cliques(Tape& tape, const Var& z, const ForwardContext& ctx) {
  const Index batch = z.rows();
  Var cliques = gather_cliques(z, config_.layout);
  Var embed = tape.constant(predictor_embedding_);
  Var inputs = concat_cols(cliques, tile_rows(embed, batch));
  Var out = predictor_(tape, params_, inputs, ctx);
  return reshape(out, batch, config_.layout.n_clique());
}

Var Cliqueformer::predict(Tape& tape, const Var& z, const ForwardContext& ctx) {
  return row_mean(predict_cliques(tape, z, ctx));
}

Var Cliqueformer::decode(Tape& tape, const Var& z, const ForwardContext& ctx) {
  const Index batch = z.rows();
  const Index n = config_.layout.n_clique();
  Var cliques = gather_cliques(z, config_.layout);
  Var tokens = add(decoder_input_(tape, params_, cliques),
                   tile_rows(tape.constant(decoder_embedding_), batch));
  Var h = decoder_(tape, params_, tokens, n, ctx);
  return decoder_head_(tape, params_, reshape(h, batch, n * config_.d_model));
}

PosteriorBatch Cliqueformer::encode_eval(const Matrix& x) {
  Tape tape;
  PosteriorVars q = encode(tape, x, ForwardContext::eval());
  return {q.mean.value(), q.log_variance.value()};
}

Vector Cliqueformer::predict_eval(const Matrix& z) {
  Tape tape;
  return predict(tape, tape.constant(z), ForwardContext::eval()).value().col(0);
}

Matrix Cliqueformer::decode_eval(const Matrix& z) {
  Tape tape;
  return decode(tape, tape.constant(z), ForwardContext::eval()).value();
}

Matrix Cliqueformer::decode_designs(const Matrix& z, DecodeMode mode, Rng* rng) {
  Matrix out = decode_eval(z);
  if (config_.modality == Modality::kContinuous) return out;
  if (mode == DecodeMode::kArgmax) return argmax_symbols(out, config_.vocab);
  if (rng == nullptr) throw std::invalid_argument("decode_designs: sampling needs an rng");
  const Index v = config_.vocab;
  Matrix symbols(out.rows(), config_.design_dim);
  for (Index r = 0; r < out.rows(); ++r) {
    for (Index p = 0; p < config_.design_dim; ++p) {
      const auto logits = out.row(r).segment(p * v, v);
      const Eigen::ArrayXd w = (logits.array() - logits.maxCoeff()).exp().transpose();
      double u = rng->uniform() * w.sum();
      Index pick = v - 1;
      for (Index s = 0; s < v; ++s) {
        u -= w(s);
        if (u < 0.0) {
          pick = s;
          break;
        }
      }
      symbols(r, p) = static_cast<double>(pick);
    }
  }
  return symbols;
}

}  // namespace cliqueformer
