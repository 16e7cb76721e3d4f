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

#include "cliqueformer/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cliqueformer/optim.hpp"
#include "cliqueformer/rng.hpp"

namespace cliqueformer {

// ---------------------------------------------------------------------------
// Surrogates

Vector Surrogate::predict(const Matrix& x) {
  Tape tape;
  return forward(tape, tape.constant(x), ForwardContext::eval()).value().col(0);
}

Vector Surrogate::predict_with_grad(const Matrix& x, Matrix& grad) {
  Tape tape;
  Var xv = tape.input(x);
  Var out = forward(tape, xv, ForwardContext::eval());
  tape.backward(out, Matrix::Ones(out.rows(), 1));
  grad = xv.grad();
  params().zero_grad();
  return out.value().col(0);
}

SurrogateMlp::SurrogateMlp(Index input_width, Index hidden, std::uint64_t seed,
                           Activation activation)
    : input_width_(input_width) {
  if (input_width < 1 || hidden < 1) throw std::invalid_argument("SurrogateMlp: bad widths");
  Rng rng(seed);
  net_ = Mlp::create(params_, "mlp", {input_width, hidden, hidden, 1}, activation, rng);
}

Var SurrogateMlp::forward(Tape& tape, const Var& x, const ForwardContext& ctx) {
  if (x.cols() != input_width_) throw ShapeError("SurrogateMlp: input width mismatch");
  return net_(tape, params_, x, ctx);
}

TransformerSurrogate::TransformerSurrogate(const TransformerSurrogateConfig& config,
                                           Modality modality, Index design_dim, Index vocab,
                                           std::uint64_t seed)
    : config_(config),
      modality_(modality),
      length_(design_dim),
      vocab_(vocab),
      dropout_(config.dropout) {
  if (config.head_hidden < 1) {
    throw std::invalid_argument("TransformerSurrogate: head_hidden must be resolved (>= 1)");
  }
  Rng rng(seed);
  tokenizer_ = Tokenizer::create(params_, "tokenizer", modality, design_dim, vocab,
                                 config.d_model, rng);
  stack_ = TransformerStack::create(params_, "encoder", config.n_blocks, config.d_model,
                                    config.n_heads, config.ff_hidden, config.activation, rng);
  head_ = Mlp::create(params_, "head",
                      {config.d_model, config.head_hidden, config.head_hidden, 1},
                      config.activation, rng);
}

Index TransformerSurrogate::input_width() const {
  return modality_ == Modality::kDiscrete ? length_ * vocab_ : length_;
}

Var TransformerSurrogate::forward(Tape& tape, const Var& x, const ForwardContext& ctx) {
  const Index batch = x.rows();
  ForwardContext inner = ctx;
  inner.dropout = ctx.training() ? dropout_ : 0.0;
  Var tokens = stack_(tape, params_, tokenizer_(tape, params_, x), length_, inner);
  // Mean over positions: B x (L*W) times a stack of scaled identities.
  const Index w = config_.d_model;
  Matrix pool(length_ * w, w);
  for (Index k = 0; k < length_; ++k) {
    pool.middleRows(k * w, w) = Matrix::Identity(w, w) / static_cast<double>(length_);
  }
  Var pooled = matmul(reshape(tokens, batch, length_ * w), tape.constant(std::move(pool)));
  return head_(tape, params_, pooled, inner);
}

std::size_t encoder_predictor_parameter_count(const CliqueformerConfig& config) {
  const Cliqueformer model(config, 0);
  std::size_t n = 0;
  for (const auto& p : model.params()) {
    if (p.name.rfind("decoder.", 0) == 0) continue;
    n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

TransformerSurrogateConfig matched_transformer_config(const CliqueformerConfig& config) {
  TransformerSurrogateConfig t;
  t.d_model = config.d_model;
  t.n_blocks = config.n_blocks;
  t.n_heads = config.n_heads;
  t.ff_hidden = config.ff_hidden;
  t.activation = config.activation;
  const double target = static_cast<double>(encoder_predictor_parameter_count(config));

  // The head adds h^2 + (d_model + 3) h + 1 scalars on top of the backbone.
  t.head_hidden = 1;
  TransformerSurrogate probe(t, config.modality, config.design_dim, config.vocab, 0);
  double backbone = 0.0;
  for (const auto& p : probe.params()) {
    if (p.name.rfind("head.", 0) != 0) backbone += static_cast<double>(p.value.size());
  }
  const double rest = target - backbone - 1.0;
  const double b = static_cast<double>(config.d_model + 3);
  const double h = rest > 0.0 ? (-b + std::sqrt(b * b + 4.0 * rest)) / 2.0 : 1.0;
  t.head_hidden = std::max<Index>(1, static_cast<Index>(std::llround(h)));
  return t;
}

// ---------------------------------------------------------------------------
// Surrogate training

namespace {

Vector normalized_targets(const Dataset& data) {
  Vector t(data.size());
  for (Index i = 0; i < data.size(); ++i) t(i) = normalize_score(data.stats, data.scores(i));
  return t;
}

/// One ascent step on rows of x (relaxed design space), projected for discrete data.
void inner_ascent(Surrogate& s, Matrix& x, const ComsConfig& coms, Modality modality,
                  Index vocab) {
  Matrix grad;
  for (Index a = 0; a < coms.inner_steps; ++a) {
    s.predict_with_grad(x, grad);
    x += coms.inner_step_size * grad;
    if (modality == Modality::kDiscrete) project_simplex_blocks(x, vocab);
    if (!x.allFinite()) {
      throw std::runtime_error("coms: non-finite inner iterate at inner step " +
                               std::to_string(a));
    }
  }
}

}  // namespace

SurrogateReport train_surrogate(Surrogate& surrogate, const Dataset& data,
                                const SurrogateTrainConfig& config, const ComsConfig* coms) {
  data.validate();
  if (data.input_width() != surrogate.input_width()) {
    throw ShapeError("train_surrogate: dataset width does not match the surrogate");
  }
  if (config.batch_size < 1) throw std::invalid_argument("train_surrogate: batch_size < 1");
  if (coms != nullptr && (coms->alpha < 0.0 || coms->inner_steps < 0)) {
    throw std::invalid_argument("train_surrogate: COMs needs alpha >= 0 and inner_steps >= 0");
  }
  const auto start = std::chrono::steady_clock::now();
  const Vector targets_all = normalized_targets(data);
  const Index n = data.size();
  const Index batch = std::min(config.batch_size, n);

  Rng root(config.seed);
  Rng shuffle = root.split(1);
  std::vector<std::size_t> order = shuffle.permutation(static_cast<std::size_t>(n));
  std::size_t cursor = 0;
  std::vector<std::size_t> rows(static_cast<std::size_t>(batch));
  Vector targets(batch);
  OptimizerState opt(AdamWOptions{config.lr, 0.9, 0.999, 1e-8, config.weight_decay});

  SurrogateReport report;
  for (Index step = 0; step < config.steps; ++step) {
    if (cursor + rows.size() > order.size()) {
      order = shuffle.permutation(static_cast<std::size_t>(n));
      cursor = 0;
    }
    for (Index b = 0; b < batch; ++b) {
      rows[static_cast<std::size_t>(b)] = order[cursor++];
      targets(b) = targets_all(static_cast<Index>(rows[static_cast<std::size_t>(b)]));
    }
    const Matrix inputs = data.model_inputs(rows);

    Matrix ascended;
    if (coms != nullptr) {
      ascended = inputs;
      inner_ascent(surrogate, ascended, *coms, data.modality, data.vocab);
    }

    surrogate.params().zero_grad();
    Tape tape;
    Var pred = surrogate.forward(tape, tape.constant(inputs), ForwardContext::eval());
    Var mse = mean_all(square(sub(pred, tape.constant(targets))));
    Var loss = mse;
    if (coms != nullptr) {
      // The ascended batch is a constant: no gradient flows through the ascent.
      Var f_adv = surrogate.forward(tape, tape.constant(std::move(ascended)),
                                    ForwardContext::eval());
      Var gap = sub(mean_all(f_adv), mean_all(pred));
      report.regularizer.push_back(gap.scalar());
      loss = add(loss, scale(gap, coms->alpha));
    }
    if (!std::isfinite(loss.scalar())) {
      throw std::runtime_error("train_surrogate: non-finite loss at step " +
                               std::to_string(step));
    }
    report.mse.push_back(mse.scalar());
    tape.backward(loss);
    adamw_update(surrogate.params(), opt);
  }
  surrogate.params().zero_grad();
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Design-space ascent

void project_simplex_blocks(Matrix& x, Index vocab) {
  if (vocab < 1 || x.cols() % vocab != 0) {
    throw ShapeError("project_simplex_blocks: width not a multiple of vocab");
  }
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); c += vocab) {
      auto block = x.row(r).segment(c, vocab);
      block = block.cwiseMax(0.0).cwiseMin(1.0);
      const double s = block.sum();
      if (s > 0.0) {
        block /= s;
      } else {
        block.setConstant(1.0 / static_cast<double>(vocab));
      }
    }
  }
}

Matrix ascend_designs(Surrogate& surrogate, const Dataset& data, const AscentConfig& config,
                      std::vector<double>* trace) {
  if (data.size() < 1) throw std::invalid_argument("ascend_designs: empty dataset");
  if (config.batch_size < 1 || config.steps < 0) {
    throw std::invalid_argument("ascend_designs: need batch_size >= 1 and steps >= 0");
  }
  Rng rng(config.seed);
  std::vector<std::size_t> rows(static_cast<std::size_t>(config.batch_size));
  for (auto& r : rows) r = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(data.size())));
  Matrix x = data.model_inputs(rows);
  const bool discrete = data.modality == Modality::kDiscrete;

  OptimizerState opt(AdamWOptions{config.lr, 0.9, 0.999, 1e-8, 0.0});
  Matrix grad;
  for (Index step = 0; step < config.steps; ++step) {
    const Vector v = surrogate.predict_with_grad(x, grad);
    if (trace != nullptr) trace->push_back(v.mean());
    grad = -grad;
    adamw_update(x, grad, opt);
    if (discrete) project_simplex_blocks(x, data.vocab);
    if (!x.allFinite()) {
      throw std::runtime_error("ascend_designs: non-finite design after step " +
                               std::to_string(step));
    }
  }
  if (trace != nullptr) trace->push_back(surrogate.predict(x).mean());
  if (discrete) return argmax_symbols(x, data.vocab);
  return x;
}

// ---------------------------------------------------------------------------
// Reward-weighted regression

Vector rwr_weights(const Vector& y, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("rwr_weights: beta must be positive");
  if (y.size() == 0) throw std::invalid_argument("rwr_weights: no scores");
  const double top = y.maxCoeff();
  Vector w = ((y.array() - top) / beta).exp().matrix();
  const double s = w.sum();
  if (!(s > 0.0) || !std::isfinite(s)) throw std::runtime_error("rwr_weights: degenerate weights");
  return w / s;
}

RwrPolicy RwrPolicy::fit(const Matrix& designs, const Vector& weights, Modality modality,
                         Index vocab, double variance_floor) {
  if (designs.rows() != weights.size() || designs.rows() == 0) {
    throw ShapeError("RwrPolicy::fit: designs/weights mismatch");
  }
  const Vector w = weights / weights.sum();
  RwrPolicy p;
  p.modality = modality;
  if (modality == Modality::kContinuous) {
    p.mean = designs.transpose() * w;
    const Matrix centered = designs.rowwise() - p.mean.transpose();
    p.variance = (centered.array().square().matrix().transpose() * w).array().max(variance_floor);
    return p;
  }
  const Index len = designs.cols();
  p.probs = Matrix::Zero(len, vocab);
  for (Index r = 0; r < designs.rows(); ++r) {
    for (Index k = 0; k < len; ++k) p.probs(k, static_cast<Index>(designs(r, k))) += w(r);
  }
  // Light smoothing keeps every symbol reachable.
  p.probs = (p.probs.array() + 1e-3).matrix();
  for (Index k = 0; k < len; ++k) p.probs.row(k) /= p.probs.row(k).sum();
  return p;
}

Matrix RwrPolicy::sample(Index n, Rng& rng) const {
  if (modality == Modality::kContinuous) {
    Matrix out = rng.normal_matrix(n, mean.size());
    const Vector sd = variance.array().sqrt();
    for (Index r = 0; r < n; ++r) {
      out.row(r) = (out.row(r).array() * sd.transpose().array() + mean.transpose().array()).matrix();
    }
    return out;
  }
  Matrix out(n, probs.rows());
  for (Index r = 0; r < n; ++r) {
    for (Index k = 0; k < probs.rows(); ++k) {
      const double u = rng.uniform();
      double acc = 0.0;
      Index s = probs.cols() - 1;
      for (Index v = 0; v < probs.cols(); ++v) {
        acc += probs(k, v);
        if (u < acc) {
          s = v;
          break;
        }
      }
      out(r, k) = static_cast<double>(s);
    }
  }
  return out;
}

namespace {

Matrix to_inputs(const Matrix& designs, const Dataset& like) {
  return like.modality == Modality::kDiscrete ? one_hot(designs, like.vocab) : designs;
}

}  // namespace

// ---------------------------------------------------------------------------
// Baseline pipelines

BaselineRun grad_ascent_baseline(const Dataset& data, const BaselineConfig& config) {
  SurrogateMlp mlp(data.input_width(), config.train.hidden, config.train.seed);
  BaselineRun run;
  run.report = train_surrogate(mlp, data, config.train);
  run.designs = ascend_designs(mlp, data, config.ascent, &run.trace);
  return run;
}

BaselineRun coms_baseline(const Dataset& data, const BaselineConfig& config) {
  SurrogateMlp mlp(data.input_width(), config.train.hidden, config.train.seed);
  BaselineRun run;
  run.report = train_surrogate(mlp, data, config.train, &config.coms);
  run.designs = ascend_designs(mlp, data, config.ascent, &run.trace);
  return run;
}

BaselineRun transformer_baseline(const Dataset& data, const BaselineConfig& config) {
  TransformerSurrogateConfig tc = config.transformer;
  if (tc.head_hidden < 1) tc.head_hidden = config.train.hidden;
  TransformerSurrogate net(tc, data.modality, data.design_dim(), data.vocab, config.train.seed);
  BaselineRun run;
  run.report = train_surrogate(net, data, config.train);
  run.designs = ascend_designs(net, data, config.ascent, &run.trace);
  return run;
}

BaselineRun rwr_baseline(const Dataset& data, const BaselineConfig& config) {
  const RwrConfig& rc = config.rwr;
  if (!(rc.beta > 0.0)) throw std::invalid_argument("rwr_baseline: beta must be positive");
  SurrogateMlp mlp(data.input_width(), config.train.hidden, config.train.seed);
  BaselineRun run;
  run.report = train_surrogate(mlp, data, config.train);

  // Scores are normalized to the visible range, so beta is already a
  // fraction of y_max - y_min.
  Vector y(data.size());
  for (Index i = 0; i < data.size(); ++i) y(i) = normalize_score(data.stats, data.scores(i));
  RwrPolicy policy = RwrPolicy::fit(data.designs, rwr_weights(y, rc.beta), data.modality,
                                    data.vocab, rc.variance_floor);
  Rng rng = Rng(config.ascent.seed).split(11);
  for (Index it = 0; it < rc.iterations; ++it) {
    const Matrix samples = policy.sample(rc.samples, rng);
    const Vector pred = mlp.predict(to_inputs(samples, data));
    run.trace.push_back(pred.mean());
    policy = RwrPolicy::fit(samples, rwr_weights(pred, rc.beta), data.modality, data.vocab,
                            rc.variance_floor);
  }
  run.designs = policy.sample(config.ascent.batch_size, rng);
  return run;
}

}  // namespace cliqueformer
