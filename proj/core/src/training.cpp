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

#include "cliqueformer/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cliqueformer/optim.hpp"
#include "cliqueformer/rng.hpp"

namespace cliqueformer {

double warmup_coefficient(Index step, Index warmup_steps) {
  if (warmup_steps <= 0) return 1.0;
  if (step <= 0) return 0.0;
  return std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup_steps));
}

double vib_term(const DiagonalGaussian& q, const CliqueLayout& layout, Rng& rng) {
  if (q.dim() != layout.latent_dim()) {
    throw ShapeError("vib_term: posterior has " + std::to_string(q.dim()) +
                     " dims, layout d_z = " + std::to_string(layout.latent_dim()));
  }
  const int i = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(layout.n_clique())));
  const auto idx = clique_indices(layout, i);
  return kl_to_standard_normal(q, idx);
}

Matrix sample_clique_mask(const CliqueLayout& layout, Index batch, Rng& rng) {
  Matrix mask = Matrix::Zero(batch, layout.latent_dim());
  for (Index b = 0; b < batch; ++b) {
    const int i = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(layout.n_clique())));
    mask.row(b).segment(layout.clique_offset(i), layout.clique_dim()).setOnes();
  }
  return mask;
}

LossTerms loss_clique(Cliqueformer& model, Tape& tape, const Matrix& inputs,
                      const Vector& targets, const Matrix& noise, const Matrix& clique_mask,
                      const ForwardContext& ctx, double tau, double vib_coeff) {
  const Index batch = inputs.rows();
  if (batch < 1) throw std::invalid_argument("loss_clique: empty batch");
  if (targets.size() != batch) throw ShapeError("loss_clique: targets/batch size mismatch");

  PosteriorVars q = model.encode(tape, inputs, ctx);
  Var z = reparam_sample(q.mean, q.log_variance, noise);
  Var kl = masked_kl_standard_normal(q.mean, q.log_variance, clique_mask);

  Var recon = model.decode(tape, z, ctx);
  Var nll;
  const auto& cfg = model.config();
  if (cfg.modality == Modality::kContinuous) {
    nll = gaussian_nll(inputs, recon);
  } else {
    const Index len = cfg.design_dim;
    Var per_position = softmax_cross_entropy(reshape(recon, batch * len, cfg.vocab),
                                             Eigen::Map<const Matrix>(inputs.data(),
                                                                      batch * len, cfg.vocab));
    nll = row_sum(reshape(per_position, batch, len));
  }

  Var pred = model.predict(tape, z, ctx);
  Var err = square(sub(pred, tape.constant(targets)));

  LossTerms out;
  out.kl = mean_all(kl);
  out.nll = mean_all(nll);
  out.mse = mean_all(err);
  out.total = add(add(scale(out.kl, vib_coeff), out.nll), scale(out.mse, tau));
  return out;
}

TrainReport train(Cliqueformer& model, const Dataset& data, const TrainConfig& config) {
  data.validate();
  const auto& mc = model.config();
  if (data.modality != mc.modality || data.design_dim() != mc.design_dim ||
      (data.modality == Modality::kDiscrete && data.vocab != mc.vocab)) {
    throw std::invalid_argument("train: dataset does not match the model's design space");
  }
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(config.tau > 0.0)) throw std::invalid_argument("train: tau must be positive");
  if (config.warmup_steps < 0) throw std::invalid_argument("train: warmup_steps must be >= 0");

  const auto start = std::chrono::steady_clock::now();
  const Index n = data.size();
  const Index batch = std::min(config.batch_size, n);
  Vector targets_all(n);
  for (Index i = 0; i < n; ++i) targets_all(i) = normalize_score(data.stats, data.scores(i));

  OptimizerState opt(AdamWOptions{config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  Rng root(config.seed);
  Rng shuffle_rng = root.split(1);
  std::vector<std::size_t> order = shuffle_rng.permutation(static_cast<std::size_t>(n));
  std::size_t cursor = 0;

  TrainReport report;
  report.curve.reserve(static_cast<std::size_t>(config.steps));
  std::vector<std::size_t> rows(static_cast<std::size_t>(batch));
  Vector targets(batch);
  for (Index step = 0; step < config.steps; ++step) {
    if (cursor + static_cast<std::size_t>(batch) > order.size()) {
      order = shuffle_rng.permutation(static_cast<std::size_t>(n));
      cursor = 0;
    }
    for (Index b = 0; b < batch; ++b) {
      rows[static_cast<std::size_t>(b)] = order[cursor++];
      targets(b) = targets_all(static_cast<Index>(rows[static_cast<std::size_t>(b)]));
    }
    const Matrix inputs = data.model_inputs(rows);

    Rng step_rng = root.split(1000 + static_cast<std::uint64_t>(step));
    const Matrix noise = step_rng.normal_matrix(batch, mc.latent_dim());
    const Matrix mask = sample_clique_mask(mc.layout, batch, step_rng);
    const double coeff = config.vib_scale * warmup_coefficient(step, config.warmup_steps);

    model.params().zero_grad();
    Tape tape;
    const LossTerms loss =
        loss_clique(model, tape, inputs, targets, noise, mask,
                    ForwardContext::train(mc.dropout, step_rng), config.tau, coeff);
    StepLosses rec;
    rec.kl = loss.kl.scalar();
    rec.vib = coeff * rec.kl;
    rec.nll = loss.nll.scalar();
    rec.mse = loss.mse.scalar();
    rec.total = loss.total.scalar();
    if (!std::isfinite(rec.total)) {
      std::ostringstream msg;
      msg << "train: non-finite loss at step " << step << " (kl=" << rec.kl
          << ", nll=" << rec.nll << ", mse=" << rec.mse << ")";
      throw std::runtime_error(msg.str());
    }
    tape.backward(loss.total);
    if (config.clip_norm > 0.0) clip_grad_norm(model.params(), config.clip_norm);
    adamw_update(model.params(), opt);
    report.curve.push_back(rec);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::pair<Cliqueformer, TrainReport> train(const Dataset& data,
                                           const CliqueformerConfig& model_config,
                                           const TrainConfig& config) {
  Cliqueformer model(model_config, Rng(config.seed).split(0).seed());
  TrainReport report = train(model, data, config);
  return {std::move(model), std::move(report)};
}

void write_curves_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curves " + path.string());
  out << "step,vib,nll,mse,total,kl\n";
  out.precision(10);
  for (std::size_t i = 0; i < report.curve.size(); ++i) {
    const auto& r = report.curve[i];
    out << i << ',' << r.vib << ',' << r.nll << ',' << r.mse << ',' << r.total << ',' << r.kl
        << '\n';
  }
}

}  // namespace cliqueformer
