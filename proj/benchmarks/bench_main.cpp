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

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "cliqueformer/autodiff.hpp"
#include "cliqueformer/gaussian.hpp"
#include "cliqueformer/model.hpp"
#include "cliqueformer/optim.hpp"
#include "cliqueformer/rng.hpp"
#include "cliqueformer/tasks.hpp"
#include "cliqueformer/training.hpp"

namespace {

using namespace cliqueformer;

void BM_KlClosedForm(benchmark::State& state) {
  Rng rng(1);
  const Index d = state.range(0);
  DiagonalGaussian q(rng.normal_matrix(d, 1).col(0), 0.5 * rng.normal_matrix(d, 1).col(0));
  for (auto _ : state) benchmark::DoNotOptimize(kl_to_standard_normal(q));
}
BENCHMARK(BM_KlClosedForm)->Arg(21)->Arg(121);

void BM_Attention(benchmark::State& state) {
  Rng rng(2);
  const Index batch = 128, len = state.range(0), width = 64;
  const Matrix q = rng.normal_matrix(batch * len, width);
  const Matrix k = rng.normal_matrix(batch * len, width);
  const Matrix v = rng.normal_matrix(batch * len, width);
  for (auto _ : state) {
    Tape tape;
    Var out = attention(tape.input(q), tape.input(k), tape.input(v), len, 2);
    tape.backward(sum_all(out));
    benchmark::DoNotOptimize(out.value().data());
  }
}
BENCHMARK(BM_Attention)->Arg(22)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  auto [task, full] = generate_latent_rbf(5, 0, 2000, 3);
  CliqueformerConfig cfg;
  cfg.layout = make_chain(10, 3, 1);
  cfg.design_dim = full.design_dim();
  Cliqueformer model(cfg, 4);
  OptimizerState opt(AdamWOptions{1e-4, 0.9, 0.999, 1e-8, 0.01});
  Rng rng(5);
  const Index batch = 128;
  std::vector<std::size_t> rows(batch);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const Matrix inputs = full.model_inputs(rows);
  const Vector targets = full.scores.head(batch);
  for (auto _ : state) {
    Tape tape;
    const Matrix noise = rng.normal_matrix(batch, cfg.latent_dim());
    const Matrix mask = sample_clique_mask(cfg.layout, batch, rng);
    LossTerms loss = loss_clique(model, tape, inputs, targets, noise, mask,
                                 ForwardContext::train(cfg.dropout, rng), 10.0, 1.0);
    model.params().zero_grad();
    tape.backward(loss.total);
    clip_grad_norm(model.params(), 10.0);
    adamw_update(model.params(), opt);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
