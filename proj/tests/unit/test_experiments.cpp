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


#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>
#include <string>

#include "cliqueformer/experiments.hpp"

using namespace cliqueformer;
namespace fs = std::filesystem;

namespace {

// raw = x0, valid iff x1 >= 0.
OracleHandle toy_oracle() {
  return OracleHandle(
      [](std::span<const double> x) { return OracleResult{x[0], x[1] >= 0.0}; },
      NormalizationStats{0.0, 10.0});
}

RunConfig tiny_run(Method method) {
  RunConfig c = default_run_config(task_spec_from_name("latrbf5"), method);
  apply_overrides(c, {{"task.n_samples", "300"},
                      {"model.d_model", "16"},
                      {"model.ff_hidden", "32"},
                      {"model.mlp_hidden", "16"},
                      {"train.steps", "6"},
                      {"train.batch_size", "16"},
                      {"train.warmup_steps", "3"},
                      {"design.steps", "4"},
                      {"baseline.hidden", "16"},
                      {"baseline.train_steps", "6"},
                      {"baseline.ascent_steps", "4"},
                      {"run.metric", "top5of40"},
                      {"run.seeds", "0,1"}});
  return c;
}

}  // namespace

TEST_CASE("metric strings") {
  const Metric m = metric_from_string("top10of1000");
  CHECK(m.top_k == 10);
  CHECK(m.candidates == 1000);
  CHECK(to_string(metric_from_string("top1of128")) == "top1of128");
  CHECK_THROWS_AS(metric_from_string("best10"), std::invalid_argument);
  CHECK_THROWS_AS(metric_from_string("top0of10"), std::invalid_argument);
  CHECK_THROWS_AS(metric_from_string("top11of10"), std::invalid_argument);
  CHECK_THROWS_AS(metric_from_string("topxof10"), std::invalid_argument);
}

TEST_CASE("task and method names") {
  CHECK(task_spec_from_name("latrbf11").name == "latrbf11");
  CHECK(task_spec_from_name("tfbind8").is_tfbind());
  CHECK_THROWS_AS(task_spec_from_name("latrbf10"), std::invalid_argument);
  CHECK_THROWS_AS(task_spec_from_name("superconductor"), std::invalid_argument);
  for (auto m : {Method::kCliqueformer, Method::kGradAscent, Method::kRwr, Method::kComs,
                 Method::kTransformer}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(method_from_string("ddom"), std::invalid_argument);
}

TEST_CASE("evaluate_candidates scores invalid designs as zero") {
  Matrix x(5, 2);
  x << 5.0, 1.0,
       9.0, -1.0,
       2.0, 0.0,
       8.0, 3.0,
       1.0, 2.0;
  const EvalResult r = evaluate_candidates(toy_oracle(), x, 2);
  // valid normalized scores: 0.5, 0.2, 0.8, 0.1; invalid 9 -> 0.
  CHECK(r.score == doctest::Approx(0.65));
  CHECK(r.topk_std == doctest::Approx(0.15));
  CHECK(r.validity == doctest::Approx(0.8));
  CHECK(r.candidates == 5);
  CHECK(r.top_k == 2);

  Matrix bad(3, 2);
  bad << 9.0, -1.0, 7.0, -2.0, 3.0, -0.5;
  const EvalResult z = evaluate_candidates(toy_oracle(), bad, 3);
  CHECK(z.score == 0.0);
  CHECK(z.validity == 0.0);
  CHECK_THROWS_AS(evaluate_candidates(toy_oracle(), x, 6), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_candidates(toy_oracle(), x, 0), std::invalid_argument);
}

TEST_CASE("aggregate") {
  EvalResult a, b;
  a.score = 0.4;
  a.validity = 1.0;
  a.topk_std = 0.1;
  b.score = 0.8;
  b.validity = 0.5;
  b.topk_std = 0.3;
  const AggregateResult g = aggregate({a, b});
  CHECK(g.mean_score == doctest::Approx(0.6));
  CHECK(g.seed_std == doctest::Approx(0.2));
  CHECK(g.mean_validity == doctest::Approx(0.75));
  CHECK(g.mean_topk_std == doctest::Approx(0.2));
  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("config overrides") {
  RunConfig c = default_run_config(task_spec_from_name("latrbf11"), Method::kCliqueformer);
  CHECK(c.model.layout.n_clique() == 10);
  CHECK(c.model.layout.latent_dim() == 21);
  CHECK(c.design.steps == 50);
  apply_overrides(c, {{"model.n_clique", "4"}, {"design.lr", "0.5"}, {"run.seeds", "3"}});
  CHECK(c.model.layout.n_clique() == 4);
  CHECK(c.design.lr == 0.5);
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
  apply_overrides(c, {{"run.seeds", "7,9"}});
  CHECK(c.seeds == std::vector<std::uint64_t>{7, 9});
  CHECK_THROWS_AS(apply_overrides(c, {{"model.width", "3"}}), std::invalid_argument);
  CHECK_THROWS_AS(apply_overrides(c, {{"train.lr", "fast"}}), std::invalid_argument);
  CHECK_THROWS_AS(apply_overrides(c, {{"design.decay", "l1"}}), std::invalid_argument);
  CHECK(default_run_config(task_spec_from_name("latrbf61"), Method::kCliqueformer)
            .model.layout.n_clique() == 28);
}

TEST_CASE("sum-aligned rotation") {
  for (int l = 2; l <= 8; ++l) {
    const Matrix r = sum_aligned_rotation(l);
    CHECK((r * r.transpose() - Matrix::Identity(l, l)).cwiseAbs().maxCoeff() < 1e-12);
    for (int j = 0; j < l; ++j) CHECK(r(0, j) == doctest::Approx(1.0 / std::sqrt(l)));
  }
  CHECK_THROWS_AS(sum_aligned_rotation(1), std::invalid_argument);
}

TEST_CASE("rotation demo separates the two parameterizations") {
  const RotationReport two = rotation_demo(2, 20, 1);
  CHECK(two.max_grad_tail_v < 1e-6);
  CHECK(two.max_offdiag_v < 1e-6);
  CHECK(two.min_offdiag_z > 1e-3);
  const RotationReport five = rotation_demo(5, 100, 2);
  CHECK(five.dim == 5);
  CHECK(five.max_grad_tail_v < 1e-6);
  CHECK(five.max_offdiag_v < 1e-6);
  CHECK(five.min_offdiag_z > 1e-3);
  CHECK(five.dependence_gap > 1e3);
  CHECK_THROWS_AS(rotation_demo(1, 10, 0), std::invalid_argument);
}

TEST_CASE("mlp width matching") {
  // [in, h, h, 1] has h^2 + (in + 3) h + 1 scalars.
  CHECK(matched_mlp_hidden(11, 1 * 1 + 14 * 1 + 1) == 1);
  CHECK(matched_mlp_hidden(11, 100 * 100 + 14 * 100 + 1) == 100);
  const CliqueLayout layout = make_chain(5, 3, 1);
  CliqueSurrogate fgm(layout, 64, 0);
  const std::size_t target = fgm.params().num_scalars();
  SurrogateMlp obl(layout.latent_dim(), matched_mlp_hidden(layout.latent_dim(), target), 0);
  const double gap = std::abs(static_cast<double>(obl.params().num_scalars()) -
                              static_cast<double>(target));
  CHECK(gap / static_cast<double>(target) < 0.05);
}

TEST_CASE("small fgm study") {
  FgmStudyConfig c;
  c.n_triangles = 2;
  c.n_train = 200;
  c.n_test = 100;
  c.hidden = 32;
  c.train.steps = 30;
  c.train.hidden = 32;
  c.ascent = {16, 10, 3e-2, 0};
  const FgmStudyReport a = fgm_vs_oblivious(c, 4);
  const FgmStudyReport b = fgm_vs_oblivious(c, 4);
  CHECK(a.test_mse_fgm == b.test_mse_fgm);
  CHECK(a.design_value_obl == b.design_value_obl);
  CHECK(std::abs(static_cast<double>(a.params_fgm) - static_cast<double>(a.params_obl)) <
        0.05 * static_cast<double>(a.params_fgm));
  CHECK(std::isfinite(a.test_mse_obl));
  CHECK(std::isfinite(a.start_value));
}

TEST_CASE("ablation layouts keep the latent width") {
  const CliqueLayout base = make_chain(10, 3, 1);
  for (int n : {1, 2, 4, 5, 10, 20}) {
    const CliqueLayout l = fixed_latent_layout(base, n);
    CHECK(l.latent_dim() == base.latent_dim());
    CHECK(l.n_clique() == n);
  }
  CHECK_THROWS_AS(fixed_latent_layout(base, 3), std::invalid_argument);
  CHECK_THROWS_AS(fixed_latent_layout(base, 0), std::invalid_argument);

  RunConfig c = tiny_run(Method::kCliqueformer);
  c.out_dir = "/tmp/abl";
  CliqueLayout got = base;
  const RunConfig nv = ablation_variant(c, "no_vib");
  CHECK(nv.train.vib_scale == 0.0);
  CHECK(nv.out_dir == fs::path("/tmp/abl/no_vib"));
  CHECK(ablation_variant(c, "no_weight_decay").design.weight_decay == 0.0);
  const RunConfig fd = ablation_variant(c, "cliques_fixed_dclique:3", &got);
  CHECK(got.n_clique() == 3);
  CHECK(got.clique_dim() == c.model.layout.clique_dim());
  CHECK(fd.out_dir == fs::path("/tmp/abl/cliques_fixed_dclique_3"));
  CHECK_THROWS_AS(ablation_variant(c, "no_decoder"), std::invalid_argument);
}

TEST_CASE("tiny benchmark is deterministic and resumable") {
  const fs::path dir = fs::temp_directory_path() / "cqf_test_experiments";
  fs::remove_all(dir);
  RunConfig c = tiny_run(Method::kCliqueformer);
  const AggregateResult plain = run_benchmark(c);
  REQUIRE(plain.per_seed.size() == 2u);
  CHECK(plain.per_seed[0].candidates == 40);
  CHECK(plain.per_seed[0].top_k == 5);

  c.out_dir = dir;
  const AggregateResult stored = run_benchmark(c);
  CHECK(stored.per_seed[0].score == plain.per_seed[0].score);
  CHECK(stored.per_seed[1].validity == plain.per_seed[1].validity);
  for (const char* f : {"model.ckpt", "designs.csv", "eval.json", "curves.csv"}) {
    CHECK(fs::exists(dir / "seed_0" / f));
  }
  // Dropping the evaluation re-scores the stored designs.
  fs::remove(dir / "seed_1" / "eval.json");
  const AggregateResult resumed = run_benchmark(c);
  CHECK(resumed.mean_score == stored.mean_score);
  write_results(resumed, dir);
  CHECK(fs::exists(dir / "results.csv"));
  CHECK(fs::exists(dir / "aggregate.json"));
  fs::remove_all(dir);
}

TEST_CASE("tiny baselines through the runner") {
  for (Method m : {Method::kGradAscent, Method::kRwr, Method::kComs, Method::kTransformer}) {
    RunConfig c = tiny_run(m);
    c.seeds = {5};
    const AggregateResult a = run_benchmark(c), b = run_benchmark(c);
    CHECK(a.method == std::string(to_string(m)));
    CHECK(a.mean_score == b.mean_score);
    CHECK(a.mean_validity >= 0.0);
    CHECK(a.mean_validity <= 1.0);
  }
}
