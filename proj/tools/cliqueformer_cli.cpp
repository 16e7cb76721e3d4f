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

// cliqueformer: generate tasks, train, design, evaluate and benchmark.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cliqueformer/checkpoint.hpp"
#include "cliqueformer/config.hpp"
#include "cliqueformer/design.hpp"
#include "cliqueformer/experiments.hpp"
#include "cliqueformer/rng.hpp"
#include "cliqueformer/runtime.hpp"
#include "cliqueformer/training.hpp"

namespace fs = std::filesystem;
namespace cf = cliqueformer;
using json = nlohmann::json;

namespace {

// Options shared by every pipeline subcommand.
struct Common {
  std::string task = "latrbf11";
  std::string method = "cliqueformer";
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  std::string metric;
  long long batch_size = 0;
  long long top_k = 0;
  std::string seeds;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* app, Common& c, bool with_method) {
  app->add_option("--task", c.task, "latrbf<d_z> (11, 31, 41, 61, ...) or tfbind8")
      ->capture_default_str();
  if (with_method) {
    app->add_option("--method", c.method, "cliqueformer | gradasc | rwr | coms | transformer")
        ->capture_default_str();
  }
  app->add_option("--config", c.config_path, "key = value file with [section] headers")
      ->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override, e.g. --set train.steps=2000");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--metric", c.metric, "top<k>of<n>, e.g. top10of1000");
  app->add_option("--top-k", c.top_k, "k of the top-k metric");
  app->add_option("--batch-size", c.batch_size, "candidate batch size B (the n of top-k-of-n)");
}

cf::RunConfig resolve(const Common& c) {
  cf::RunConfig rc =
      cf::default_run_config(cf::task_spec_from_name(c.task), cf::method_from_string(c.method));
  cf::KeyValues kv;
  if (!c.config_path.empty()) kv = cf::load_key_values(c.config_path);
  for (const std::string& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value: " + s);
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (!c.metric.empty()) kv["run.metric"] = c.metric;
  if (!c.seeds.empty()) kv["run.seeds"] = c.seeds;
  if (c.top_k > 0) kv["run.top_k"] = std::to_string(c.top_k);
  if (c.batch_size > 0) kv["run.candidates"] = std::to_string(c.batch_size);
  cf::apply_overrides(rc, kv);
  if (!c.out.empty()) rc.out_dir = c.out;
  return rc;
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw std::invalid_argument("--out is required");
  fs::create_directories(c.out);
  return c.out;
}

void print_eval(const cf::EvalResult& r) {
  std::cout << json{{"task", r.task},         {"method", r.method},     {"seed", r.seed},
                    {"score", r.score},       {"topk_std", r.topk_std}, {"validity", r.validity},
                    {"top_k", r.top_k},       {"candidates", r.candidates}}
                   .dump(2)
            << '\n';
}

void print_aggregate(const cf::AggregateResult& a) {
  std::printf("%-10s %-13s seeds=%zu score=%.4f +- %.4f (top-k std %.4f) validity=%.3f\n",
              a.task.c_str(), a.method.c_str(), a.per_seed.size(), a.mean_score, a.seed_std,
              a.mean_topk_std, a.mean_validity);
}

int cmd_generate(const Common& c) {
  const cf::RunConfig rc = resolve(c);
  const fs::path out = require_out(c);
  const cf::TaskInstance task = cf::build_task(rc.task);
  cf::save_dataset_csv(task.train, out / "dataset.csv");
  if (task.latent) cf::save_task(*task.latent, out / "task.json");
  std::printf("%s: %ld filtered rows, %ld columns -> %s\n", task.name.c_str(),
              static_cast<long>(task.train.designs.rows()),
              static_cast<long>(task.train.designs.cols()), out.string().c_str());
  return 0;
}

int cmd_train(const Common& c) {
  const cf::RunConfig rc = resolve(c);
  const fs::path out = require_out(c);
  const cf::TaskInstance task = cf::build_task(rc.task);
  auto [model, report] = cf::train_cliqueformer(rc, task, c.seed);
  cf::save_cliqueformer(out / "model.ckpt", model);
  cf::write_curves_csv(report, out / "curves.csv");
  const cf::StepLosses& last = report.curve.back();
  std::printf("trained %zu steps in %.1f s; final loss %.5f -> %s\n", report.curve.size(),
              report.seconds, last.total, (out / "model.ckpt").string().c_str());
  return 0;
}

int cmd_design(const Common& c, const std::string& checkpoint) {
  const cf::RunConfig rc = resolve(c);
  const fs::path out = require_out(c);
  const cf::TaskInstance task = cf::build_task(rc.task);
  cf::Cliqueformer model = cf::load_cliqueformer(checkpoint);
  cf::DesignOptConfig dc = rc.design;
  dc.batch_size = rc.metric.candidates;
  dc.seed = cf::Rng(c.seed).split(2).seed();
  const cf::DesignBatch batch = cf::optimize_designs(model, task.train, dc);
  cf::write_designs_csv(batch.designs, out / "designs.csv");
  std::printf("%ld designs; surrogate %.4f -> %.4f\n", static_cast<long>(batch.designs.rows()),
              batch.surrogate_trace.front(), batch.surrogate_trace.back());
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& designs_path) {
  const cf::RunConfig rc = resolve(c);
  const cf::TaskInstance task = cf::build_task(rc.task);
  const cf::Matrix designs = cf::read_designs_csv(designs_path);
  cf::EvalResult r = cf::evaluate_candidates(task.oracle, designs, rc.metric.top_k);
  r.task = task.name;
  r.method = c.method;
  r.seed = c.seed;
  print_eval(r);
  return 0;
}

int cmd_bench(const Common& c) {
  const cf::RunConfig rc = resolve(c);
  print_aggregate(cf::run_benchmark(rc));
  return 0;
}

int cmd_ablate(const Common& c, const std::vector<std::string>& variants) {
  const cf::RunConfig rc = resolve(c);
  const auto rows = cf::ablation_suite(rc, variants);
  for (const auto& row : rows) {
    std::printf("%-26s ", row.variant.c_str());
    print_aggregate(row.result);
  }
  if (!rc.out_dir.empty()) cf::write_ablation_table(rows, rc.out_dir / "ablation.csv");
  return 0;
}

int cmd_rotation(const std::vector<int>& dims, long long probes, std::uint64_t seed) {
  std::printf("%4s %14s %14s %14s\n", "l", "max|Hv_ij|", "min|Hz_ij|", "max|dv_k>=2|");
  for (int l : dims) {
    const cf::RotationReport r = cf::rotation_demo(l, probes, seed);
    std::printf("%4d %14.3e %14.3e %14.3e\n", r.dim, r.max_offdiag_v, r.min_offdiag_z,
                r.max_grad_tail_v);
  }
  return 0;
}

int cmd_fgm(const std::string& seeds_text) {
  cf::RunConfig tmp;
  cf::apply_overrides(tmp, {{"run.seeds", seeds_text}});
  cf::FgmStudyConfig cfg;
  int wins = 0;
  for (std::uint64_t s : tmp.seeds) {
    const cf::FgmStudyReport r = cf::fgm_vs_oblivious(cfg, s);
    wins += r.design_value_fgm > r.design_value_obl;
    std::printf("seed %llu: params %zu vs %zu | test mse %.4f vs %.4f | design %.4f vs %.4f "
                "(start %.4f)\n",
                static_cast<unsigned long long>(s), r.params_fgm, r.params_obl, r.test_mse_fgm,
                r.test_mse_obl, r.design_value_fgm, r.design_value_obl, r.start_value);
  }
  std::printf("decomposed surrogate wins %d of %zu\n", wins, tmp.seeds.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  cf::tune_allocator();
  CLI::App app{"Cliqueformer offline model-based optimization"};
  app.require_subcommand(1);

  Common gen, tr, des, ev, bench, abl;
  std::string checkpoint, designs_path, fgm_seeds = "5";
  std::vector<std::string> variants{"base", "no_vib", "no_weight_decay"};
  std::vector<int> dims{2, 3, 4, 5, 6, 7, 8};
  long long probes = 100;
  std::uint64_t rot_seed = 0;

  auto* g = app.add_subcommand("generate", "build a task and write its filtered dataset");
  add_common(g, gen, false);

  auto* t = app.add_subcommand("train", "train a Cliqueformer and save a checkpoint");
  add_common(t, tr, false);
  t->add_option("--seed", tr.seed, "run seed");

  auto* d = app.add_subcommand("design", "optimize latents and decode candidate designs");
  add_common(d, des, false);
  d->add_option("--seed", des.seed, "run seed");
  d->add_option("--checkpoint", checkpoint, "model.ckpt from `train`")
      ->required()
      ->check(CLI::ExistingFile);

  auto* e = app.add_subcommand("evaluate", "score a designs CSV with the task oracle");
  add_common(e, ev, true);
  e->add_option("--seed", ev.seed, "seed recorded in the report");
  e->add_option("--designs", designs_path, "designs.csv")->required()->check(CLI::ExistingFile);

  auto* b = app.add_subcommand("bench", "full pipeline over several seeds");
  add_common(b, bench, true);
  b->add_option("--seeds", bench.seeds, "seed count N, or a list such as 0,1,2");

  auto* a = app.add_subcommand("ablate", "run ablation variants against the base model");
  add_common(a, abl, false);
  a->add_option("--seeds", abl.seeds, "seed count N, or a list such as 0,1,2");
  a->add_option("--variants", variants,
                "base no_vib no_weight_decay cliques_fixed_dz:<N> cliques_fixed_dclique:<N>");

  auto* r = app.add_subcommand("demo-rotation", "how rotations hide a factorization");
  r->add_option("--dims", dims, "dimensions l")->capture_default_str();
  r->add_option("--probes", probes, "probe points")->capture_default_str();
  r->add_option("--seed", rot_seed, "probe seed");

  auto* f = app.add_subcommand("demo-fgm", "decomposed vs. oblivious surrogate");
  f->add_option("--seeds", fgm_seeds, "seed count N, or a list")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr);
    if (d->parsed()) return cmd_design(des, checkpoint);
    if (e->parsed()) return cmd_evaluate(ev, designs_path);
    if (b->parsed()) return cmd_bench(bench);
    if (a->parsed()) return cmd_ablate(abl, variants);
    if (r->parsed()) return cmd_rotation(dims, probes, rot_seed);
    if (f->parsed()) return cmd_fgm(fgm_seeds);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
