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

#ifndef CLIQUEFORMER_EXPERIMENTS_HPP_
#define CLIQUEFORMER_EXPERIMENTS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cliqueformer/baselines.hpp"
#include "cliqueformer/design.hpp"
#include "cliqueformer/model.hpp"
#include "cliqueformer/tasks.hpp"
#include "cliqueformer/training.hpp"

namespace cliqueformer {

enum class Method { kCliqueformer, kGradAscent, kRwr, kComs, kTransformer };

std::string_view to_string(Method m);
/// Accepts cliqueformer, gradasc, rwr, coms, transformer.
Method method_from_string(std::string_view s);

/// Which benchmark instance to build. Names: latrbf<d_z> (odd d_z >= 3, e.g.
/// latrbf11) or tfbind8.
struct TaskSpec {
  std::string name = "latrbf11";
  Index n_samples = 10000;
  Index observed_dim = 0;  // 0: 2 * d_z
  double percentile = 0.8;
  double validity_tolerance = kDefaultValidityTolerance;
  /// The task instance is fixed across run seeds.
  std::uint64_t task_seed = 0;
  std::filesystem::path data_path;  // TFBind-8 table

  bool is_tfbind() const { return name == "tfbind8"; }
};

TaskSpec task_spec_from_name(std::string_view name);

struct TaskInstance {
  std::string name;
  Dataset train;                       // filtered visible data
  OracleHandle oracle;                 // normalizes with train.stats
  std::optional<LatentRbfTask> latent; // set for synthetic tasks
};

TaskInstance build_task(const TaskSpec& spec);

/// top-k of n candidates.
struct Metric {
  Index top_k = 10;
  Index candidates = 1000;
};
/// "top10of1000" or "top1of128" (generally top<k>of<n>).
Metric metric_from_string(std::string_view s);
std::string to_string(const Metric& m);

struct EvalResult {
  std::string task;
  std::string method;
  std::uint64_t seed = 0;
  double score = 0.0;     // mean normalized oracle value of the top-k
  double topk_std = 0.0;  // population std of those k values
  double validity = 0.0;  // fraction of valid candidates
  Index candidates = 0;
  Index top_k = 0;
  /// Cliqueformer only: max over candidates of |z_T|_inf / |z_0|_inf.
  double latent_growth = 0.0;
};

/// Scores every candidate (invalid -> 0), keeps the k best.
EvalResult evaluate_candidates(const OracleHandle& oracle, const Matrix& candidates,
                               Index top_k);

struct RunConfig {
  TaskSpec task;
  Method method = Method::kCliqueformer;
  CliqueformerConfig model;  // design_dim / modality / vocab are filled per task
  TrainConfig train;
  DesignOptConfig design;
  BaselineConfig baseline;
  Metric metric;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out_dir;  // empty: keep nothing on disk
  bool resume = true;
};

/// Per-task defaults: clique layout and design steps / decay per task.
RunConfig default_run_config(const TaskSpec& task, Method method);

/// Applies `section.key = value` overrides (see README for the key list).
/// Throws std::invalid_argument on unknown keys or malformed values.
void apply_overrides(RunConfig& config, const std::map<std::string, std::string>& values);

struct AggregateResult {
  std::string task;
  std::string method;
  std::vector<EvalResult> per_seed;
  double mean_score = 0.0;
  double seed_std = 0.0;       // std of score across seeds
  double mean_topk_std = 0.0;  // per-top-k std, averaged over seeds
  double mean_validity = 0.0;
};

AggregateResult aggregate(const std::vector<EvalResult>& rows);

/// One seed of generate -> filter -> train -> design -> evaluate. With an
/// out_dir, every stage writes an artifact under <out_dir>/seed_<s>/ and, when
/// resume is set, is skipped if its artifact already exists. Errors are
/// rethrown with the stage name.
EvalResult run_seed(const RunConfig& config, const TaskInstance& task, std::uint64_t seed);
AggregateResult run_benchmark(const RunConfig& config);

/// results.csv (one row per seed) and aggregate.json.
void write_results(const AggregateResult& result, const std::filesystem::path& dir);

/// Trains the Cliqueformer of `config` on task.train for one seed.
std::pair<Cliqueformer, TrainReport> train_cliqueformer(const RunConfig& config,
                                                        const TaskInstance& task,
                                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Rotation demonstration

struct RotationReport {
  int dim = 0;
  double max_offdiag_v = 0.0;  // max |d2 f^v / dv_i dv_j|, i != j
  double min_offdiag_z = 0.0;  // min |d2 f^z / dz_i dz_j|, i != j
  double max_grad_tail_v = 0.0;  // max |d f^v / dv_k|, k >= 2
  double dependence_gap = 0.0;   // min_offdiag_z / max(max_offdiag_v, 1e-12)
};

/// Orthonormal l x l matrix whose first row is l^{-1/2} (1, ..., 1),
/// completed by Gram-Schmidt over the standard basis.
Matrix sum_aligned_rotation(int l);

/// f^z(z) = exp(l^{-1/2} sum z), f^v(v) = f^z(R^T v); finite-difference
/// partials at n_probes standard-normal points.
RotationReport rotation_demo(int l, Index n_probes, std::uint64_t seed, double h = 1e-4);

// ---------------------------------------------------------------------------
// Decomposed vs. monolithic surrogate

/// Shared MLP over (z_C, clique embedding), averaged over cliques.
class CliqueSurrogate final : public Surrogate {
 public:
  CliqueSurrogate(const CliqueLayout& layout, Index hidden, std::uint64_t seed,
                  Index embed_d_model = 64);

  ParameterSet& params() override { return params_; }
  Index input_width() const override { return layout_.latent_dim(); }
  Var forward(Tape& tape, const Var& x, const ForwardContext& ctx) override;

 private:
  CliqueLayout layout_;
  ParameterSet params_;
  Mlp net_;
  Matrix embedding_;
};

/// Hidden width h of an MLP [in, h, h, 1] whose parameter count is closest to
/// `target`.
Index matched_mlp_hidden(Index input_width, std::size_t target);

struct FgmStudyConfig {
  int n_triangles = 5;
  Index n_train = 2000;
  Index n_test = 2000;
  Index hidden = 256;  // clique MLP; the monolithic MLP is matched to it
  SurrogateTrainConfig train{256, 3000, 128, 1e-3, 0.0, 0};
  AscentConfig ascent{256, 100, 3e-2, 0};
};

struct FgmStudyReport {
  double test_mse_fgm = 0.0;
  double test_mse_obl = 0.0;
  double design_value_fgm = 0.0;  // mean normalized oracle value of ascended designs
  double design_value_obl = 0.0;
  double start_value = 0.0;       // same, at the starting points
  std::size_t params_fgm = 0;
  std::size_t params_obl = 0;
};

/// Trains both surrogates on z-space samples of a chain-of-triangles RBF task
/// and ascends each from the same starting points.
FgmStudyReport fgm_vs_oblivious(const FgmStudyConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Ablations

/// base, no_vib, no_weight_decay, cliques_fixed_dz:<N>, cliques_fixed_dclique:<N>
struct AblationRow {
  std::string variant;
  CliqueLayout layout{1, 3, 1};
  AggregateResult result;
};

/// Layout for the n_clique sweep with d_z fixed to `base`'s (d_clique adapts;
/// d_knot kept at 1 unless the layout degenerates).
CliqueLayout fixed_latent_layout(const CliqueLayout& base, int n_clique);

/// Applies one variant to a copy of `base`. Throws on unknown variants.
RunConfig ablation_variant(const RunConfig& base, std::string_view variant,
                           CliqueLayout* layout_out = nullptr);

/// Runs each variant. no_weight_decay reuses the base checkpoints when the
/// base run wrote them to out_dir.
std::vector<AblationRow> ablation_suite(const RunConfig& base,
                                        const std::vector<std::string>& variants);

void write_ablation_table(const std::vector<AblationRow>& rows, const std::filesystem::path& path);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_EXPERIMENTS_HPP_
