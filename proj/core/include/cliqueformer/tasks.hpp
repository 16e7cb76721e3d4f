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

#ifndef CLIQUEFORMER_TASKS_HPP_
#define CLIQUEFORMER_TASKS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cliqueformer/fgm.hpp"
#include "cliqueformer/tensor.hpp"

namespace cliqueformer {

enum class Modality { kContinuous, kDiscrete };

/// Min and max of the visible (post-filter) scores.
struct NormalizationStats {
  double y_min = 0.0;
  double y_max = 1.0;
};

NormalizationStats compute_stats(const Vector& scores);

/// (y - y_min) / (y_max - y_min). Throws if y_max <= y_min.
double normalize_score(const NormalizationStats& stats, double y);

/// Offline dataset. Continuous designs are N x d real rows; discrete designs
/// are N x L rows of integer symbols in [0, vocab) stored as doubles.
struct Dataset {
  Modality modality = Modality::kContinuous;
  Index vocab = 0;
  Matrix designs;
  Vector scores;
  NormalizationStats stats;

  Index size() const { return designs.rows(); }
  /// d for continuous data, sequence length L for discrete data.
  Index design_dim() const { return designs.cols(); }
  /// Width of the model input row: d, or L * vocab for one-hot sequences.
  Index input_width() const;
  /// Model input rows for the given dataset rows (one-hot for discrete data).
  Matrix model_inputs(std::span<const std::size_t> rows) const;
  Matrix model_inputs() const;
  Dataset subset(std::span<const std::size_t> rows) const;
  void validate() const;
};

/// One-hot encoding of symbol rows: N x L -> N x (L * vocab).
Matrix one_hot(const Matrix& symbols, Index vocab);
/// Per-position argmax of N x (L * vocab) scores back to N x L symbols.
Matrix argmax_symbols(const Matrix& scores, Index vocab);

/// Keeps rows whose score is strictly below the linearly interpolated
/// empirical p-quantile and recomputes stats on them. p >= 1 keeps every row.
Dataset percentile_filter(const Dataset& data, double p = 0.8);

/// Linear-interpolation quantile (the "linear" method: h = (n - 1) p).
double empirical_quantile(std::vector<double> values, double p);

struct OracleResult {
  double raw = 0.0;
  bool valid = false;
};

/// Ground-truth scorer. Pure: equal designs give bit-identical results.
class OracleHandle {
 public:
  using ScoreFn = std::function<OracleResult(std::span<const double> design)>;

  OracleHandle() = default;
  OracleHandle(ScoreFn fn, NormalizationStats stats) : fn_(std::move(fn)), stats_(stats) {}

  OracleResult raw(std::span<const double> design) const { return fn_(design); }
  /// Normalized score; invalid designs score 0.
  double score(std::span<const double> design) const;
  const NormalizationStats& stats() const { return stats_; }
  OracleHandle with_stats(NormalizationStats stats) const { return {fn_, stats}; }

 private:
  ScoreFn fn_;
  NormalizationStats stats_;
};

// ---------------------------------------------------------------------------
// Latent radial-basis-function tasks

inline constexpr int kRbfCentersPerClique = 4;
inline constexpr double kDefaultValidityTolerance = 1e-3;

/// Hidden chain-of-triangles objective observed through a nonlinear embedding
/// x = T(z) = concat(z, tanh(W z + b)).
struct LatentRbfTask {
  CliqueLayout layout{1, 3, 1};
  /// Per clique: kRbfCentersPerClique x 3 centers.
  std::vector<Matrix> centers;
  /// Per clique: mixing weights, one per center.
  std::vector<Vector> weights;
  double rbf_width = 1.0;
  Matrix embed_weight;  // (d - d_z) x d_z
  Vector embed_offset;  // d - d_z
  Index observed_dim = 0;
  double validity_tolerance = kDefaultValidityTolerance;
  std::uint64_t seed = 0;

  int n_triangles() const { return layout.n_clique(); }
  Index latent_dim() const { return layout.latent_dim(); }
};

/// Contribution of the 1-based clique `i` to y(z).
double clique_term(const LatentRbfTask& task, int i, std::span<const double> z);
/// y(z): sum of all clique terms.
double latent_value(const LatentRbfTask& task, std::span<const double> z);

Vector transform(const LatentRbfTask& task, std::span<const double> z);
/// Recovers z from an on-manifold design, or nullopt if the design is invalid.
std::optional<Vector> invert_or_reject(const LatentRbfTask& task, std::span<const double> x);

/// Normalized oracle value; invalid designs score 0.
double oracle_score(const LatentRbfTask& task, const NormalizationStats& stats,
                    std::span<const double> x);
OracleHandle make_oracle(const LatentRbfTask& task, NormalizationStats stats);

/// observed_dim <= 0 selects the default 2 * d_z.
std::pair<LatentRbfTask, Dataset> generate_latent_rbf(int n_triangles, Index observed_dim,
                                                      Index n_samples, std::uint64_t seed);

/// Latent dimension of the Lat. RBF benchmark with the given name (11, 31, 41, 61).
int triangles_for_latent_dim(int latent_dim);

void save_task(const LatentRbfTask& task, const std::filesystem::path& path);
LatentRbfTask load_task(const std::filesystem::path& path);

/// CSV with header x0..x{d-1},y; values written with round-trip precision.
void save_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path, Modality modality, Index vocab = 0);

// ---------------------------------------------------------------------------
// TFBind-8

inline constexpr Index kTfBindLength = 8;
inline constexpr Index kDnaVocab = 4;

struct TfBindData {
  /// Every record in the file.
  Dataset full;
  /// Exact-lookup oracle over the full table; stats come from `full`.
  OracleHandle oracle;
};

/// Reads `SEQUENCE<TAB>SCORE` lines over {A,C,G,T}.
TfBindData load_tfbind8(const std::filesystem::path& path);
std::vector<int> encode_dna(std::string_view sequence);
std::string decode_dna(std::span<const double> symbols);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_TASKS_HPP_
