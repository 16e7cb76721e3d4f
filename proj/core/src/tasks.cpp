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

#include "cliqueformer/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cliqueformer/rng.hpp"
#include "json.hpp"

namespace cliqueformer {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, Index rows, Index cols) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw std::runtime_error("task file: matrix has wrong row count");
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw std::runtime_error("task file: matrix has wrong column count");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j, Index n) {
  if (!j.is_array() || static_cast<Index>(j.size()) != n) {
    throw std::runtime_error("task file: vector has wrong length");
  }
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

NormalizationStats compute_stats(const Vector& scores) {
  if (scores.size() == 0) throw std::invalid_argument("compute_stats: empty score vector");
  return {scores.minCoeff(), scores.maxCoeff()};
}

double normalize_score(const NormalizationStats& stats, double y) {
  if (!(stats.y_max > stats.y_min)) {
    throw std::invalid_argument("normalize_score: degenerate stats (y_max <= y_min)");
  }
  return (y - stats.y_min) / (stats.y_max - stats.y_min);
}

// ---------------------------------------------------------------------------
// Dataset

Index Dataset::input_width() const {
  return modality == Modality::kContinuous ? design_dim() : design_dim() * vocab;
}

Matrix Dataset::model_inputs(std::span<const std::size_t> rows) const {
  Matrix picked(static_cast<Index>(rows.size()), design_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    picked.row(static_cast<Index>(i)) = designs.row(static_cast<Index>(rows[i]));
  }
  if (modality == Modality::kContinuous) return picked;
  return one_hot(picked, vocab);
}

Matrix Dataset::model_inputs() const {
  return modality == Modality::kContinuous ? designs : one_hot(designs, vocab);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.modality = modality;
  out.vocab = vocab;
  out.designs.resize(static_cast<Index>(rows.size()), design_dim());
  out.scores.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.designs.row(static_cast<Index>(i)) = designs.row(static_cast<Index>(rows[i]));
    out.scores(static_cast<Index>(i)) = scores(static_cast<Index>(rows[i]));
  }
  out.stats = rows.empty() ? stats : compute_stats(out.scores);
  return out;
}

void Dataset::validate() const {
  if (size() < 1) throw std::invalid_argument("dataset is empty");
  if (scores.size() != size()) throw ShapeError("dataset: designs and scores differ in length");
  if (stats.y_min > stats.y_max) throw std::invalid_argument("dataset: y_min > y_max");
  if (modality == Modality::kDiscrete) {
    if (vocab < 1) throw std::invalid_argument("discrete dataset needs a vocabulary size");
    for (Index i = 0; i < designs.size(); ++i) {
      const double s = designs.data()[i];
      if (s < 0 || s >= static_cast<double>(vocab) || s != std::floor(s)) {
        throw std::invalid_argument("discrete dataset: symbol out of range");
      }
    }
  }
}

Matrix one_hot(const Matrix& symbols, Index vocab) {
  Matrix out = Matrix::Zero(symbols.rows(), symbols.cols() * vocab);
  for (Index r = 0; r < symbols.rows(); ++r) {
    for (Index p = 0; p < symbols.cols(); ++p) {
      const auto s = static_cast<Index>(symbols(r, p));
      if (s < 0 || s >= vocab) throw std::invalid_argument("one_hot: symbol out of range");
      out(r, p * vocab + s) = 1.0;
    }
  }
  return out;
}

Matrix argmax_symbols(const Matrix& scores, Index vocab) {
  if (vocab < 1 || scores.cols() % vocab != 0) {
    throw ShapeError("argmax_symbols: width not a multiple of the vocabulary");
  }
  const Index len = scores.cols() / vocab;
  Matrix out(scores.rows(), len);
  for (Index r = 0; r < scores.rows(); ++r) {
    for (Index p = 0; p < len; ++p) {
      Index best = 0;
      scores.row(r).segment(p * vocab, vocab).maxCoeff(&best);
      out(r, p) = static_cast<double>(best);
    }
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile: no values");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("empirical_quantile: p outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Dataset percentile_filter(const Dataset& data, double p) {
  if (!(p > 0.0) || p > 1.0) throw std::invalid_argument("percentile_filter: p must lie in (0, 1]");
  std::vector<std::size_t> keep;
  if (p >= 1.0) {
    keep.resize(static_cast<std::size_t>(data.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
  } else {
    std::vector<double> ys(data.scores.data(), data.scores.data() + data.scores.size());
    const double cut = empirical_quantile(ys, p);
    for (Index i = 0; i < data.size(); ++i) {
      if (data.scores(i) < cut) keep.push_back(static_cast<std::size_t>(i));
    }
  }
  if (keep.empty()) {
    throw std::invalid_argument("percentile_filter: no rows strictly below the quantile");
  }
  return data.subset(keep);
}

double OracleHandle::score(std::span<const double> design) const {
  const OracleResult r = fn_(design);
  return r.valid ? normalize_score(stats_, r.raw) : 0.0;
}

// ---------------------------------------------------------------------------
// Latent RBF

double clique_term(const LatentRbfTask& task, int i, std::span<const double> z) {
  if (static_cast<Index>(z.size()) != task.latent_dim()) {
    throw ShapeError("clique_term: latent length " + std::to_string(z.size()) + " but d_z = " +
                     std::to_string(task.latent_dim()));
  }
  const int start = task.layout.clique_offset(i);
  const Matrix& centers = task.centers[static_cast<std::size_t>(i - 1)];
  const Vector& w = task.weights[static_cast<std::size_t>(i - 1)];
  const double denom = 2.0 * task.rbf_width * task.rbf_width;
  double total = 0.0;
  for (Index k = 0; k < centers.rows(); ++k) {
    double sq = 0.0;
    for (Index c = 0; c < centers.cols(); ++c) {
      const double diff = z[static_cast<std::size_t>(start + c)] - centers(k, c);
      sq += diff * diff;
    }
    total += w(k) * std::exp(-sq / denom);
  }
  return total;
}

double latent_value(const LatentRbfTask& task, std::span<const double> z) {
  double y = 0.0;
  for (int i = 1; i <= task.layout.n_clique(); ++i) y += clique_term(task, i, z);
  return y;
}

Vector transform(const LatentRbfTask& task, std::span<const double> z) {
  const Index dz = task.latent_dim();
  if (static_cast<Index>(z.size()) != dz) {
    throw ShapeError("transform: latent length " + std::to_string(z.size()) + " but d_z = " +
                     std::to_string(dz));
  }
  const Eigen::Map<const Vector> zv(z.data(), dz);
  Vector x(task.observed_dim);
  x.head(dz) = zv;
  x.tail(task.observed_dim - dz) =
      (task.embed_weight * zv + task.embed_offset).array().tanh().matrix();
  return x;
}

std::optional<Vector> invert_or_reject(const LatentRbfTask& task, std::span<const double> x) {
  if (static_cast<Index>(x.size()) != task.observed_dim) {
    throw ShapeError("invert_or_reject: design length " + std::to_string(x.size()) +
                     " but d = " + std::to_string(task.observed_dim));
  }
  const Index dz = task.latent_dim();
  const Eigen::Map<const Vector> xv(x.data(), task.observed_dim);
  if (!xv.allFinite()) return std::nullopt;
  Vector z = xv.head(dz);
  const Vector expected = (task.embed_weight * z + task.embed_offset).array().tanh().matrix();
  const double gap = (xv.tail(task.observed_dim - dz) - expected).cwiseAbs().maxCoeff();
  if (!(gap <= task.validity_tolerance)) return std::nullopt;
  return z;
}

double oracle_score(const LatentRbfTask& task, const NormalizationStats& stats,
                    std::span<const double> x) {
  const auto z = invert_or_reject(task, x);
  if (!z) return 0.0;
  return normalize_score(stats, latent_value(task, std::span<const double>(z->data(), z->size())));
}

OracleHandle make_oracle(const LatentRbfTask& task, NormalizationStats stats) {
  return OracleHandle(
      [task](std::span<const double> x) -> OracleResult {
        const auto z = invert_or_reject(task, x);
        if (!z) return {0.0, false};
        return {latent_value(task, std::span<const double>(z->data(), z->size())), true};
      },
      stats);
}

int triangles_for_latent_dim(int latent_dim) {
  if (latent_dim < 3 || latent_dim % 2 == 0) {
    throw std::invalid_argument("latent RBF dimension must be odd and >= 3, got " +
                                std::to_string(latent_dim));
  }
  return (latent_dim - 1) / 2;
}

std::pair<LatentRbfTask, Dataset> generate_latent_rbf(int n_triangles, Index observed_dim,
                                                      Index n_samples, std::uint64_t seed) {
  if (n_triangles < 1) throw std::invalid_argument("generate_latent_rbf: n_triangles must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("generate_latent_rbf: n_samples must be >= 1");
  LatentRbfTask task;
  task.layout = make_chain(n_triangles, 3, 1);
  task.seed = seed;
  const Index dz = task.latent_dim();
  if (observed_dim <= 0) observed_dim = 2 * dz;
  if (observed_dim <= dz) {
    throw std::invalid_argument("generate_latent_rbf: observed_dim " +
                                std::to_string(observed_dim) + " must exceed d_z = " +
                                std::to_string(dz));
  }
  task.observed_dim = observed_dim;

  Rng params_rng = Rng(seed).split(0);
  for (int i = 0; i < n_triangles; ++i) {
    task.centers.push_back(params_rng.normal_matrix(kRbfCentersPerClique, 3));
    Vector w(kRbfCentersPerClique);
    for (Index k = 0; k < w.size(); ++k) w(k) = params_rng.uniform(0.5, 1.5);
    task.weights.push_back(std::move(w));
  }
  task.embed_weight =
      params_rng.normal_matrix(observed_dim - dz, dz, 1.0 / std::sqrt(static_cast<double>(dz)));
  task.embed_offset = params_rng.uniform_matrix(observed_dim - dz, 1, -0.5, 0.5);

  Rng data_rng = Rng(seed).split(1);
  Dataset data;
  data.modality = Modality::kContinuous;
  data.designs.resize(n_samples, observed_dim);
  data.scores.resize(n_samples);
  Vector z(dz);
  for (Index n = 0; n < n_samples; ++n) {
    for (Index k = 0; k < dz; ++k) z(k) = data_rng.normal();
    const std::span<const double> zs(z.data(), static_cast<std::size_t>(dz));
    data.designs.row(n) = transform(task, zs).transpose();
    data.scores(n) = latent_value(task, zs);
  }
  data.stats = compute_stats(data.scores);
  return {std::move(task), std::move(data)};
}

void save_task(const LatentRbfTask& task, const std::filesystem::path& path) {
  json j;
  j["format"] = "cliqueformer.latent_rbf";
  j["version"] = 1;
  j["n_clique"] = task.layout.n_clique();
  j["clique_dim"] = task.layout.clique_dim();
  j["knot_dim"] = task.layout.knot_dim();
  j["observed_dim"] = task.observed_dim;
  j["rbf_width"] = task.rbf_width;
  j["validity_tolerance"] = task.validity_tolerance;
  j["seed"] = task.seed;
  j["centers"] = json::array();
  j["weights"] = json::array();
  for (std::size_t i = 0; i < task.centers.size(); ++i) {
    j["centers"].push_back(matrix_to_json(task.centers[i]));
    j["weights"].push_back(vector_to_json(task.weights[i]));
  }
  j["embed_weight"] = matrix_to_json(task.embed_weight);
  j["embed_offset"] = vector_to_json(task.embed_offset);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write task file " + path.string());
  out << j.dump(1) << '\n';
}

LatentRbfTask load_task(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read task file " + path.string());
  const json j = json::parse(in);
  if (j.value("format", "") != "cliqueformer.latent_rbf" || j.value("version", 0) != 1) {
    throw std::runtime_error("unrecognized task file " + path.string());
  }
  LatentRbfTask task;
  task.layout = make_chain(j.at("n_clique").get<int>(), j.at("clique_dim").get<int>(),
                           j.at("knot_dim").get<int>());
  task.observed_dim = j.at("observed_dim").get<Index>();
  task.rbf_width = j.at("rbf_width").get<double>();
  task.validity_tolerance = j.at("validity_tolerance").get<double>();
  task.seed = j.at("seed").get<std::uint64_t>();
  const Index dz = task.latent_dim();
  const auto& centers = j.at("centers");
  const auto& weights = j.at("weights");
  if (static_cast<int>(centers.size()) != task.layout.n_clique() ||
      static_cast<int>(weights.size()) != task.layout.n_clique()) {
    throw std::runtime_error("task file: per-clique parameter count mismatch");
  }
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const auto k = static_cast<Index>(centers[i].size());
    task.centers.push_back(matrix_from_json(centers[i], k, task.layout.clique_dim()));
    task.weights.push_back(vector_from_json(weights[i], k));
  }
  task.embed_weight = matrix_from_json(j.at("embed_weight"), task.observed_dim - dz, dz);
  task.embed_offset = vector_from_json(j.at("embed_offset"), task.observed_dim - dz);
  return task;
}

void save_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  for (Index c = 0; c < data.design_dim(); ++c) out << 'x' << c << ',';
  out << "y\n";
  for (Index r = 0; r < data.size(); ++r) {
    for (Index c = 0; c < data.design_dim(); ++c) out << format_double(data.designs(r, c)) << ',';
    out << format_double(data.scores(r)) << '\n';
  }
}

Dataset load_dataset_csv(const std::filesystem::path& path, Modality modality, Index vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset " + path.string() + " is empty");
  const auto width = static_cast<Index>(std::count(line.begin(), line.end(), ','));
  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Index cells = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++cells;
    }
    if (cells != width + 1) {
      throw std::runtime_error("dataset " + path.string() + ": row " + std::to_string(rows + 1) +
                               " has " + std::to_string(cells) + " cells");
    }
    ++rows;
  }
  Dataset data;
  data.modality = modality;
  data.vocab = vocab;
  data.designs.resize(rows, width);
  data.scores.resize(rows);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < width; ++c) {
      data.designs(r, c) = values[static_cast<std::size_t>(r * (width + 1) + c)];
    }
    data.scores(r) = values[static_cast<std::size_t>(r * (width + 1) + width)];
  }
  data.stats = compute_stats(data.scores);
  data.validate();
  return data;
}

}  // namespace cliqueformer
