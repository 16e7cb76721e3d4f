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

#include "cliqueformer/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "cliqueformer/rng.hpp"

namespace cliqueformer {

DiagonalGaussian::DiagonalGaussian(Vector mean, Vector log_variance)
    : mean_(std::move(mean)), log_variance_(std::move(log_variance)) {
  if (mean_.size() != log_variance_.size()) {
    throw ShapeError("DiagonalGaussian: mean has " + std::to_string(mean_.size()) +
                     " entries, log_variance " + std::to_string(log_variance_.size()));
  }
  log_variance_ = log_variance_.cwiseMax(kLogVarianceMin).cwiseMin(kLogVarianceMax);
}

double kl_to_standard_normal(const DiagonalGaussian& q, std::span<const int> indices) {
  double kl = 0.0;
  for (int k : indices) {
    if (k < 0 || k >= q.dim()) {
      throw std::out_of_range("kl_to_standard_normal: index " + std::to_string(k) +
                              " outside [0, " + std::to_string(q.dim()) + ")");
    }
    const double mu = q.mean()(k);
    const double lv = q.log_variance()(k);
    // expm1 keeps (sigma^2 - 1 - log sigma^2) accurate when log sigma^2 is tiny.
    kl += 0.5 * (mu * mu + std::expm1(lv) - lv);
  }
  return kl;
}

double kl_to_standard_normal(const DiagonalGaussian& q) {
  double kl = 0.0;
  for (Index k = 0; k < q.dim(); ++k) {
    const double mu = q.mean()(k);
    const double lv = q.log_variance()(k);
    kl += 0.5 * (mu * mu + std::expm1(lv) - lv);
  }
  return kl;
}

Vector reparam_sample(const DiagonalGaussian& q, Rng& rng) {
  Vector noise(q.dim());
  for (Index k = 0; k < noise.size(); ++k) noise(k) = rng.normal();
  return reparam_sample(q, noise);
}

Vector reparam_sample(const DiagonalGaussian& q, const Vector& noise) {
  if (noise.size() != q.dim()) throw ShapeError("reparam_sample: noise length mismatch");
  return q.mean().array() + (0.5 * q.log_variance().array()).exp() * noise.array();
}

Var reparam_sample(const Var& mean, const Var& log_variance, const Matrix& noise) {
  check_same_shape(mean.value(), noise, "reparam_sample noise");
  Tape& t = mean.tape();
  Var std_dev = exp(scale(log_variance, 0.5));
  return add(mean, hadamard(std_dev, t.constant(noise)));
}

double gaussian_recon_nll(std::span<const double> x, std::span<const double> mean) {
  if (x.size() != mean.size()) {
    throw ShapeError("gaussian_recon_nll: length " + std::to_string(x.size()) + " vs " +
                     std::to_string(mean.size()));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - mean[i]) * (x[i] - mean[i]);
  return 0.5 * sq + 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

double categorical_recon_nll(const Matrix& onehot, const Matrix& logits) {
  check_same_shape(onehot, logits, "categorical_recon_nll");
  double total = 0.0;
  for (Index r = 0; r < onehot.rows(); ++r) {
    if (std::abs(onehot.row(r).sum() - 1.0) > 1e-9 || onehot.row(r).minCoeff() < 0.0) {
      throw std::invalid_argument("categorical_recon_nll: row " + std::to_string(r) +
                                  " is not a probability vector");
    }
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - onehot.row(r).dot(logits.row(r));
  }
  return total;
}

}  // namespace cliqueformer
