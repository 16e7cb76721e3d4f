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

#include "cliqueformer/design.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cliqueformer/optim.hpp"
#include "cliqueformer/rng.hpp"

namespace cliqueformer {

DesignBatch init_designs(Cliqueformer& model, const Dataset& data, const DesignOptConfig& config,
                         Rng& rng) {
  if (data.size() < 1) throw std::invalid_argument("init_designs: empty dataset");
  if (config.batch_size < 1) throw std::invalid_argument("init_designs: batch_size must be >= 1");
  DesignBatch batch;
  batch.source_rows.resize(static_cast<std::size_t>(config.batch_size));
  for (auto& r : batch.source_rows) {
    r = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(data.size())));
  }
  const PosteriorBatch q = model.encode_eval(data.model_inputs(batch.source_rows));
  const Matrix noise = rng.normal_matrix(q.mean.rows(), q.mean.cols());
  batch.initial_latents =
      (q.mean.array() + (0.5 * q.log_variance.array()).exp() * noise.array()).matrix();
  batch.latents = batch.initial_latents;
  return batch;
}

RowSurrogate model_surrogate(Cliqueformer& model) {
  return [&model](const Matrix& z, Matrix& grad) -> Vector {
    Tape tape;
    Var zv = tape.input(z);
    Var pred = model.predict(tape, zv, ForwardContext::eval());
    // Seeding with ones gives each row the gradient of its own prediction.
    tape.backward(pred, Matrix::Ones(pred.rows(), 1));
    grad = zv.grad();
    return pred.value().col(0);
  };
}

double objective(Cliqueformer& model, const Matrix& z, Matrix* grad) {
  if (z.cols() != model.config().latent_dim()) {
    throw ShapeError("objective: latent width mismatch");
  }
  Matrix row_grad;
  const Vector values = model_surrogate(model)(z, row_grad);
  model.params().zero_grad();
  if (grad != nullptr) *grad = row_grad / static_cast<double>(z.rows());
  return values.mean();
}

std::vector<double> ascend_latents(const RowSurrogate& surrogate, Matrix& z,
                                   const DesignOptConfig& config) {
  if (config.steps < 0) throw std::invalid_argument("ascend_latents: steps must be >= 0");
  if (config.weight_decay < 0.0) {
    throw std::invalid_argument("ascend_latents: weight_decay must be >= 0");
  }
  const bool explicit_decay = config.decay == DecayMode::kExplicit;
  OptimizerState opt(AdamWOptions{config.lr, 0.9, 0.999, 1e-8,
                                  explicit_decay ? 0.0 : config.weight_decay});
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(config.steps + 1));
  Matrix grad;
  for (Index step = 0; step < config.steps; ++step) {
    const Vector values = surrogate(z, grad);
    trace.push_back(values.mean());
    if (explicit_decay) z *= (1.0 - config.weight_decay);
    // Ascent: the optimizer minimizes, so hand it the negated gradient.
    grad = -grad;
    adamw_update(z, grad, opt);
    if (!z.allFinite()) {
      throw std::runtime_error("ascend_latents: non-finite latent after step " +
                               std::to_string(step));
    }
  }
  trace.push_back(surrogate(z, grad).mean());
  return trace;
}

DesignBatch optimize_designs(Cliqueformer& model, const Dataset& data,
                             const DesignOptConfig& config) {
  Rng rng(config.seed);
  DesignBatch batch = init_designs(model, data, config, rng);
  batch.surrogate_trace = ascend_latents(model_surrogate(model), batch.latents, config);
  model.params().zero_grad();
  Rng decode_rng = rng.split(7);
  batch.designs = model.decode_designs(batch.latents, config.decode, &decode_rng);
  return batch;
}

void write_designs_csv(const Matrix& designs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write designs " + path.string());
  for (Index c = 0; c < designs.cols(); ++c) out << (c ? "," : "") << 'x' << c;
  out << '\n';
  char buf[32];
  for (Index r = 0; r < designs.rows(); ++r) {
    for (Index c = 0; c < designs.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", designs(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

Matrix read_designs_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read designs " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + " is empty");
  const Index width = static_cast<Index>(std::count(line.begin(), line.end(), ',')) + 1;
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
    if (cells != width) throw std::runtime_error(path.string() + ": ragged row");
    ++rows;
  }
  Matrix out(rows, width);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < width; ++c) out(r, c) = values[static_cast<std::size_t>(r * width + c)];
  }
  return out;
}

}  // namespace cliqueformer
