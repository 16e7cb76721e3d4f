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

// Reverse-mode differentiation over a recorded tape of matrix operations.
//
// A Tape records every operation applied to its Vars in creation order;
// backward() walks the record in reverse and accumulates adjoints. Parameters
// live outside the tape in a ParameterSet, and their gradients are accumulated
// directly into Parameter::grad, so one tape is built per forward pass and
// thrown away afterwards.

#ifndef CLIQUEFORMER_AUTODIFF_HPP_
#define CLIQUEFORMER_AUTODIFF_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cliqueformer/fgm.hpp"
#include "cliqueformer/tensor.hpp"

namespace cliqueformer {

class Rng;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Ordered collection of named parameters. Insertion order defines the flat
/// layout used by flatten()/assign() and by checkpoints.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix init);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  std::size_t num_scalars() const;
  Vector flatten() const;
  Vector flatten_grad() const;
  void assign(const Vector& flat);
  double grad_norm() const;
  void scale_grad(double factor);
  bool all_finite() const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  /// Adjoint after Tape::backward(); zero-sized if nothing flowed here.
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;

  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Matrix value);
  /// Differentiable leaf; read its gradient with Var::grad() after backward().
  Var input(Matrix value);
  /// Leaf bound to a parameter; the same parameter maps to the same node.
  Var param(ParameterSet& set, std::size_t index);
  Var param(ParameterSet& set, std::string_view name);

  /// Seeds a 1x1 output with 1 and propagates.
  void backward(const Var& scalar);
  void backward(const Var& output, const Matrix& seed);

  const Matrix& value(int id) const;
  const Matrix& grad(int id) const;
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// Gradient accumulator of node `id`, allocated as zeros on first use.
  Matrix& grad_acc(int id);

  /// Records an operation result. `backward` is called at most once with the
  /// node's own index, after all consumers have accumulated into it.
  Var push(Matrix value, bool needs_grad, Backward backward);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Matrix* grad_sink = nullptr;
    bool needs_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  Matrix empty_;
};

// ---- elementwise and linear algebra ----
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double c);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);
/// a (R x C) plus a 1 x C row broadcast over rows.
Var add_row(const Var& a, const Var& row);
/// Repeats a T x C block `times` times vertically: (times*T) x C.
Var tile_rows(const Var& block, Index times);
Var square(const Var& a);
Var exp(const Var& a);
Var tanh(const Var& a);
Var sin(const Var& a);
Var gelu(const Var& a);
Var leaky_relu(const Var& a, double slope);
/// Values outside [lo, hi] are clamped and receive no gradient.
Var clamp(const Var& a, double lo, double hi);
/// Inverted dropout: kept entries are scaled by 1/(1-p). p == 0 is identity.
Var dropout(const Var& a, double p, Rng& rng);

// ---- shape ----
/// Row-major reinterpretation; rows*cols must be preserved.
Var reshape(const Var& a, Index rows, Index cols);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, Index start, Index count);
/// Arranges each row of a B x d_z latent matrix into its cliques:
/// row b*n_clique + (i-1) of the result holds z_b restricted to clique i.
Var gather_cliques(const Var& z, const CliqueLayout& layout);

// ---- reductions ----
Var sum_all(const Var& a);
Var mean_all(const Var& a);
/// Per-row sum, R x 1.
Var row_sum(const Var& a);
/// Per-row mean, R x 1.
Var row_mean(const Var& a);

// ---- fused layers ----
/// Row-wise layer normalization with 1 x C gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
/// Multi-head scaled dot-product self-attention. q, k, v are (B*T) x D with
/// rows grouped per sequence; heads split D into equal column blocks.
Var attention(const Var& q, const Var& k, const Var& v, Index seq_len, Index heads);
/// x is B x T scalars; weight and bias are T x C. Output row b*T+t equals
/// x(b,t) * weight.row(t) + bias.row(t).
Var position_affine(const Var& x, const Var& weight, const Var& bias);

// ---- losses (per row, R x 1) ----
/// 0.5 * sum_k mask_k (mu_k^2 + exp(lv_k) - 1 - lv_k); mask is a constant 0/1 matrix.
Var masked_kl_standard_normal(const Var& mean, const Var& log_variance, const Matrix& mask);
/// Unit-variance Gaussian negative log-likelihood of `target` under `mean`.
Var gaussian_nll(const Matrix& target, const Var& mean);
/// Softmax cross-entropy of logits against constant probability rows.
Var softmax_cross_entropy(const Var& logits, const Matrix& target);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_AUTODIFF_HPP_
