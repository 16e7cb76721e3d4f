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
#include <functional>
#include <vector>

#include "cliqueformer/autodiff.hpp"
#include "cliqueformer/fgm.hpp"
#include "cliqueformer/gradcheck.hpp"
#include "cliqueformer/rng.hpp"

using namespace cliqueformer;

namespace {

using UnaryOp = std::function<Var(Tape&, const std::vector<Var>&)>;

// Contracts the op's output with a fixed random matrix so every output entry
// contributes to the scalar, then finite-differences every input entry.
double op_deviation(const UnaryOp& op, const std::vector<Matrix>& inputs, std::uint64_t seed) {
  std::vector<Index> sizes;
  Index total = 0;
  for (const auto& m : inputs) {
    sizes.push_back(m.size());
    total += m.size();
  }
  Vector flat(total);
  Index off = 0;
  for (const auto& m : inputs) {
    flat.segment(off, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    off += m.size();
  }
  Matrix weights;
  DifferentiableFn fn = [&](const Vector& x, Vector& grad) {
    Tape tape;
    std::vector<Var> vars;
    Index o = 0;
    for (const auto& m : inputs) {
      vars.push_back(tape.input(Eigen::Map<const Matrix>(x.data() + o, m.rows(), m.cols())));
      o += m.size();
    }
    Var out = op(tape, vars);
    if (weights.size() == 0) {
      Rng rng(seed);
      weights = rng.normal_matrix(out.rows(), out.cols());
    }
    Var loss = sum_all(hadamard(out, tape.constant(weights)));
    tape.backward(loss);
    grad.resize(x.size());
    o = 0;
    for (const auto& v : vars) {
      const Matrix& g = v.grad();
      if (g.size() == 0) {
        grad.segment(o, v.value().size()).setZero();
      } else {
        grad.segment(o, g.size()) = Eigen::Map<const Vector>(g.data(), g.size());
      }
      o += v.value().size();
    }
    return loss.scalar();
  };
  return grad_check(fn, flat, 1e-6);
}

}  // namespace

TEST_CASE("elementwise and linear ops pass gradient checks") {
  Rng rng(1);
  const Matrix a = rng.normal_matrix(3, 4), b = rng.normal_matrix(3, 4), c = rng.normal_matrix(4, 2);
  const Matrix row = rng.normal_matrix(1, 4);
  CHECK(op_deviation([](Tape&, const auto& v) { return matmul(v[0], v[1]); }, {a, c}, 2) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return v[0] + v[1]; }, {a, b}, 3) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return v[0] - v[1]; }, {a, b}, 3) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return hadamard(v[0], v[1]); }, {a, b}, 4) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return scale(-v[0], 2.5); }, {a}, 5) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return add_scalar(v[0], 1.0); }, {a}, 5) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return add_row(v[0], v[1]); }, {a, row}, 6) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return tile_rows(v[0], 3); }, {a}, 6) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return square(v[0]); }, {a}, 7) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return exp(v[0]); }, {a}, 8) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return tanh(v[0]); }, {a}, 9) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return sin(v[0]); }, {a}, 10) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return gelu(v[0]); }, {a}, 11) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return leaky_relu(v[0], 0.1); }, {a}, 12) < 1e-6);
}

TEST_CASE("shape ops and reductions pass gradient checks") {
  Rng rng(2);
  const Matrix a = rng.normal_matrix(4, 6), b = rng.normal_matrix(4, 3);
  CHECK(op_deviation([](Tape&, const auto& v) { return reshape(v[0], 8, 3); }, {a}, 1) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return concat_cols(v[0], v[1]); }, {a, b}, 2) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return slice_cols(v[0], 2, 3); }, {a}, 3) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return sum_all(v[0]); }, {a}, 4) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return mean_all(v[0]); }, {a}, 5) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return row_sum(v[0]); }, {a}, 6) < 1e-6);
  CHECK(op_deviation([](Tape&, const auto& v) { return row_mean(v[0]); }, {a}, 7) < 1e-6);
  const CliqueLayout layout = make_chain(3, 3, 1);
  const Matrix z = rng.normal_matrix(2, layout.latent_dim());
  CHECK(op_deviation([&](Tape&, const auto& v) { return gather_cliques(v[0], layout); }, {z}, 8) <
        1e-6);
}

TEST_CASE("fused layers pass gradient checks") {
  Rng rng(3);
  const Matrix x = rng.normal_matrix(6, 4);
  const Matrix gain = rng.normal_matrix(1, 4), bias = rng.normal_matrix(1, 4);
  CHECK(op_deviation([](Tape&, const auto& v) { return layer_norm(v[0], v[1], v[2]); },
                     {x, gain, bias}, 1) < 1e-5);
  // Two sequences of length 3, width 4, two heads.
  const Matrix q = rng.normal_matrix(6, 4), k = rng.normal_matrix(6, 4), val = rng.normal_matrix(6, 4);
  CHECK(op_deviation([](Tape&, const auto& v) { return attention(v[0], v[1], v[2], 3, 2); },
                     {q, k, val}, 2) < 1e-5);
  const Matrix s = rng.normal_matrix(2, 3), w = rng.normal_matrix(3, 5), bb = rng.normal_matrix(3, 5);
  CHECK(op_deviation([](Tape&, const auto& v) { return position_affine(v[0], v[1], v[2]); },
                     {s, w, bb}, 3) < 1e-6);
}

TEST_CASE("losses pass gradient checks and match closed forms") {
  Rng rng(4);
  const Matrix mean = rng.normal_matrix(3, 5), lv = rng.normal_matrix(3, 5, 0.5);
  Matrix mask = Matrix::Zero(3, 5);
  mask(0, 1) = mask(0, 2) = mask(1, 0) = mask(2, 4) = 1.0;
  CHECK(op_deviation([&](Tape&, const auto& v) { return masked_kl_standard_normal(v[0], v[1], mask); },
                     {mean, lv}, 1) < 1e-6);
  const Matrix target = rng.normal_matrix(3, 5);
  CHECK(op_deviation([&](Tape&, const auto& v) { return gaussian_nll(target, v[0]); }, {mean}, 2) <
        1e-6);
  Matrix probs = rng.uniform_matrix(4, 3, 0.1, 1.0);
  for (Index r = 0; r < 4; ++r) probs.row(r) /= probs.row(r).sum();
  const Matrix logits = rng.normal_matrix(4, 3);
  CHECK(op_deviation([&](Tape&, const auto& v) { return softmax_cross_entropy(v[0], probs); },
                     {logits}, 3) < 1e-6);

  Tape tape;
  Var kl = masked_kl_standard_normal(tape.constant(mean), tape.constant(lv), mask);
  const double expect0 = 0.5 * (mean(0, 1) * mean(0, 1) + std::exp(lv(0, 1)) - 1 - lv(0, 1)) +
                         0.5 * (mean(0, 2) * mean(0, 2) + std::exp(lv(0, 2)) - 1 - lv(0, 2));
  CHECK(kl.value()(0, 0) == doctest::Approx(expect0));
}

TEST_CASE("clamp blocks gradients outside its range") {
  Tape tape;
  Matrix x(1, 3);
  x << -10.0, 0.5, 10.0;
  Var in = tape.input(x);
  Var out = clamp(in, -8.0, 8.0);
  tape.backward(sum_all(out));
  CHECK(out.value()(0, 0) == -8.0);
  CHECK(out.value()(0, 2) == 8.0);
  CHECK(in.grad()(0, 0) == 0.0);
  CHECK(in.grad()(0, 1) == 1.0);
  CHECK(in.grad()(0, 2) == 0.0);
}

TEST_CASE("dropout") {
  Rng rng(5);
  Tape tape;
  const Matrix ones = Matrix::Ones(200, 50);
  Var kept = dropout(tape.constant(ones), 0.0, rng);
  CHECK(kept.value() == ones);
  Var dropped = dropout(tape.constant(ones), 0.5, rng);
  const double mean = dropped.value().mean();
  CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
  for (Index i = 0; i < dropped.value().size(); ++i) {
    const double v = dropped.value().data()[i];
    CHECK((v == 0.0 || v == 2.0));
  }
}

TEST_CASE("shape errors are reported") {
  Tape tape;
  Var a = tape.constant(Matrix::Zero(2, 3));
  Var b = tape.constant(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(reshape(a, 4, 2), ShapeError);
}

TEST_CASE("a shared parameter accumulates gradients from every use") {
  ParameterSet params;
  params.add("w", Matrix::Constant(1, 1, 3.0));
  Tape tape;
  Var w1 = tape.param(params, "w");
  Var w2 = tape.param(params, "w");
  CHECK(w1.id() == w2.id());
  tape.backward(sum_all(hadamard(w1, w2)));
  CHECK(params.at("w").grad(0, 0) == doctest::Approx(6.0));
}
