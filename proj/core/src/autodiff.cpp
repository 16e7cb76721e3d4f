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

#include "cliqueformer/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "cliqueformer/rng.hpp"

namespace cliqueformer {

// ---------------------------------------------------------------------------
// ParameterSet

std::size_t ParameterSet::add(std::string name, Matrix init) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Parameter p;
  p.name = std::move(name);
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  index_.emplace(p.name, params_.size());
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

Parameter& ParameterSet::at(std::string_view name) { return params_[index_of(name)]; }
const Parameter& ParameterSet::at(std::string_view name) const {
  return params_[index_of(name)];
}
bool ParameterSet::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

Vector ParameterSet::flatten() const {
  Vector out(static_cast<Index>(num_scalars()));
  Index off = 0;
  for (const auto& p : params_) {
    out.segment(off, p.value.size()) = p.value.reshaped<Eigen::RowMajor>();
    off += p.value.size();
  }
  return out;
}

Vector ParameterSet::flatten_grad() const {
  Vector out(static_cast<Index>(num_scalars()));
  Index off = 0;
  for (const auto& p : params_) {
    out.segment(off, p.grad.size()) = p.grad.reshaped<Eigen::RowMajor>();
    off += p.grad.size();
  }
  return out;
}

void ParameterSet::assign(const Vector& flat) {
  if (flat.size() != static_cast<Index>(num_scalars())) {
    throw ShapeError("ParameterSet::assign: expected " + std::to_string(num_scalars()) +
                     " values, got " + std::to_string(flat.size()));
  }
  Index off = 0;
  for (auto& p : params_) {
    p.value.reshaped<Eigen::RowMajor>() = flat.segment(off, p.value.size());
    off += p.value.size();
  }
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

void ParameterSet::scale_grad(double factor) {
  for (auto& p : params_) p.grad *= factor;
}

bool ParameterSet::all_finite() const {
  for (const auto& p : params_) {
    if (!p.value.allFinite()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Var / Tape

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("Var::scalar on " + shape_str(v.rows(), v.cols()));
  return v(0, 0);
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external != nullptr ? *n.external : n.value;
}

const Matrix& Tape::grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad_sink != nullptr) return *n.grad_sink;
  return n.grad;
}

Matrix& Tape::grad_acc(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad_sink != nullptr) return *n.grad_sink;
  if (n.grad.size() == 0) {
    const Matrix& v = value(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::input(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::param(ParameterSet& set, std::size_t index) {
  Parameter& p = set[index];
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
    p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
  }
  Node n;
  n.external = &p.value;
  n.grad_sink = &p.grad;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::param(ParameterSet& set, std::string_view name) {
  return param(set, set.index_of(name));
}

void Tape::backward(const Var& scalar) {
  if (scalar.value().size() != 1) {
    throw ShapeError("Tape::backward needs a 1x1 output, got " +
                     shape_str(scalar.rows(), scalar.cols()));
  }
  backward(scalar, Matrix::Ones(1, 1));
}

void Tape::backward(const Var& output, const Matrix& seed) {
  if (&output.tape() != this) throw std::invalid_argument("Tape::backward: foreign Var");
  check_same_shape(output.value(), seed, "Tape::backward seed");
  if (!needs_grad(output.id())) return;
  grad_acc(output.id()) += seed;
  for (int id = output.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || !n.backward) continue;
    if (n.grad_sink == nullptr && n.grad.size() == 0) continue;  // nothing flowed here
    n.backward(*this, id);
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
  return a.tape();
}

bool any_grad(const Var& a) { return a.tape().needs_grad(a.id()); }
bool any_grad(const Var& a, const Var& b) { return any_grad(a) || any_grad(b); }

const Matrix& g_of(Tape& t, int self) { return t.grad(self); }

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + shape_str(av.rows(), av.cols()) + " x " +
                     shape_str(bv.rows(), bv.cols()));
  }
  Matrix out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), any_grad(a, b), [ia, ib](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    if (tp.needs_grad(ia)) tp.grad_acc(ia).noalias() += g * tp.value(ib).transpose();
    if (tp.needs_grad(ib)) tp.grad_acc(ib).noalias() += tp.value(ia).transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "add");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), any_grad(a, b), [ia, ib](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    if (tp.needs_grad(ia)) tp.grad_acc(ia) += g;
    if (tp.needs_grad(ib)) tp.grad_acc(ib) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), any_grad(a, b), [ia, ib](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    if (tp.needs_grad(ia)) tp.grad_acc(ia) += g;
    if (tp.needs_grad(ib)) tp.grad_acc(ib) -= g;
  });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "hadamard");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()), any_grad(a, b), [ia, ib](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    if (tp.needs_grad(ia)) tp.grad_acc(ia) += g.cwiseProduct(tp.value(ib));
    if (tp.needs_grad(ib)) tp.grad_acc(ib) += g.cwiseProduct(tp.value(ia));
  });
}

Var scale(const Var& a, double factor) {
  const int ia = a.id();
  return a.tape().push(a.value() * factor, any_grad(a), [ia, factor](Tape& tp, int self) {
    tp.grad_acc(ia) += g_of(tp, self) * factor;
  });
}

Var add_scalar(const Var& a, double c) {
  const int ia = a.id();
  return a.tape().push((a.value().array() + c).matrix(), any_grad(a),
                       [ia](Tape& tp, int self) { tp.grad_acc(ia) += g_of(tp, self); });
}

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator-(const Var& a) { return scale(a, -1.0); }

Var add_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: " + shape_str(av.rows(), av.cols()) + " + " +
                     shape_str(rv.rows(), rv.cols()));
  }
  Matrix out = av;
  out.rowwise() += rv.row(0);
  const int ia = a.id(), ir = row.id();
  return t.push(std::move(out), any_grad(a, row), [ia, ir](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    if (tp.needs_grad(ia)) tp.grad_acc(ia) += g;
    if (tp.needs_grad(ir)) tp.grad_acc(ir) += g.colwise().sum();
  });
}

Var tile_rows(const Var& block, Index times) {
  const Matrix& bv = block.value();
  if (times < 1) throw ShapeError("tile_rows: times must be >= 1");
  const Index rows = bv.rows();
  Matrix out(rows * times, bv.cols());
  for (Index k = 0; k < times; ++k) out.middleRows(k * rows, rows) = bv;
  const int ib = block.id();
  return block.tape().push(std::move(out), any_grad(block), [ib, rows, times](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    Matrix& acc = tp.grad_acc(ib);
    for (Index k = 0; k < times; ++k) acc += g.middleRows(k * rows, rows);
  });
}

Var square(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().square().matrix(), any_grad(a), [ia](Tape& tp, int self) {
    tp.grad_acc(ia) += (2.0 * g_of(tp, self).array() * tp.value(ia).array()).matrix();
  });
}


Var exp(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().exp().matrix(), any_grad(a), [ia](Tape& tp, int self) {
    tp.grad_acc(ia) += g_of(tp, self).cwiseProduct(tp.value(self));
  });
}

Var tanh(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().tanh().matrix(), any_grad(a), [ia](Tape& tp, int self) {
    const auto y = tp.value(self).array();
    tp.grad_acc(ia) += (g_of(tp, self).array() * (1.0 - y.square())).matrix();
  });
}

Var sin(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().sin().matrix(), any_grad(a), [ia](Tape& tp, int self) {
    tp.grad_acc(ia) += (g_of(tp, self).array() * tp.value(ia).array().cos()).matrix();
  });
}

Var gelu(const Var& a) {
  const int ia = a.id();
  const Matrix& x = a.value();
  // Keep the normal CDF from the forward pass; the backward only needs an exp.
  Matrix cdf = x.unaryExpr([](double v) { return 0.5 * std::erfc(-v * std::numbers::sqrt2 / 2.0); });
  Matrix out = x.cwiseProduct(cdf);
  return a.tape().push(std::move(out), any_grad(a),
                       [ia, cdf = std::move(cdf)](Tape& tp, int self) {
                         const auto xv = tp.value(ia).array();
                         constexpr double kInvSqrt2Pi = 0.3989422804014327;
                         tp.grad_acc(ia).array() +=
                             g_of(tp, self).array() *
                             (cdf.array() + xv * kInvSqrt2Pi * (-0.5 * xv.square()).exp());
                       });
}

Var leaky_relu(const Var& a, double slope) {
  const int ia = a.id();
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return a.tape().push(std::move(out), any_grad(a), [ia, slope](Tape& tp, int self) {
    const Matrix d = tp.value(ia).unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
    tp.grad_acc(ia) += g_of(tp, self).cwiseProduct(d);
  });
}

Var clamp(const Var& a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  const int ia = a.id();
  return a.tape().push(a.value().cwiseMax(lo).cwiseMin(hi), any_grad(a),
                       [ia, lo, hi](Tape& tp, int self) {
                         const Matrix& x = tp.value(ia);
                         const Matrix& g = g_of(tp, self);
                         Matrix& acc = tp.grad_acc(ia);
                         for (Index i = 0; i < x.size(); ++i) {
                           const double v = x.data()[i];
                           if (v >= lo && v <= hi) acc.data()[i] += g.data()[i];
                         }
                       });
}

Var dropout(const Var& a, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must lie in [0, 1)");
  if (p == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? 0.0 : keep_scale;
  Tape& t = a.tape();
  Var m = t.constant(std::move(mask));
  return hadamard(a, m);
}

// ---- shape ----

Var reshape(const Var& a, Index rows, Index cols) {
  const Matrix& av = a.value();
  if (rows * cols != av.size()) {
    throw ShapeError("reshape: " + shape_str(av.rows(), av.cols()) + " -> " +
                     shape_str(rows, cols));
  }
  Matrix out = Eigen::Map<const Matrix>(av.data(), rows, cols);
  const int ia = a.id();
  const Index r0 = av.rows(), c0 = av.cols();
  return a.tape().push(std::move(out), any_grad(a), [ia, r0, c0](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    tp.grad_acc(ia) += Eigen::Map<const Matrix>(g.data(), r0, c0);
  });
}

Var concat_cols(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row mismatch " + std::to_string(a.rows()) + " vs " +
                     std::to_string(b.rows()));
  }
  const Index ca = a.cols(), cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  out.leftCols(ca) = a.value();
  out.rightCols(cb) = b.value();
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), any_grad(a, b), [ia, ib, ca, cb](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    if (tp.needs_grad(ia)) tp.grad_acc(ia) += g.leftCols(ca);
    if (tp.needs_grad(ib)) tp.grad_acc(ib) += g.rightCols(cb);
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " +
                     std::to_string(a.cols()) + " columns");
  }
  const int ia = a.id();
  return a.tape().push(a.value().middleCols(start, count), any_grad(a),
                       [ia, start, count](Tape& tp, int self) {
                         tp.grad_acc(ia).middleCols(start, count) += g_of(tp, self);
                       });
}

Var gather_cliques(const Var& z, const CliqueLayout& layout) {
  const Matrix& zv = z.value();
  if (zv.cols() != layout.latent_dim()) {
    throw ShapeError("gather_cliques: latent width " + std::to_string(zv.cols()) +
                     " but layout has d_z = " + std::to_string(layout.latent_dim()));
  }
  const Index n = layout.n_clique(), dc = layout.clique_dim(), stride = layout.stride();
  const Index batch = zv.rows();
  Matrix out(batch * n, dc);
  for (Index b = 0; b < batch; ++b) {
    for (Index i = 0; i < n; ++i) out.row(b * n + i) = zv.row(b).segment(i * stride, dc);
  }
  const int iz = z.id();
  return z.tape().push(std::move(out), any_grad(z), [iz, n, dc, stride, batch](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    Matrix& acc = tp.grad_acc(iz);
    for (Index b = 0; b < batch; ++b) {
      for (Index i = 0; i < n; ++i) acc.row(b).segment(i * stride, dc) += g.row(b * n + i);
    }
  });
}

// ---- reductions ----

Var sum_all(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const int ia = a.id();
  return a.tape().push(std::move(out), any_grad(a), [ia](Tape& tp, int self) {
    tp.grad_acc(ia).array() += g_of(tp, self)(0, 0);
  });
}

Var mean_all(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean_all of empty matrix");
  return scale(sum_all(a), 1.0 / n);
}

Var row_sum(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().rowwise().sum(), any_grad(a), [ia](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    Matrix& acc = tp.grad_acc(ia);
    acc.colwise() += g.col(0);
  });
}

Var row_mean(const Var& a) {
  if (a.cols() == 0) throw ShapeError("row_mean of zero columns");
  return scale(row_sum(a), 1.0 / static_cast<double>(a.cols()));
}

// ---- fused layers ----

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  Tape& t = same_tape(x, gain);
  const Matrix& xv = x.value();
  const Index rows = xv.rows(), cols = xv.cols();
  if (gain.rows() != 1 || gain.cols() != cols || bias.rows() != 1 || bias.cols() != cols) {
    throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(cols));
  }
  Matrix xhat(rows, cols);
  Vector inv_std(rows);
  for (Index r = 0; r < rows; ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  const bool needs = any_grad(x) || any_grad(gain) || any_grad(bias);
  return t.push(std::move(out), needs,
                [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp,
                                                                                   int self) {
                  const Matrix& g = g_of(tp, self);
                  if (tp.needs_grad(ig)) {
                    tp.grad_acc(ig) += g.cwiseProduct(xhat).colwise().sum();
                  }
                  if (tp.needs_grad(ib)) tp.grad_acc(ib) += g.colwise().sum();
                  if (tp.needs_grad(ix)) {
                    const auto gain_row = tp.value(ig).row(0).array();
                    Matrix& acc = tp.grad_acc(ix);
                    const double c = static_cast<double>(xhat.cols());
                    for (Index r = 0; r < xhat.rows(); ++r) {
                      const Eigen::ArrayXd dxhat = (g.row(r).array() * gain_row).transpose();
                      const double s1 = dxhat.sum();
                      const double s2 = (dxhat * xhat.row(r).transpose().array()).sum();
                      acc.row(r).array() += (inv_std(r) / c) *
                          (c * dxhat - s1 - xhat.row(r).transpose().array() * s2).transpose();
                    }
                  }
                });
}

Var attention(const Var& q, const Var& k, const Var& v, Index seq_len, Index heads) {
  Tape& t = same_tape(q, k);
  const Matrix& qv = q.value();
  check_same_shape(qv, k.value(), "attention q/k");
  check_same_shape(qv, v.value(), "attention q/v");
  if (seq_len < 1 || qv.rows() % seq_len != 0) {
    throw ShapeError("attention: rows " + std::to_string(qv.rows()) +
                     " not a multiple of seq_len " + std::to_string(seq_len));
  }
  if (heads < 1 || qv.cols() % heads != 0) {
    throw ShapeError("attention: width " + std::to_string(qv.cols()) +
                     " not divisible by heads " + std::to_string(heads));
  }
  const Index batch = qv.rows() / seq_len;
  const Index dh = qv.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();

  // probs stores softmax weights for every (sequence, head) as consecutive
  // seq_len x seq_len blocks.
  Matrix probs(batch * heads * seq_len, seq_len);
  Matrix out(qv.rows(), qv.cols());
  Matrix scores(seq_len, seq_len);
  for (Index b = 0; b < batch; ++b) {
    for (Index h = 0; h < heads; ++h) {
      const auto qb = qv.block(b * seq_len, h * dh, seq_len, dh);
      const auto kb = kv.block(b * seq_len, h * dh, seq_len, dh);
      const auto vb = vv.block(b * seq_len, h * dh, seq_len, dh);
      scores.noalias() = qb * kb.transpose();
      scores *= inv_sqrt;
      for (Index r = 0; r < seq_len; ++r) {
        const double m = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - m).exp();
        scores.row(r) /= scores.row(r).sum();
      }
      probs.middleRows((b * heads + h) * seq_len, seq_len) = scores;
      out.block(b * seq_len, h * dh, seq_len, dh).noalias() = scores * vb;
    }
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  const bool needs = any_grad(q) || any_grad(k) || any_grad(v);
  return t.push(
      std::move(out), needs,
      [iq, ik, iv, batch, heads, seq_len, dh, inv_sqrt, probs = std::move(probs)](Tape& tp,
                                                                                 int self) {
        const Matrix& g = g_of(tp, self);
        const Matrix& qv2 = tp.value(iq);
        const Matrix& kv2 = tp.value(ik);
        const Matrix& vv2 = tp.value(iv);
        const bool gq = tp.needs_grad(iq), gk = tp.needs_grad(ik), gv = tp.needs_grad(iv);
        Matrix* dq = gq ? &tp.grad_acc(iq) : nullptr;
        Matrix* dk = gk ? &tp.grad_acc(ik) : nullptr;
        Matrix* dv = gv ? &tp.grad_acc(iv) : nullptr;
        Matrix dp(seq_len, seq_len);
        Matrix ds(seq_len, seq_len);
        for (Index b = 0; b < batch; ++b) {
          for (Index h = 0; h < heads; ++h) {
            const auto p = probs.middleRows((b * heads + h) * seq_len, seq_len);
            const auto go = g.block(b * seq_len, h * dh, seq_len, dh);
            if (gv) dv->block(b * seq_len, h * dh, seq_len, dh).noalias() += p.transpose() * go;
            if (!gq && !gk) continue;
            dp.noalias() = go * vv2.block(b * seq_len, h * dh, seq_len, dh).transpose();
            for (Index r = 0; r < seq_len; ++r) {
              const double dot = dp.row(r).dot(p.row(r));
              ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
            }
            ds *= inv_sqrt;
            if (gq) {
              dq->block(b * seq_len, h * dh, seq_len, dh).noalias() +=
                  ds * kv2.block(b * seq_len, h * dh, seq_len, dh);
            }
            if (gk) {
              dk->block(b * seq_len, h * dh, seq_len, dh).noalias() +=
                  ds.transpose() * qv2.block(b * seq_len, h * dh, seq_len, dh);
            }
          }
        }
      });
}

Var position_affine(const Var& x, const Var& weight, const Var& bias) {
  Tape& t = same_tape(x, weight);
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  const Index batch = xv.rows(), len = xv.cols(), width = wv.cols();
  if (wv.rows() != len) {
    throw ShapeError("position_affine: " + std::to_string(len) + " positions but weight has " +
                     std::to_string(wv.rows()) + " rows");
  }
  check_same_shape(wv, bias.value(), "position_affine weight/bias");
  Matrix out(batch * len, width);
  for (Index b = 0; b < batch; ++b) {
    for (Index p = 0; p < len; ++p) {
      out.row(b * len + p) = xv(b, p) * wv.row(p) + bias.value().row(p);
    }
  }
  const int ix = x.id(), iw = weight.id(), ib = bias.id();
  const bool needs = any_grad(x) || any_grad(weight) || any_grad(bias);
  return t.push(std::move(out), needs, [ix, iw, ib, batch, len](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    const Matrix& xv2 = tp.value(ix);
    const Matrix& wv2 = tp.value(iw);
    const bool gx = tp.needs_grad(ix), gw = tp.needs_grad(iw), gb = tp.needs_grad(ib);
    Matrix* dx = gx ? &tp.grad_acc(ix) : nullptr;
    Matrix* dw = gw ? &tp.grad_acc(iw) : nullptr;
    Matrix* db = gb ? &tp.grad_acc(ib) : nullptr;
    for (Index b = 0; b < batch; ++b) {
      for (Index p = 0; p < len; ++p) {
        const auto gr = g.row(b * len + p);
        if (gx) (*dx)(b, p) += gr.dot(wv2.row(p));
        if (gw) dw->row(p) += xv2(b, p) * gr;
        if (gb) db->row(p) += gr;
      }
    }
  });
}

// ---- losses ----

Var masked_kl_standard_normal(const Var& mean, const Var& log_variance, const Matrix& mask) {
  Tape& t = same_tape(mean, log_variance);
  check_same_shape(mean.value(), log_variance.value(), "masked_kl mean/log_variance");
  check_same_shape(mean.value(), mask, "masked_kl mask");
  const auto mu = mean.value().array();
  const auto lv = log_variance.value().array();
  Matrix out = (0.5 * mask.array() * (mu.square() + lv.exp() - 1.0 - lv)).matrix().rowwise().sum();
  const int im = mean.id(), il = log_variance.id();
  return t.push(std::move(out), any_grad(mean, log_variance), [im, il, mask](Tape& tp, int self) {
    const Matrix& g = g_of(tp, self);
    if (tp.needs_grad(im)) {
      Matrix d = mask.cwiseProduct(tp.value(im));
      d.array().colwise() *= g.col(0).array();
      tp.grad_acc(im) += d;
    }
    if (tp.needs_grad(il)) {
      Matrix d = (0.5 * mask.array() * (tp.value(il).array().exp() - 1.0)).matrix();
      d.array().colwise() *= g.col(0).array();
      tp.grad_acc(il) += d;
    }
  });
}

Var gaussian_nll(const Matrix& target, const Var& mean) {
  check_same_shape(target, mean.value(), "gaussian_nll");
  const double dim = static_cast<double>(target.cols());
  const double constant = 0.5 * dim * std::log(2.0 * std::numbers::pi);
  Matrix out = (0.5 * (target - mean.value()).array().square()).matrix().rowwise().sum();
  out.array() += constant;
  const int im = mean.id();
  return mean.tape().push(std::move(out), any_grad(mean), [im, target](Tape& tp, int self) {
    Matrix d = tp.value(im) - target;
    d.array().colwise() *= g_of(tp, self).col(0).array();
    tp.grad_acc(im) += d;
  });
}

Var softmax_cross_entropy(const Var& logits, const Matrix& target) {
  check_same_shape(target, logits.value(), "softmax_cross_entropy");
  const Matrix& lv = logits.value();
  Matrix probs(lv.rows(), lv.cols());
  Matrix out(lv.rows(), 1);
  for (Index r = 0; r < lv.rows(); ++r) {
    const double m = lv.row(r).maxCoeff();
    probs.row(r) = (lv.row(r).array() - m).exp();
    const double z = probs.row(r).sum();
    probs.row(r) /= z;
    const double lse = m + std::log(z);
    out(r, 0) = target.row(r).sum() * lse - target.row(r).dot(lv.row(r));
  }
  const int il = logits.id();
  return logits.tape().push(std::move(out), any_grad(logits),
                            [il, target, probs = std::move(probs)](Tape& tp, int self) {
                              const Matrix& g = g_of(tp, self);
                              Matrix d = probs;
                              d.array().colwise() *= target.rowwise().sum().array();
                              d -= target;
                              d.array().colwise() *= g.col(0).array();
                              tp.grad_acc(il) += d;
                            });
}

}  // namespace cliqueformer
