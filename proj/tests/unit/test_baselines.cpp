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
#include <limits>
#include <string>

#include "cliqueformer/baselines.hpp"
#include "cliqueformer/model.hpp"
#include "cliqueformer/rng.hpp"
#include "cliqueformer/tasks.hpp"

using namespace cliqueformer;

namespace {

// f(x) = -sum_j (x_j - c_j)^2, no parameters.
class Bowl final : public Surrogate {
 public:
  explicit Bowl(Vector centre) : centre_(std::move(centre)) {}
  ParameterSet& params() override { return params_; }
  Index input_width() const override { return centre_.size(); }
  Var forward(Tape& tape, const Var& x, const ForwardContext&) override {
    Matrix c = centre_.transpose().replicate(x.value().rows(), 1);
    return -row_sum(square(sub(x, tape.constant(std::move(c)))));
  }

 private:
  Vector centre_;
  ParameterSet params_;
};

Dataset continuous_data(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.designs = rng.normal_matrix(n, d);
  data.scores = Vector(n);
  for (Index i = 0; i < n; ++i) data.scores(i) = -data.designs.row(i).squaredNorm();
  data.stats = {data.scores.minCoeff(), data.scores.maxCoeff()};
  return data;
}

Dataset discrete_data(Index n, Index len, Index vocab, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.modality = Modality::kDiscrete;
  data.vocab = vocab;
  data.designs = Matrix(n, len);
  data.scores = Vector(n);
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index k = 0; k < len; ++k) {
      data.designs(i, k) = static_cast<double>(rng.below(static_cast<std::uint64_t>(vocab)));
      s += data.designs(i, k) == 0.0 ? 1.0 : 0.0;
    }
    data.scores(i) = s;
  }
  data.stats = {data.scores.minCoeff(), data.scores.maxCoeff()};
  return data;
}

BaselineConfig small_config() {
  BaselineConfig c;
  c.train = {16, 40, 16, 1e-3, 0.0, 3};
  c.ascent = {8, 10, 1e-2, 4};
  c.rwr.iterations = 3;
  c.rwr.samples = 50;
  c.coms.inner_steps = 3;
  c.transformer.d_model = 8;
  c.transformer.n_blocks = 1;
  c.transformer.n_heads = 2;
  c.transformer.ff_hidden = 16;
  return c;
}

}  // namespace

TEST_CASE("ascent on a concave bowl reaches the maximizer") {
  Dataset data = continuous_data(20, 3, 1);
  const Vector centre = Vector::LinSpaced(3, -0.5, 1.5);
  Bowl bowl(centre);
  std::vector<double> trace;
  const Matrix x = ascend_designs(bowl, data, {5, 3000, 1e-2, 2}, &trace);
  REQUIRE(x.rows() == 5);
  for (Index r = 0; r < x.rows(); ++r) {
    CHECK((x.row(r).transpose() - centre).cwiseAbs().maxCoeff() < 2e-2);
  }
  CHECK(trace.size() == 3001u);
  CHECK(trace.back() > trace.front());
  CHECK(trace.back() > -1e-3);
}

TEST_CASE("zero ascent steps return dataset rows") {
  Dataset data = continuous_data(12, 4, 2);
  Bowl bowl(Vector::Zero(4));
  const Matrix x = ascend_designs(bowl, data, {30, 0, 1e-2, 7});
  for (Index r = 0; r < x.rows(); ++r) {
    bool found = false;
    for (Index i = 0; i < data.size() && !found; ++i) found = x.row(r) == data.designs.row(i);
    CHECK(found);
  }
  CHECK_THROWS_AS(ascend_designs(bowl, data, {0, 5, 1e-2, 0}), std::invalid_argument);
}

TEST_CASE("simplex projection") {
  Matrix x(2, 6);
  x << 0.2, 0.3, 0.5, -1.0, -2.0, -3.0,
       2.0, 0.0, 0.0, 0.5, 0.5, 0.7;
  project_simplex_blocks(x, 3);
  CHECK(x(0, 0) == doctest::Approx(0.2));
  CHECK(x(0, 2) == doctest::Approx(0.5));
  for (Index c = 3; c < 6; ++c) CHECK(x(0, c) == doctest::Approx(1.0 / 3.0));
  CHECK(x(1, 0) == doctest::Approx(1.0));
  CHECK(x(1, 5) == doctest::Approx(0.7 / 1.7));
  for (Index r = 0; r < 2; ++r) {
    for (Index c = 0; c < 6; c += 3) CHECK(x.row(r).segment(c, 3).sum() == doctest::Approx(1.0));
  }
  CHECK(x.minCoeff() >= 0.0);
  Matrix bad(1, 5);
  CHECK_THROWS_AS(project_simplex_blocks(bad, 3), ShapeError);
}

TEST_CASE("discrete ascent returns symbols") {
  Dataset data = discrete_data(30, 5, 4, 3);
  SurrogateMlp mlp(data.input_width(), 8, 1);
  const Matrix x = ascend_designs(mlp, data, {6, 20, 5e-2, 1});
  CHECK(x.rows() == 6);
  CHECK(x.cols() == 5);
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    CHECK(v == std::floor(v));
    CHECK(v >= 0.0);
    CHECK(v < 4.0);
  }
}

TEST_CASE("rwr weights") {
  Vector y(4);
  y << 0.1, 0.7, 0.3, 0.2;
  const Vector flat = rwr_weights(y, 1e12);
  for (Index i = 0; i < 4; ++i) CHECK(flat(i) == doctest::Approx(0.25).epsilon(1e-9));
  const Vector sharp = rwr_weights(y, 1e-4);
  CHECK(sharp(1) == doctest::Approx(1.0));
  CHECK(sharp(0) < 1e-100);
  const Vector infinite = rwr_weights(y, std::numeric_limits<double>::infinity());
  CHECK(infinite(2) == doctest::Approx(0.25));

  // exp(y / beta) / sum, computed directly.
  const double beta = 0.3;
  Vector ref = (y.array() / beta).exp().matrix();
  ref /= ref.sum();
  const Vector w = rwr_weights(y, beta);
  CHECK((w - ref).cwiseAbs().maxCoeff() < 1e-14);
  const Vector shifted = rwr_weights((y.array() + 123.0).matrix(), beta);
  CHECK((w - shifted).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(rwr_weights(y, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rwr_weights(Vector(), 1.0), std::invalid_argument);
}

TEST_CASE("rwr policy fit") {
  Matrix d(3, 2);
  d << 0.0, 1.0,
       2.0, 1.0,
       4.0, 1.0;
  Vector w(3);
  w << 1.0, 2.0, 1.0;
  const RwrPolicy p = RwrPolicy::fit(d, w, Modality::kContinuous, 0, 1e-4);
  CHECK(p.mean(0) == doctest::Approx(2.0));
  CHECK(p.mean(1) == doctest::Approx(1.0));
  CHECK(p.variance(0) == doctest::Approx(2.0));  // (4 + 0 + 4) / 4
  CHECK(p.variance(1) == doctest::Approx(1e-4));

  Rng rng(9);
  const Matrix s = p.sample(20000, rng);
  CHECK(s.col(0).mean() == doctest::Approx(2.0).epsilon(0.02));

  Matrix sym(2, 2);
  sym << 0.0, 2.0,
         1.0, 2.0;
  Vector sw(2);
  sw << 3.0, 1.0;
  const RwrPolicy q = RwrPolicy::fit(sym, sw, Modality::kDiscrete, 3, 0.0);
  for (Index k = 0; k < 2; ++k) CHECK(q.probs.row(k).sum() == doctest::Approx(1.0));
  CHECK(q.probs(0, 0) == doctest::Approx(0.75).epsilon(0.01));
  CHECK(q.probs(1, 2) > 0.99);
  CHECK(q.probs(0, 2) > 0.0);
  const Matrix qs = q.sample(50, rng);
  CHECK(qs.maxCoeff() <= 2.0);
  CHECK_THROWS_AS(RwrPolicy::fit(d, Vector::Ones(2), Modality::kContinuous, 0, 0.0),
                  ShapeError);
}

TEST_CASE("COMs with alpha 0 trains like plain regression") {
  Dataset data = continuous_data(64, 3, 4);
  const SurrogateTrainConfig tc{16, 30, 16, 1e-3, 0.0, 5};
  SurrogateMlp plain(3, 16, 7), conservative(3, 16, 7);
  const SurrogateReport a = train_surrogate(plain, data, tc);
  ComsConfig coms{0.0, 4, 0.05};
  const SurrogateReport b = train_surrogate(conservative, data, tc, &coms);
  CHECK(a.mse == b.mse);
  CHECK(a.regularizer.empty());
  CHECK(b.regularizer.size() == 30u);
  CHECK(plain.params().flatten() == conservative.params().flatten());

  ComsConfig none{1.0, 0, 0.05};
  SurrogateMlp idle(3, 16, 7);
  const SurrogateReport c = train_surrogate(idle, data, tc, &none);
  for (double g : c.regularizer) CHECK(g == 0.0);

  ComsConfig neg{-1.0, 3, 0.05};
  CHECK_THROWS_AS(train_surrogate(idle, data, tc, &neg), std::invalid_argument);
}

TEST_CASE("COMs ascended points score at least the data points") {
  Dataset data = continuous_data(64, 3, 6);
  SurrogateMlp mlp(3, 16, 2);
  ComsConfig coms{0.5, 5, 0.05};
  const SurrogateReport r = train_surrogate(mlp, data, {16, 60, 16, 1e-3, 0.0, 1}, &coms);
  // After a few steps the inner ascent should never decrease the surrogate.
  for (std::size_t i = 10; i < r.regularizer.size(); ++i) CHECK(r.regularizer[i] >= -1e-6);
}

TEST_CASE("transformer surrogate size is matched to the Cliqueformer") {
  CliqueformerConfig c;
  c.design_dim = 22;
  c.layout = make_chain(10, 3, 1);
  Cliqueformer model(c, 0);
  std::size_t expected = 0;
  for (const auto& p : model.params()) {
    if (p.name.rfind("decoder", 0) != 0) expected += static_cast<std::size_t>(p.value.size());
  }
  CHECK(encoder_predictor_parameter_count(c) == expected);

  const TransformerSurrogateConfig tc = matched_transformer_config(c);
  TransformerSurrogate net(tc, Modality::kContinuous, 22, 0, 0);
  const double got = static_cast<double>(net.params().num_scalars());
  CHECK(std::abs(got - static_cast<double>(expected)) / static_cast<double>(expected) < 0.05);
  CHECK(net.input_width() == 22);

  CliqueformerConfig dc = c;
  dc.modality = Modality::kDiscrete;
  dc.design_dim = 8;
  dc.vocab = 4;
  dc.layout = make_chain(3, 3, 1);
  TransformerSurrogate dnet(matched_transformer_config(dc), Modality::kDiscrete, 8, 4, 0);
  CHECK(dnet.input_width() == 32);
  const double dexp = static_cast<double>(encoder_predictor_parameter_count(dc));
  CHECK(std::abs(static_cast<double>(dnet.params().num_scalars()) - dexp) / dexp < 0.05);
}

TEST_CASE("baselines rerun bit-identically") {
  const BaselineConfig cfg = small_config();
  Dataset cont = continuous_data(40, 4, 8);
  Dataset disc = discrete_data(40, 4, 3, 9);
  for (const Dataset* d : {&cont, &disc}) {
    const BaselineRun g1 = grad_ascent_baseline(*d, cfg), g2 = grad_ascent_baseline(*d, cfg);
    CHECK(g1.designs == g2.designs);
    CHECK(g1.report.mse == g2.report.mse);
    CHECK(g1.trace == g2.trace);
    const BaselineRun r1 = rwr_baseline(*d, cfg), r2 = rwr_baseline(*d, cfg);
    CHECK(r1.designs == r2.designs);
    CHECK(r1.designs.rows() == cfg.ascent.batch_size);
    CHECK(r1.trace.size() == 3u);
    const BaselineRun c1 = coms_baseline(*d, cfg), c2 = coms_baseline(*d, cfg);
    CHECK(c1.designs == c2.designs);
    CHECK(c1.report.regularizer == c2.report.regularizer);
    const BaselineRun t1 = transformer_baseline(*d, cfg), t2 = transformer_baseline(*d, cfg);
    CHECK(t1.designs == t2.designs);
    CHECK(t1.designs.cols() == d->design_dim());
  }
}

TEST_CASE("surrogate training reduces the error") {
  Dataset data = continuous_data(200, 3, 10);
  SurrogateMlp mlp(3, 32, 1);
  const SurrogateReport r = train_surrogate(mlp, data, {32, 400, 32, 3e-3, 0.0, 2});
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 20; ++i) {
    early += r.mse[static_cast<std::size_t>(i)];
    late += r.mse[r.mse.size() - 1 - static_cast<std::size_t>(i)];
  }
  CHECK(late < 0.25 * early);
  SurrogateMlp wrong(5, 8, 0);
  CHECK_THROWS_AS(train_surrogate(wrong, data, {8, 1, 4, 1e-3, 0.0, 0}), ShapeError);
}
