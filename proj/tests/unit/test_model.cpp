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
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <vector>

#include "../common/checks.hpp"
#include "cliqueformer/checkpoint.hpp"
#include "cliqueformer/gradcheck.hpp"
#include "cliqueformer/model.hpp"
#include "cliqueformer/optim.hpp"
#include "cliqueformer/rng.hpp"
#include "cliqueformer/tasks.hpp"

using namespace cliqueformer;

namespace {

CliqueformerConfig continuous_config(Index d, const CliqueLayout& layout, Index d_model = 16) {
  CliqueformerConfig c;
  c.d_model = d_model;
  c.ff_hidden = 2 * d_model;
  c.mlp_hidden = 16;
  c.layout = layout;
  c.design_dim = d;
  return c;
}

CliqueformerConfig discrete_config(Index len, Index vocab, const CliqueLayout& layout) {
  CliqueformerConfig c = continuous_config(len, layout);
  c.modality = Modality::kDiscrete;
  c.vocab = vocab;
  return c;
}

// Scalar count written out layer by layer.
std::size_t expected_params(const CliqueformerConfig& c) {
  const std::size_t d = static_cast<std::size_t>(c.design_dim), D = static_cast<std::size_t>(c.d_model),
                    F = static_cast<std::size_t>(c.ff_hidden), nb = static_cast<std::size_t>(c.n_blocks),
                    n = static_cast<std::size_t>(c.layout.n_clique()),
                    dc = static_cast<std::size_t>(c.layout.clique_dim()),
                    dz = static_cast<std::size_t>(c.latent_dim()),
                    H = static_cast<std::size_t>(c.mlp_hidden),
                    e = dc + dc % 2;
  const std::size_t in = c.modality == Modality::kContinuous ? d : d * static_cast<std::size_t>(c.vocab);
  const std::size_t tokenizer =
      (c.modality == Modality::kContinuous ? d * D : static_cast<std::size_t>(c.vocab) * D) + d * D;
  const std::size_t block = 4 * D + (4 * D * D + 3 * D) + (D * F + F + F * D + D);
  const std::size_t stack = nb * block + 2 * D;
  const std::size_t posterior = d * D * 2 * dz + 2 * dz;
  const std::size_t predictor = (dc + e) * H + H + H * H + H + H + 1;
  const std::size_t decoder_in = dc * D + D;
  const std::size_t head = n * D * in + in;
  return tokenizer + 2 * stack + posterior + predictor + decoder_in + head;
}

}  // namespace

TEST_CASE("tokenizer shapes and determinism") {
  CliqueformerConfig c = continuous_config(8, make_chain(2, 3, 1), 64);
  Cliqueformer model(c, 1);
  Rng rng(2);
  const Matrix x = rng.normal_matrix(3, 8);
  Tape t1, t2;
  const Matrix a = model.tokenize(t1, x).value();
  CHECK(a.rows() == 3 * 8);
  CHECK(a.cols() == 64);
  CHECK(a == model.tokenize(t2, x).value());
  CHECK_THROWS_AS(model.tokenize(t1, rng.normal_matrix(3, 7)), ShapeError);
}

TEST_CASE("one-hot tokens equal table lookups of the symbols") {
  CliqueformerConfig c = discrete_config(8, 4, make_chain(2, 3, 1));
  Cliqueformer model(c, 3);
  Matrix symbols(2, 8);
  symbols << 0, 1, 2, 3, 3, 2, 1, 0, 1, 1, 1, 1, 2, 2, 2, 2;
  Tape tape;
  const Matrix tokens = model.tokenize(tape, one_hot(symbols, 4)).value();
  const Matrix& table = model.params().at("tokenizer.embedding").value;
  const Matrix& pos = model.params().at("tokenizer.position").value;
  for (Index b = 0; b < 2; ++b) {
    for (Index p = 0; p < 8; ++p) {
      const RowVector expect = table.row(static_cast<Index>(symbols(b, p))) + pos.row(p);
      CHECK((tokens.row(b * 8 + p) - expect).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("encode shapes, determinism and gradient") {
  CliqueformerConfig c = continuous_config(5, make_chain(2, 3, 1), 8);
  c.mlp_hidden = 6;
  Cliqueformer model(c, 4);
  Rng rng(5);
  const Matrix x = rng.normal_matrix(3, 5);
  const PosteriorBatch a = model.encode_eval(x), b = model.encode_eval(x);
  CHECK(a.mean.cols() == 5);
  CHECK(a.log_variance.cols() == 5);
  CHECK(a.mean == b.mean);
  CHECK(a.log_variance == b.log_variance);
  CHECK(a.log_variance.maxCoeff() <= kLogVarianceMax);

  const Matrix w = rng.normal_matrix(3, 5);
  auto fn = parameter_fn(model.params(), [&](Tape& tape, ParameterSet&) {
    return sum_all(hadamard(model.encode(tape, x, ForwardContext::eval()).mean, tape.constant(w)));
  });
  // Parameters the mean does not depend on (decoder, predictor, and the
  // log-variance half of the head) have zero analytic and numeric gradient.
  CHECK(grad_check(fn, model.params().flatten(), 1e-5) < 1e-3);
}

TEST_CASE("clique embedding") {
  const CliqueLayout layout = make_chain(3, 3, 1);
  for (int i = 1; i <= 3; ++i) {
    const Vector c = clique_embedding(layout, i, 16, 64);
    CHECK(c(0) == doctest::Approx(std::sin(static_cast<double>(i))));
    CHECK(c(1) == doctest::Approx(std::cos(static_cast<double>(i))));
    for (Index j = 0; j < 8; ++j) CHECK(c(2 * j) * c(2 * j) + c(2 * j + 1) * c(2 * j + 1) == doctest::Approx(1.0));
  }
  const Vector c1 = clique_embedding(layout, 1, 18, 64);
  CHECK(c1(16) == doctest::Approx(0.09983).epsilon(1e-4));
  CHECK(c1(17) == doctest::Approx(0.99500).epsilon(1e-4));
  CHECK(c1(16) == doctest::Approx(std::sin(0.1)));
  CHECK((clique_embedding(layout, 1, 4, 64) - clique_embedding(layout, 2, 4, 64)).head(2).cwiseAbs().maxCoeff() > 0.1);
  CHECK_THROWS(clique_embedding(layout, 1, 3, 64));
  CHECK_THROWS(clique_embedding(layout, 4, 4, 64));
}

TEST_CASE("predictor is a mean over local clique terms") {
  SUBCASE("single clique") {
    Cliqueformer model(continuous_config(4, make_chain(1, 3, 0)), 6);
    Rng rng(7);
    const Matrix z = rng.normal_matrix(5, 3);
    Tape tape;
    const Matrix per = model.predict_cliques(tape, tape.constant(z), ForwardContext::eval()).value();
    CHECK(per.cols() == 1);
    CHECK((model.predict_eval(z) - per.col(0)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("mean and locality") {
    const CliqueLayout layout = make_chain(4, 3, 1);
    Cliqueformer model(continuous_config(6, layout), 8);
    Rng rng(9);
    const Matrix z = rng.normal_matrix(2, layout.latent_dim());
    Tape tape;
    const Matrix per = model.predict_cliques(tape, tape.constant(z), ForwardContext::eval()).value();
    CHECK((model.predict_eval(z) - per.rowwise().mean()).cwiseAbs().maxCoeff() < 1e-15);
    for (int i = 1; i <= layout.n_clique(); ++i) {
      Matrix moved = z;
      const auto idx = clique_indices(layout, i);
      for (Index k = 0; k < layout.latent_dim(); ++k) {
        if (std::find(idx.begin(), idx.end(), static_cast<int>(k)) == idx.end()) moved.col(k).array() += 1.7;
      }
      Tape t2;
      const Matrix per2 = model.predict_cliques(t2, t2.constant(moved), ForwardContext::eval()).value();
      CHECK(per2.col(i - 1) == per.col(i - 1));
    }
  }
  SUBCASE("zero output layer") {
    Cliqueformer model(continuous_config(6, make_chain(3, 3, 1)), 10);
    model.params().at("predictor.layer2.weight").value.setZero();
    model.params().at("predictor.layer2.bias").value.setZero();
    Rng rng(11);
    CHECK(model.predict_eval(rng.normal_matrix(4, 7)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("predictor gradient in z") {
  testing::TinySetup s = testing::tiny_setup(3);
  Cliqueformer model(s.config, 12);
  Rng rng(13);
  const Index dz = s.config.latent_dim();
  const Vector z0 = rng.normal_matrix(dz, 1).col(0);
  DifferentiableFn fn = [&](const Vector& z, Vector& g) {
    Tape tape;
    Var zv = tape.input(Eigen::Map<const Matrix>(z.data(), 1, dz));
    Var out = model.predict(tape, zv, ForwardContext::eval());
    tape.backward(out);
    g = Eigen::Map<const Vector>(zv.grad().data(), dz);
    return out.scalar();
  };
  CHECK(grad_check(fn, z0, 1e-5) < 1e-3);
}

TEST_CASE("predict of reparameterized encodings passes a gradient check") {
  for (std::uint64_t seed : {21u, 22u}) {
    testing::TinySetup s = testing::tiny_setup(seed);
    Cliqueformer model(s.config, seed);
    auto fn = parameter_fn(model.params(), [&](Tape& tape, ParameterSet&) {
      PosteriorVars q = model.encode(tape, s.inputs, ForwardContext::eval());
      Var z = reparam_sample(q.mean, q.log_variance, s.noise);
      return sum_all(model.predict(tape, z, ForwardContext::eval()));
    });
    INFO(testing::describe(s.config));
    CHECK(grad_check(fn, model.params().flatten(), 1e-5) < 1e-3);
  }
}

TEST_CASE("decoder shapes") {
  Cliqueformer cont(continuous_config(22, make_chain(10, 3, 1)), 14);
  Rng rng(15);
  const Matrix rec = cont.decode_eval(rng.normal_matrix(3, 21));
  CHECK(rec.rows() == 3);
  CHECK(rec.cols() == 22);

  Cliqueformer disc(discrete_config(8, 4, make_chain(4, 3, 1)), 16);
  const Matrix logits = disc.decode_eval(rng.normal_matrix(2, 9));
  CHECK(logits.cols() == 32);
  for (Index p = 0; p < 8; ++p) {
    const Eigen::ArrayXd row = logits.row(0).segment(p * 4, 4).transpose().array();
    const Eigen::ArrayXd soft = (row - row.maxCoeff()).exp() / (row - row.maxCoeff()).exp().sum();
    CHECK(soft.sum() == doctest::Approx(1.0));
  }
  const Matrix symbols = disc.decode_designs(rng.normal_matrix(2, 9));
  CHECK(symbols.cols() == 8);
  CHECK(symbols.maxCoeff() <= 3.0);
  CHECK_THROWS(disc.decode_designs(rng.normal_matrix(2, 9), DecodeMode::kSample, nullptr));
}

TEST_CASE("autoencoder overfits a tiny discrete dataset") {
  const Index n = 32, len = 8, vocab = 4;
  Rng rng(17);
  Matrix symbols(n, len);
  for (Index i = 0; i < symbols.size(); ++i) symbols.data()[i] = static_cast<double>(rng.below(vocab));
  const Matrix x = one_hot(symbols, vocab);
  CliqueformerConfig c = discrete_config(len, vocab, make_chain(4, 3, 1));
  c.dropout = 0.0;
  Cliqueformer model(c, 18);
  OptimizerState opt(AdamWOptions{3e-3, 0.9, 0.999, 1e-8, 0.0});
  for (int step = 0; step < 600; ++step) {
    Tape tape;
    PosteriorVars q = model.encode(tape, x, ForwardContext::eval());
    Var logits = model.decode(tape, q.mean, ForwardContext::eval());
    Var loss = mean_all(softmax_cross_entropy(reshape(logits, n * len, vocab),
                                              Eigen::Map<const Matrix>(x.data(), n * len, vocab)));
    model.params().zero_grad();
    tape.backward(loss);
    adamw_update(model.params(), opt);
  }
  const Matrix recon = model.decode_designs(model.encode_eval(x).mean);
  const double accuracy = (recon.array() == symbols.array()).cast<double>().mean();
  CHECK(accuracy > 0.95);
}

TEST_CASE("parameter count") {
  CliqueformerConfig lat = continuous_config(22, make_chain(10, 3, 1), 64);
  lat.ff_hidden = 128;
  lat.mlp_hidden = 256;
  CHECK(Cliqueformer(lat, 1).params().num_scalars() == expected_params(lat));
  CHECK(Cliqueformer(lat, 2).params().num_scalars() == 278337);
  CliqueformerConfig tf = discrete_config(8, 4, make_chain(4, 3, 1));
  CHECK(Cliqueformer(tf, 1).params().num_scalars() == expected_params(tf));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = std::filesystem::temp_directory_path() / "cliqueformer_test_ckpt";
  std::filesystem::create_directories(dir);
  CliqueformerConfig c = discrete_config(6, 3, make_chain(3, 2, 1));
  c.dropout = 0.25;
  Cliqueformer model(c, 19);
  save_cliqueformer(dir / "m.ckpt", model);
  Cliqueformer back = load_cliqueformer(dir / "m.ckpt");
  CHECK(back.config().layout == c.layout);
  CHECK(back.config().vocab == 3);
  CHECK(back.config().dropout == 0.25);
  CHECK(back.params().flatten() == model.params().flatten());
  Rng rng(20);
  const Matrix z = rng.normal_matrix(3, c.latent_dim());
  CHECK(back.predict_eval(z) == model.predict_eval(z));
  CHECK(checkpoint_kind(load_checkpoint(dir / "m.ckpt")) == "cliqueformer");
  {
    std::ofstream junk(dir / "junk.ckpt");
    junk << "not a checkpoint";
  }
  CHECK_THROWS(load_cliqueformer(dir / "junk.ckpt"));
}

TEST_CASE("config validation") {
  CliqueformerConfig c = continuous_config(6, make_chain(2, 3, 1));
  c.n_heads = 3;
  CHECK_THROWS(Cliqueformer(c, 1));
  c = continuous_config(6, make_chain(2, 3, 1));
  c.dropout = 1.0;
  CHECK_THROWS(Cliqueformer(c, 1));
}
