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
#include <numbers>
#include <vector>

#include "../common/checks.hpp"
#include "cliqueformer/gaussian.hpp"
#include "cliqueformer/gradcheck.hpp"
#include "cliqueformer/optim.hpp"
#include "cliqueformer/rng.hpp"

using namespace cliqueformer;

namespace {

DiagonalGaussian gaussian(std::vector<double> mean, std::vector<double> logvar) {
  return {Eigen::Map<Vector>(mean.data(), static_cast<Index>(mean.size())),
          Eigen::Map<Vector>(logvar.data(), static_cast<Index>(logvar.size()))};
}

}  // namespace

TEST_CASE("kl examples") {
  const std::vector<int> all{0, 1, 2};
  CHECK(kl_to_standard_normal(gaussian({0, 0, 0}, {0, 0, 0}), all) == 0.0);
  CHECK(kl_to_standard_normal(gaussian({1}, {0})) == doctest::Approx(0.5).epsilon(1e-15));
  const double expect = 0.5 * (2.0 - 1.0 - std::log(2.0));
  CHECK(kl_to_standard_normal(gaussian({0}, {std::log(2.0)})) == doctest::Approx(expect));
  CHECK(expect == doctest::Approx(0.15343).epsilon(1e-4));
  const std::vector<int> bad{3};
  CHECK_THROWS(kl_to_standard_normal(gaussian({0, 0}, {0, 0}), bad));
}

TEST_CASE("kl matches a Monte Carlo estimate") {
  Rng rng(11);
  const auto q = gaussian({0}, {std::log(2.0)});
  const double mc = testing::kl_monte_carlo(q, 1000000, rng);
  CHECK(std::abs(mc - kl_to_standard_normal(q)) / kl_to_standard_normal(q) < 0.01);

  const auto near_prior = gaussian({0.1, -0.05, 0.0}, {0.02, -0.01, 0.03});
  const double mc2 = testing::kl_monte_carlo(near_prior, 200000, rng);
  CHECK(std::abs(mc2 - kl_to_standard_normal(near_prior)) / kl_to_standard_normal(near_prior) <
        0.01);
}

TEST_CASE("kl is non-negative and zero only at the prior") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const Vector m = rng.normal_matrix(4, 1).col(0);
    const Vector lv = rng.normal_matrix(4, 1, 2.0).col(0);
    CHECK(kl_to_standard_normal(DiagonalGaussian(m, lv)) > 0.0);
  }
}

TEST_CASE("log variance is clamped") {
  const auto q = gaussian({0, 0}, {-20, 20});
  CHECK(q.log_variance()(0) == kLogVarianceMin);
  CHECK(q.log_variance()(1) == kLogVarianceMax);
}

TEST_CASE("reparam_sample") {
  const auto q = gaussian({0.3, -1.2}, {0.1, -8.0});
  const Vector z = reparam_sample(q, Vector::Zero(2));
  CHECK(z(0) == 0.3);
  CHECK(z(1) == -1.2);

  Rng rng(5);
  const Index n = 100000;
  double sum = 0.0, sq = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vector s = reparam_sample(q, rng);
    sum += s(1);
    sq += (s(1) + 1.2) * (s(1) + 1.2);
  }
  CHECK(std::sqrt(sq / n) == doctest::Approx(std::exp(-4.0)).epsilon(0.02));

  Rng rng2(6);
  sum = 0.0;
  for (Index i = 0; i < n; ++i) sum += reparam_sample(q, rng2)(0);
  const double sigma = std::exp(0.05);
  CHECK(std::abs(sum / n - 0.3) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));

  Rng a(9), b(9);
  CHECK(reparam_sample(q, a) == reparam_sample(q, b));
}

TEST_CASE("adamw examples") {
  SUBCASE("pure decay scales by (1 - lr wd)^n") {
    CHECK(testing::adamw_pure_decay_error(0.1, 0.01, 1, 1) < 1e-15);
    CHECK(testing::adamw_pure_decay_error(3e-4, 0.5, 50, 2) < 1e-13);
    CHECK(testing::adamw_pure_decay_error(1e-2, 0.1, 1000, 3) < 1e-12);
  }
  SUBCASE("first step of a scalar") {
    Matrix theta = Matrix::Zero(1, 1);
    OptimizerState s(AdamWOptions{1e-3, 0.9, 0.999, 1e-8, 0.0});
    adamw_update(theta, Matrix::Ones(1, 1), s);
    CHECK(theta(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
  }
  SUBCASE("zero decay equals hand-written Adam") {
    Rng rng(4);
    Matrix theta = rng.normal_matrix(3, 2);
    Matrix ref = theta;
    Matrix m = Matrix::Zero(3, 2), v = Matrix::Zero(3, 2);
    OptimizerState s(AdamWOptions{1e-2, 0.9, 0.999, 1e-8, 0.0});
    for (int t = 1; t <= 20; ++t) {
      const Matrix g = rng.normal_matrix(3, 2);
      adamw_update(theta, g, s);
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g.cwiseProduct(g);
      const Matrix mh = m / (1 - std::pow(0.9, t));
      const Matrix vh = v / (1 - std::pow(0.999, t));
      ref.array() -= 1e-2 * mh.array() / (vh.array().sqrt() + 1e-8);
    }
    CHECK((theta - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("shape mismatch") {
    Matrix theta = Matrix::Zero(2, 2);
    OptimizerState s;
    CHECK_THROWS(adamw_update(theta, Matrix::Zero(2, 3), s));
  }
}

TEST_CASE("grad_check examples") {
  const DifferentiableFn square = [](const Vector& x, Vector& g) {
    g = 2.0 * x;
    return x.squaredNorm();
  };
  CHECK(grad_check(square, Vector::Constant(1, 3.0), 1e-5) < 1e-8);

  const DifferentiableFn sines = [](const Vector& x, Vector& g) {
    g = x.array().cos().matrix();
    return x.array().sin().sum();
  };
  Rng rng(8);
  CHECK(grad_check(sines, rng.normal_matrix(6, 1).col(0), 1e-5) < 1e-6);

  const DifferentiableFn constant = [](const Vector& x, Vector& g) {
    g = Vector::Zero(x.size());
    return 4.0;
  };
  CHECK(grad_check(constant, Vector::Ones(3), 1e-5) == 0.0);

  const DifferentiableFn bad = [](const Vector& x, Vector& g) {
    g = Vector::Zero(x.size());
    return std::log(x(0));
  };
  CHECK_THROWS_AS(grad_check(bad, Vector::Constant(1, -1.0), 1e-5), std::domain_error);
}

TEST_CASE("reconstruction likelihoods") {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const std::vector<double> one{1.5};
  CHECK(gaussian_recon_nll(one, one) == doctest::Approx(half_log_2pi));
  CHECK(half_log_2pi == doctest::Approx(0.9189).epsilon(1e-4));
  const std::vector<double> x{1.0, 0.0}, mean{0.0, 0.0};
  CHECK(gaussian_recon_nll(x, mean) == doctest::Approx(0.5 + 2.0 * half_log_2pi));

  Matrix onehot = Matrix::Zero(8, 4);
  for (Index p = 0; p < 8; ++p) onehot(p, p % 4) = 1.0;
  CHECK(categorical_recon_nll(onehot, Matrix::Zero(8, 4)) == doctest::Approx(8 * std::log(4.0)));
  CHECK(8 * std::log(4.0) == doctest::Approx(11.0904).epsilon(1e-4));
  Matrix broken = onehot;
  broken(0, 1) = 1.0;
  CHECK_THROWS(categorical_recon_nll(broken, Matrix::Zero(8, 4)));
  CHECK_THROWS(gaussian_recon_nll(x, one));
}

TEST_CASE("rng streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
  Rng parent(42);
  const Rng c1 = parent.split(1), c2 = parent.split(2);
  CHECK(c1.seed() != c2.seed());
  parent.uniform();
  CHECK(parent.split(1).seed() == c1.seed());
  Rng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK((x >= 0.0 && x < 1.0));
  }
}
