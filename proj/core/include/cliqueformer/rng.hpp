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

#ifndef CLIQUEFORMER_RNG_HPP_
#define CLIQUEFORMER_RNG_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "cliqueformer/tensor.hpp"

namespace cliqueformer {

/// Deterministic random stream. Children obtained with split() are seeded from
/// a hash of (parent seed, index), so they do not depend on how much of the
/// parent stream has been consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  Rng split(std::uint64_t index) const;

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);

  Matrix normal_matrix(Index rows, Index cols, double stddev = 1.0);
  Matrix uniform_matrix(Index rows, Index cols, double lo, double hi);
  std::vector<std::size_t> permutation(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_RNG_HPP_
