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

#include <vector>

#include "../common/checks.hpp"
#include "cliqueformer/fgm.hpp"

using namespace cliqueformer;

TEST_CASE("make_chain latent dimension") {
  CHECK(make_chain(10, 3, 1).latent_dim() == 21);
  CHECK(make_chain(4, 21, 1).latent_dim() == 81);
  const CliqueLayout single = make_chain(1, 5, 0);
  CHECK(single.latent_dim() == 5);
  CHECK(clique_indices(single, 1) == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("make_chain rejects bad sizes") {
  CHECK_THROWS_AS(make_chain(3, 3, 3), std::invalid_argument);
  CHECK_THROWS_AS(make_chain(3, 3, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_chain(0, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_chain(2, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_chain(2, 3, -1), std::invalid_argument);
}

TEST_CASE("clique_indices") {
  const CliqueLayout chain = make_chain(3, 3, 1);
  CHECK(clique_indices(chain, 1) == std::vector<int>{0, 1, 2});
  CHECK(clique_indices(chain, 2) == std::vector<int>{2, 3, 4});
  CHECK(clique_indices(make_chain(2, 4, 0), 2) == std::vector<int>{4, 5, 6, 7});
  CHECK_THROWS_AS(clique_indices(chain, 0), std::out_of_range);
  CHECK_THROWS_AS(clique_indices(chain, 4), std::out_of_range);
}

TEST_CASE("knot_multiplicity") {
  CHECK(knot_multiplicity(make_chain(3, 3, 1)) == std::vector<int>{1, 1, 2, 1, 2, 1, 1});
  CHECK(knot_multiplicity(make_chain(1, 3, 1)) == std::vector<int>{1, 1, 1});
  // Enumerate the two cliques of chain(2,4,2) by hand: {0,1,2,3} and {2,3,4,5}.
  CHECK(knot_multiplicity(make_chain(2, 4, 2)) == std::vector<int>{1, 1, 2, 2, 1, 1});
}

TEST_CASE("clique sizes add up to d_z plus shared knots") {
  for (int n = 1; n <= 6; ++n) {
    for (int dc = 1; dc <= 5; ++dc) {
      for (int dk = 0; dk < dc; ++dk) {
        const CliqueLayout l = make_chain(n, dc, dk);
        int total = 0;
        for (int m : knot_multiplicity(l)) {
          CHECK(m >= 1);
          total += m;
        }
        CHECK(total == n * dc);
        CHECK(n * dc == l.latent_dim() + (n - 1) * dk);
      }
    }
  }
}

TEST_CASE("random layout property test") {
  const auto outcome = testing::check_random_layouts(1000, 2026);
  INFO(outcome.detail);
  CHECK(outcome.ok);
}
