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

#include "cliqueformer/fgm.hpp"

#include <stdexcept>
#include <string>

namespace cliqueformer {

CliqueLayout::CliqueLayout(int n_clique, int clique_dim, int knot_dim)
    : n_clique_(n_clique), clique_dim_(clique_dim), knot_dim_(knot_dim) {
  if (n_clique < 1) {
    throw std::invalid_argument("CliqueLayout: n_clique must be >= 1, got " +
                                std::to_string(n_clique));
  }
  if (clique_dim < 1) {
    throw std::invalid_argument("CliqueLayout: clique_dim must be >= 1, got " +
                                std::to_string(clique_dim));
  }
  if (knot_dim < 0 || knot_dim >= clique_dim) {
    throw std::invalid_argument("CliqueLayout: knot_dim must lie in [0, clique_dim), got " +
                                std::to_string(knot_dim));
  }
}

int CliqueLayout::clique_offset(int i) const {
  if (i < 1 || i > n_clique_) {
    throw std::out_of_range("clique index " + std::to_string(i) + " outside [1, " +
                            std::to_string(n_clique_) + "]");
  }
  return (i - 1) * stride();
}

CliqueLayout make_chain(int n_clique, int clique_dim, int knot_dim) {
  return CliqueLayout(n_clique, clique_dim, knot_dim);
}

std::vector<int> clique_indices(const CliqueLayout& layout, int i) {
  const int start = layout.clique_offset(i);
  std::vector<int> out(static_cast<std::size_t>(layout.clique_dim()));
  for (int k = 0; k < layout.clique_dim(); ++k) out[static_cast<std::size_t>(k)] = start + k;
  return out;
}

std::vector<int> knot_multiplicity(const CliqueLayout& layout) {
  std::vector<int> counts(static_cast<std::size_t>(layout.latent_dim()), 0);
  for (int i = 1; i <= layout.n_clique(); ++i) {
    for (int idx : clique_indices(layout, i)) ++counts[static_cast<std::size_t>(idx)];
  }
  return counts;
}

}  // namespace cliqueformer
