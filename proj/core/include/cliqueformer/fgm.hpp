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

#ifndef CLIQUEFORMER_FGM_HPP_
#define CLIQUEFORMER_FGM_HPP_

#include <cstddef>
#include <vector>

namespace cliqueformer {

/// A chain-structured functional graphical model over latent dimensions.
///
/// Clique i (1-based) covers the contiguous block
/// [(i-1)*stride, (i-1)*stride + clique_dim) where stride = clique_dim - knot_dim,
/// so consecutive cliques share exactly knot_dim indices.
class CliqueLayout {
 public:
  CliqueLayout(int n_clique, int clique_dim, int knot_dim);

  int n_clique() const { return n_clique_; }
  int clique_dim() const { return clique_dim_; }
  int knot_dim() const { return knot_dim_; }
  int latent_dim() const { return knot_dim_ + n_clique_ * stride(); }
  int stride() const { return clique_dim_ - knot_dim_; }

  /// First latent index of the 1-based clique `i`.
  int clique_offset(int i) const;

  friend bool operator==(const CliqueLayout&, const CliqueLayout&) = default;

 private:
  int n_clique_;
  int clique_dim_;
  int knot_dim_;
};

CliqueLayout make_chain(int n_clique, int clique_dim, int knot_dim);

/// Indices of the 1-based clique `i`, in increasing order.
std::vector<int> clique_indices(const CliqueLayout& layout, int i);

/// For every latent index, how many cliques contain it.
std::vector<int> knot_multiplicity(const CliqueLayout& layout);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_FGM_HPP_
