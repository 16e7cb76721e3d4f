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

#ifndef CLIQUEFORMER_GRADCHECK_HPP_
#define CLIQUEFORMER_GRADCHECK_HPP_

#include <functional>

#include "cliqueformer/autodiff.hpp"
#include "cliqueformer/tensor.hpp"

namespace cliqueformer {

/// Evaluates f at x, writing df/dx into `grad` (already sized like x).
using DifferentiableFn = std::function<double(const Vector& x, Vector& grad)>;

struct GradCheckResult {
  double max_deviation = 0.0;
  Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Largest |g_k - fd_k| / (|g_k| + 1e-8) over coordinates, with fd_k the
/// central difference (f(x + h e_k) - f(x - h e_k)) / 2h.
/// Throws std::domain_error if f is non-finite at any probe.
GradCheckResult grad_check_detail(const DifferentiableFn& f, const Vector& x, double h);
double grad_check(const DifferentiableFn& f, const Vector& x, double h);

/// Adapts a tape-building loss over a ParameterSet to a DifferentiableFn over
/// the flattened parameters. `build` must return a 1x1 Var; it is called on a
/// fresh tape each time, so any randomness it uses must be re-seeded inside.
DifferentiableFn parameter_fn(ParameterSet& params,
                              std::function<Var(Tape&, ParameterSet&)> build);

}  // namespace cliqueformer

#endif  // CLIQUEFORMER_GRADCHECK_HPP_
