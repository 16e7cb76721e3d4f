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

#include "cliqueformer/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cliqueformer {

GradCheckResult grad_check_detail(const DifferentiableFn& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step h must be positive");
  Vector analytic = Vector::Zero(x.size());
  const double f0 = f(x, analytic);
  if (!std::isfinite(f0)) throw std::domain_error("grad_check: non-finite value at the point");

  GradCheckResult result;
  Vector probe = x;
  Vector scratch(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    probe(k) = x(k) + h;
    const double fp = f(probe, scratch);
    probe(k) = x(k) - h;
    const double fm = f(probe, scratch);
    probe(k) = x(k);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::domain_error("grad_check: non-finite value probing coordinate " +
                              std::to_string(k));
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double dev = std::abs(analytic(k) - numeric) / (std::abs(analytic(k)) + 1e-8);
    if (dev > result.max_deviation || result.worst_index < 0) {
      result.max_deviation = dev;
      result.worst_index = k;
      result.analytic = analytic(k);
      result.numeric = numeric;
    }
  }
  return result;
}

double grad_check(const DifferentiableFn& f, const Vector& x, double h) {
  return grad_check_detail(f, x, h).max_deviation;
}

DifferentiableFn parameter_fn(ParameterSet& params,
                              std::function<Var(Tape&, ParameterSet&)> build) {
  return [&params, build = std::move(build)](const Vector& x, Vector& grad) {
    params.assign(x);
    params.zero_grad();
    Tape tape;
    Var out = build(tape, params);
    tape.backward(out);
    grad = params.flatten_grad();
    return out.scalar();
  };
}

}  // namespace cliqueformer
