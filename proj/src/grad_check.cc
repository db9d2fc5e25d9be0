// src/grad_check.cc

// Copyright 2026  The ctdnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "ctdnn/grad_check.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctdnn/errors.h"

namespace ctdnn {

double finite_diff_check(const ScalarFunction &f, std::span<const double> x0,
                         std::span<const double> analytic_grad, double h) {
  if (analytic_grad.size() != x0.size())
    throw ShapeError("finite_diff_check: gradient length " +
                     std::to_string(analytic_grad.size()) +
                     " != parameter length " + std::to_string(x0.size()));
  if (!(h > 0.0)) throw ValidationError("finite_diff_check: step must be > 0");
  Vector x(x0.begin(), x0.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f(x);
    x[i] = saved - h;
    const double fm = f(x);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw EvaluationError("finite_diff_check: non-finite function value at "
                            "coordinate " + std::to_string(i));
    const double fd = (fp - fm) / (2.0 * h);
    const double an = analytic_grad[i];
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-12});
    worst = std::max(worst, std::abs(fd - an) / denom);
  }
  return worst;
}

}  // namespace ctdnn
