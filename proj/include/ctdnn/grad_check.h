// include/ctdnn/grad_check.h

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

#ifndef CTDNN_GRAD_CHECK_H_
#define CTDNN_GRAD_CHECK_H_

#include <functional>
#include <span>

#include "ctdnn/matrix.h"

namespace ctdnn {

using ScalarFunction = std::function<double(std::span<const double>)>;

/**
   Compares an analytic gradient against central differences
     g_fd[i] = (f(x + h e_i) - f(x - h e_i)) / (2h)
   and returns max_i |g_fd[i] - g_an[i]| / max(|g_fd[i]|, |g_an[i]|, 1e-12).
   Throws EvaluationError (with the coordinate index) if f is non-finite at a
   probe point, ShapeError if the gradient length differs from x0.
*/
double finite_diff_check(const ScalarFunction &f, std::span<const double> x0,
                         std::span<const double> analytic_grad, double h);

}  // namespace ctdnn

#endif  // CTDNN_GRAD_CHECK_H_
