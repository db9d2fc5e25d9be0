// tests/eer_oracle.h

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

// Brute-force equal error rate: count false accepts and rejects at every
// pooled score and at +inf, then intersect the resulting (FAR, FRR)
// polyline with the diagonal.

#ifndef CTDNN_TESTS_EER_ORACLE_H_
#define CTDNN_TESTS_EER_ORACLE_H_

#include <algorithm>
#include <cmath>
#include <vector>

namespace ctdnn::testing {

inline double eer_oracle(const std::vector<double> &tar, const std::vector<double> &non) {
  std::vector<double> th(tar);
  th.insert(th.end(), non.begin(), non.end());
  std::sort(th.begin(), th.end());
  th.push_back(INFINITY);
  std::vector<double> far, frr;
  for (double t : th) {
    int fa = 0, fr = 0;
    for (double n : non) fa += n >= t;
    for (double s : tar) fr += s < t;
    far.push_back(static_cast<double>(fa) / static_cast<double>(non.size()));
    frr.push_back(static_cast<double>(fr) / static_cast<double>(tar.size()));
  }
  for (std::size_t k = 1; k < th.size(); ++k) {
    const double a = frr[k - 1] - far[k - 1], b = frr[k] - far[k];
    if (a < 0.0 && b >= 0.0) {
      const double u = a / (a - b);
      return far[k - 1] + u * (far[k] - far[k - 1]);
    }
  }
  return -1.0;
}

}  // namespace ctdnn::testing

#endif  // CTDNN_TESTS_EER_ORACLE_H_
