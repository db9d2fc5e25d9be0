// tests/test_util.h

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

#ifndef CTDNN_TESTS_TEST_UTIL_H_
#define CTDNN_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "ctdnn/matrix.h"
#include "ctdnn/rng.h"

namespace ctdnn::testing {

inline Matrix random_matrix(Rng &rng, std::size_t rows, std::size_t cols,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (double &v : m.values()) v = scale * rng.normal();
  return m;
}

inline Vector random_vector(Rng &rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (double &x : v) x = scale * rng.normal();
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("ctdnn_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path &path() const { return path_; }
  std::string str(const std::string &leaf) const { return (path_ / leaf).string(); }

 private:
  static int &counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

/// Separable toy speakers: speaker s has a mean vector of scale `sep`, each
/// utterance is that mean plus white noise.  Labels are speaker indices.
struct ToySet {
  std::vector<Matrix> inputs;
  std::vector<int> labels;
};
inline ToySet toy_speakers(Rng &rng, int speakers, int utts, std::size_t frames,
                           std::size_t dim, double sep = 2.0) {
  std::vector<Vector> means;
  for (int s = 0; s < speakers; ++s) means.push_back(random_vector(rng, dim, sep));
  ToySet set;
  for (int s = 0; s < speakers; ++s)
    for (int u = 0; u < utts; ++u) {
      Matrix x = random_matrix(rng, frames, dim);
      for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t d = 0; d < dim; ++d) x(t, d) += means[s][d];
      set.inputs.push_back(std::move(x));
      set.labels.push_back(s);
    }
  return set;
}

inline std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace ctdnn::testing

#endif  // CTDNN_TESTS_TEST_UTIL_H_
