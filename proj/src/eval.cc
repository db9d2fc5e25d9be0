// src/eval.cc

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

#include "ctdnn/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include <Eigen/Dense>

#include "ctdnn/errors.h"

namespace ctdnn {

namespace {

using EMatrix = Eigen::MatrixXd;
using EVector = Eigen::VectorXd;

}  // namespace

LdaModel lda_fit(std::span<const Embedding> data, std::size_t d,
                 std::optional<double> shrinkage) {
  if (data.empty()) throw EmptyInputError("lda_fit: no embeddings");
  const std::size_t dim = data[0].vector.size();
  if (dim == 0) throw ShapeError("lda_fit: zero-length embeddings");
  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].vector.size() != dim)
      throw ShapeError("lda_fit: embedding " + data[i].utt_id + " has length " +
                       std::to_string(data[i].vector.size()) + ", expected " +
                       std::to_string(dim));
    if (data[i].speaker_id.empty())
      throw LabelError("lda_fit: embedding " + data[i].utt_id + " has no speaker");
    classes[data[i].speaker_id].push_back(i);
  }
  const std::size_t c = classes.size();
  if (c < 2)
    throw InsufficientStatisticsError("lda_fit: need at least 2 classes, got " +
                                      std::to_string(c));
  for (const auto &[spk, idx] : classes)
    if (idx.size() < 2)
      throw InsufficientStatisticsError("lda_fit: class " + spk +
                                        " has fewer than 2 samples");
  if (d < 1 || d > c - 1)
    throw RankError("lda_fit: d = " + std::to_string(d) +
                    " must lie in [1, C - 1] with C - 1 = " + std::to_string(c - 1));
  if (d > dim)
    throw RankError("lda_fit: d = " + std::to_string(d) +
                    " exceeds the embedding dimension " + std::to_string(dim));

  const double n = static_cast<double>(data.size());
  EVector global = EVector::Zero(dim);
  for (const Embedding &e : data)
    global += Eigen::Map<const EVector>(e.vector.data(), dim);
  global /= n;
  EMatrix sw = EMatrix::Zero(dim, dim), sb = EMatrix::Zero(dim, dim);
  for (const auto &[spk, idx] : classes) {
    EVector mean = EVector::Zero(dim);
    for (std::size_t i : idx) mean += Eigen::Map<const EVector>(data[i].vector.data(), dim);
    mean /= static_cast<double>(idx.size());
    for (std::size_t i : idx) {
      EVector r = Eigen::Map<const EVector>(data[i].vector.data(), dim) - mean;
      sw.noalias() += r * r.transpose();
    }
    EVector m = mean - global;
    sb.noalias() += static_cast<double>(idx.size()) * m * m.transpose();
  }
  sw /= n;
  sb /= n;

  const double lambda =
      shrinkage ? *shrinkage : kDefaultShrinkageScale * sw.trace() / static_cast<double>(dim);
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ValidationError("lda_fit: shrinkage must be finite and >= 0");
  EMatrix b = sw + lambda * EMatrix::Identity(dim, dim);
  Eigen::LLT<EMatrix> llt(b);
  const double floor = 1e-12 * std::max(b.diagonal().maxCoeff(), 1e-300);
  bool ok = llt.info() == Eigen::Success;
  if (ok) ok = llt.matrixL().toDenseMatrix().diagonal().array().square().minCoeff() > floor;
  if (!ok)
    throw ConditioningError(
        "lda_fit: within-class scatter plus shrinkage is singular; use a larger "
        "shrinkage lambda (currently " + std::to_string(lambda) + ")");

  Eigen::GeneralizedSelfAdjointEigenSolver<EMatrix> solver(sb, b);
  if (solver.info() != Eigen::Success)
    throw ConditioningError("lda_fit: generalized eigen solver failed");
  // Eigenvalues come back ascending.
  LdaModel model;
  model.class_count = c;
  model.shrinkage = lambda;
  model.projection = Matrix(d, dim);
  for (std::size_t k = 0; k < d; ++k) {
    EVector v = solver.eigenvectors().col(static_cast<Eigen::Index>(dim - 1 - k));
    v.normalize();
    for (Eigen::Index j = 0; j < v.size(); ++j)
      if (v[j] != 0.0) {
        if (v[j] < 0.0) v = -v;
        break;
      }
    for (std::size_t j = 0; j < dim; ++j) model.projection(k, j) = v[static_cast<Eigen::Index>(j)];
  }
  return model;
}

Vector lda_project(const LdaModel &model, std::span<const double> v) {
  if (v.size() != model.input_dim())
    throw ShapeError("lda_project: vector of length " + std::to_string(v.size()) +
                     " for a projection from " + std::to_string(model.input_dim()));
  Vector out(model.dim());
  for (std::size_t k = 0; k < model.dim(); ++k) out[k] = dot(model.projection.row(k), v);
  return out;
}

Embedding lda_project(const LdaModel &model, const Embedding &e) {
  return {e.utt_id, e.speaker_id, lda_project(model, std::span<const double>(e.vector))};
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("cosine: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw UndefinedScoreError("cosine: zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::vector<ScoredTrial> score_trials(std::span<const Trial> trials,
                                      std::span<const Embedding> store) {
  std::unordered_map<std::string, const Embedding *> index;
  for (const Embedding &e : store) index.emplace(e.utt_id, &e);
  auto find = [&](const std::string &id) {
    auto it = index.find(id);
    if (it == index.end()) throw LookupError("no embedding for utterance " + id);
    return it->second;
  };
  std::vector<ScoredTrial> out;
  out.reserve(trials.size());
  for (const Trial &t : trials) {
    const Embedding *a = find(t.enroll_utt);
    const Embedding *b = find(t.test_utt);
    out.push_back({t, cosine(a->vector, b->vector)});
  }
  return out;
}

double compute_eer(std::span<const double> target_scores,
                   std::span<const double> nontarget_scores) {
  if (target_scores.empty() || nontarget_scores.empty())
    throw EmptyInputError("compute_eer: need both target and nontarget scores");
  Vector tar(target_scores.begin(), target_scores.end());
  Vector non(nontarget_scores.begin(), nontarget_scores.end());
  if (!all_finite(tar) || !all_finite(non))
    throw ValidationError("compute_eer: non-finite score");
  std::sort(tar.begin(), tar.end());
  std::sort(non.begin(), non.end());
  Vector thresholds;
  std::merge(tar.begin(), tar.end(), non.begin(), non.end(),
             std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(INFINITY);

  const double s = static_cast<double>(tar.size());
  const double n = static_cast<double>(non.size());
  std::size_t below_t = 0, below_n = 0;  // scores < threshold
  double prev_far = 1.0, prev_frr = 0.0;
  for (double th : thresholds) {
    while (below_t < tar.size() && tar[below_t] < th) ++below_t;
    while (below_n < non.size() && non[below_n] < th) ++below_n;
    const double far = static_cast<double>(non.size() - below_n) / n;
    const double frr = static_cast<double>(below_t) / s;
    if (frr >= far) {
      const double d1 = prev_frr - prev_far;  // < 0
      const double d2 = frr - far;            // >= 0
      const double alpha = -d1 / (d2 - d1);
      return prev_far + alpha * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return 0.0;  // unreachable: at +inf FRR = 1 >= FAR = 0
}

double compute_eer(std::span<const ScoredTrial> scored) {
  Vector tar, non;
  for (const ScoredTrial &s : scored) (s.trial.target ? tar : non).push_back(s.score);
  return compute_eer(tar, non);
}

double top1_accuracy(std::span<const Vector> logits, std::span<const int> labels) {
  if (logits.size() != labels.size())
    throw ShapeError("top1_accuracy: " + std::to_string(logits.size()) +
                     " rows, " + std::to_string(labels.size()) + " labels");
  if (logits.empty()) throw EmptyInputError("top1_accuracy: no rows");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i].empty()) throw ShapeError("top1_accuracy: empty logits row");
    const auto best = std::max_element(logits[i].begin(), logits[i].end()) -
                      logits[i].begin();
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.size());
}

// ---------------------------------------------------------------------------
// Text formats.

namespace {

/// Line reader that remembers the byte offset of the current line.
class LineReader {
 public:
  explicit LineReader(std::istream &in) : in_(in) {}
  bool next(std::string &line) {
    line_start_ = offset_;
    if (!std::getline(in_, line)) return false;
    offset_ += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  [[noreturn]] void fail(const std::string &what) const {
    throw FormatError(line_start_, what);
  }

 private:
  std::istream &in_;
  std::size_t offset_ = 0, line_start_ = 0;
};

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

bool parse_double(const std::string &s, double &v) {
  const char *end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  return ec == std::errc() && p == end && std::isfinite(v);
}

std::string format_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

template <typename F>
void with_ofstream(const std::string &path, F &&f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  f(out);
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

std::ifstream open_in(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace

void write_embeddings(std::span<const Embedding> embeddings, std::ostream &out) {
  const std::size_t dim = embeddings.empty() ? 0 : embeddings[0].vector.size();
  out << "dim=" << dim << '\n';
  for (const Embedding &e : embeddings) {
    if (e.vector.size() != dim)
      throw ShapeError("write_embeddings: " + e.utt_id + " has length " +
                       std::to_string(e.vector.size()) + ", expected " +
                       std::to_string(dim));
    out << e.utt_id << '\t' << (e.speaker_id.empty() ? "-" : e.speaker_id) << '\t';
    for (std::size_t i = 0; i < dim; ++i) {
      if (i) out << ',';
      out << format_g(e.vector[i], 9);
    }
    out << '\n';
  }
}

std::vector<Embedding> read_embeddings(std::istream &in) {
  LineReader r(in);
  std::string line;
  if (!r.next(line) || line.rfind("dim=", 0) != 0) r.fail("expected dim=<d> header");
  std::size_t dim = 0;
  {
    const std::string num = line.substr(4);
    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), dim);
    if (ec != std::errc() || p != num.data() + num.size()) r.fail("bad dim header");
  }
  std::vector<Embedding> out;
  while (r.next(line)) {
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() != 3 || f[0].empty() || f[1].empty())
      r.fail("expected utt<TAB>spk<TAB>values");
    Embedding e{f[0], f[1] == "-" ? std::string() : f[1], {}};
    for (const std::string &v : split(f[2], ',')) {
      double x;
      if (!parse_double(v, x)) r.fail("bad value '" + v + "'");
      e.vector.push_back(x);
    }
    if (e.vector.size() != dim)
      r.fail("embedding " + e.utt_id + " has " + std::to_string(e.vector.size()) +
             " values, header says " + std::to_string(dim));
    out.push_back(std::move(e));
  }
  return out;
}

void write_embeddings(std::span<const Embedding> embeddings, const std::string &path) {
  with_ofstream(path, [&](std::ostream &o) { write_embeddings(embeddings, o); });
}

std::vector<Embedding> read_embeddings(const std::string &path) {
  auto in = open_in(path);
  return read_embeddings(in);
}

void write_trials(std::span<const Trial> trials, std::ostream &out) {
  for (const Trial &t : trials)
    out << t.enroll_utt << '\t' << t.test_utt << '\t' << (t.target ? '1' : '0') << '\n';
}

std::vector<Trial> read_trials(std::istream &in) {
  LineReader r(in);
  std::string line;
  std::vector<Trial> out;
  while (r.next(line)) {
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() != 3 || f[0].empty() || f[1].empty() || (f[2] != "0" && f[2] != "1"))
      r.fail("expected enroll<TAB>test<TAB>1|0");
    out.push_back({f[0], f[1], f[2] == "1"});
  }
  return out;
}

void write_trials(std::span<const Trial> trials, const std::string &path) {
  with_ofstream(path, [&](std::ostream &o) { write_trials(trials, o); });
}

std::vector<Trial> read_trials(const std::string &path) {
  auto in = open_in(path);
  return read_trials(in);
}

void write_scores(std::span<const ScoredTrial> scores, std::ostream &out) {
  char buf[64];
  for (const ScoredTrial &s : scores) {
    std::snprintf(buf, sizeof buf, "%.6f", s.score);
    out << s.trial.enroll_utt << '\t' << s.trial.test_utt << '\t' << buf << '\n';
  }
}

std::vector<ScoredTrial> read_scores(std::istream &in) {
  LineReader r(in);
  std::string line;
  std::vector<ScoredTrial> out;
  while (r.next(line)) {
    if (line.empty()) continue;
    auto f = split(line, '\t');
    double x;
    if (f.size() != 3 || f[0].empty() || f[1].empty() || !parse_double(f[2], x))
      r.fail("expected enroll<TAB>test<TAB>score");
    out.push_back({{f[0], f[1], false}, x});
  }
  return out;
}

void write_scores(std::span<const ScoredTrial> scores, const std::string &path) {
  with_ofstream(path, [&](std::ostream &o) { write_scores(scores, o); });
}

std::vector<ScoredTrial> read_scores(const std::string &path) {
  auto in = open_in(path);
  return read_scores(in);
}

void write_lda(const LdaModel &model, std::ostream &out) {
  out << "lda " << model.dim() << ' ' << model.input_dim() << ' '
      << model.class_count << ' ' << format_g(model.shrinkage, 17) << '\n';
  for (std::size_t k = 0; k < model.dim(); ++k) {
    for (std::size_t j = 0; j < model.input_dim(); ++j) {
      if (j) out << ',';
      out << format_g(model.projection(k, j), 17);
    }
    out << '\n';
  }
}

LdaModel read_lda(std::istream &in) {
  LineReader r(in);
  std::string line;
  if (!r.next(line)) r.fail("expected lda header");
  auto h = split(line, ' ');
  LdaModel m;
  std::size_t d = 0, dim = 0;
  auto num = [&](const std::string &s, std::size_t &v) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) r.fail("bad lda header");
  };
  if (h.size() != 5 || h[0] != "lda") r.fail("expected lda header");
  num(h[1], d);
  num(h[2], dim);
  num(h[3], m.class_count);
  if (!parse_double(h[4], m.shrinkage)) r.fail("bad shrinkage");
  m.projection = Matrix(d, dim);
  for (std::size_t k = 0; k < d; ++k) {
    if (!r.next(line)) r.fail("missing projection row " + std::to_string(k));
    auto f = split(line, ',');
    if (f.size() != dim) r.fail("projection row has wrong length");
    for (std::size_t j = 0; j < dim; ++j)
      if (!parse_double(f[j], m.projection(k, j))) r.fail("bad projection value");
  }
  while (r.next(line))
    if (!line.empty()) r.fail("trailing data after projection");
  return m;
}

void write_lda(const LdaModel &model, const std::string &path) {
  with_ofstream(path, [&](std::ostream &o) { write_lda(model, o); });
}

LdaModel read_lda(const std::string &path) {
  auto in = open_in(path);
  return read_lda(in);
}

}  // namespace ctdnn
