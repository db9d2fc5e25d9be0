// include/ctdnn/eval.h

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

#ifndef CTDNN_EVAL_H_
#define CTDNN_EVAL_H_

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctdnn/matrix.h"

namespace ctdnn {

/// An utterance-level vector.  An empty speaker_id means unknown.
struct Embedding {
  std::string utt_id;
  std::string speaker_id;
  Vector vector;
  bool operator==(const Embedding &) const = default;
};

struct Trial {
  std::string enroll_utt;
  std::string test_utt;
  bool target = false;
  bool operator==(const Trial &) const = default;
};

struct ScoredTrial {
  Trial trial;
  double score = 0.0;
};

struct LdaModel {
  Matrix projection;  // d x D_emb, unit-length rows
  std::size_t class_count = 0;
  double shrinkage = 0.0;

  std::size_t dim() const { return projection.rows(); }
  std::size_t input_dim() const { return projection.cols(); }
};

/// Default shrinkage: 1e-4 * trace(S_w) / D.
inline constexpr double kDefaultShrinkageScale = 1e-4;

/**
   Fisher LDA.  S_w and S_b are the within- and between-class scatter
   matrices normalized by the sample count.  The rows of the projection are
   the top-d generalized eigenvectors of S_b v = mu (S_w + lambda I) v,
   ordered by decreasing mu, scaled to unit length, and signed so that the
   first nonzero component is positive.  `shrinkage` defaults to
   1e-4 * trace(S_w) / D.

   Needs at least 2 classes with at least 2 samples each
   (InsufficientStatisticsError); d must be in [1, C - 1] (RankError).
   ConditioningError when S_w + lambda I is not positive definite.
*/
LdaModel lda_fit(std::span<const Embedding> data, std::size_t d,
                 std::optional<double> shrinkage = std::nullopt);

/// projection * e.vector; ids are kept.
Embedding lda_project(const LdaModel &model, const Embedding &e);
Vector lda_project(const LdaModel &model, std::span<const double> v);

/// a.b / (|a| |b|).  UndefinedScoreError on a zero vector.
double cosine(std::span<const double> a, std::span<const double> b);

/// Cosine score of every trial, in order.  LookupError names a missing id.
std::vector<ScoredTrial> score_trials(std::span<const Trial> trials,
                                      std::span<const Embedding> store);

/**
   Equal error rate.  Thresholds run over the sorted distinct pooled scores
   and +inf, with FAR(t) = #{nontarget >= t} / N and FRR(t) = #{target < t} / S.
   At the first threshold where FRR >= FAR the two curves are interpolated
   linearly from the previous operating point and the crossing value is
   returned.  EmptyInputError if either set is empty.
*/
double compute_eer(std::span<const double> target_scores,
                   std::span<const double> nontarget_scores);

/// Splits scored trials by label and calls compute_eer.
double compute_eer(std::span<const ScoredTrial> scored);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double top1_accuracy(std::span<const Vector> logits, std::span<const int> labels);

// Text formats.  Embeddings: "dim=<d>" then "utt<TAB>spk<TAB>v1,v2,..." with
// 9 significant digits, "-" for an unknown speaker.  Trials:
// "enroll<TAB>test<TAB>1|0".  Scores: "enroll<TAB>test<TAB>score" with 6
// decimals.  LDA: "lda <d> <D> <classes> <shrinkage>" then d rows of
// comma-separated values, 17 significant digits.

void write_embeddings(std::span<const Embedding> embeddings, std::ostream &out);
std::vector<Embedding> read_embeddings(std::istream &in);
void write_embeddings(std::span<const Embedding> embeddings, const std::string &path);
std::vector<Embedding> read_embeddings(const std::string &path);

void write_trials(std::span<const Trial> trials, std::ostream &out);
std::vector<Trial> read_trials(std::istream &in);
void write_trials(std::span<const Trial> trials, const std::string &path);
std::vector<Trial> read_trials(const std::string &path);

void write_scores(std::span<const ScoredTrial> scores, std::ostream &out);
/// Scores carry no labels; target is false on every returned row.
std::vector<ScoredTrial> read_scores(std::istream &in);
void write_scores(std::span<const ScoredTrial> scores, const std::string &path);
std::vector<ScoredTrial> read_scores(const std::string &path);

void write_lda(const LdaModel &model, std::ostream &out);
LdaModel read_lda(std::istream &in);
void write_lda(const LdaModel &model, const std::string &path);
LdaModel read_lda(const std::string &path);

}  // namespace ctdnn

#endif  // CTDNN_EVAL_H_
