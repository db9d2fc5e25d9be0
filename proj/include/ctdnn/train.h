// include/ctdnn/train.h

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

#ifndef CTDNN_TRAIN_H_
#define CTDNN_TRAIN_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctdnn/matrix.h"
#include "ctdnn/model.h"

namespace ctdnn {

/// Adam moments for a parameter set laid out like Model::parameters().
struct AdamState {
  std::vector<Vector> m, v;
  std::uint64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Zero moments shaped like `model`'s parameters.
  static AdamState for_model(const Model &model, double lr);
};

/// One Adam update with bias correction.  All gradients are checked before any
/// parameter is touched; a non-finite entry throws DivergenceError naming the
/// parameter block and leaves params and state unchanged.
void adam_step(AdamState &state, const std::vector<ParamView> &params,
               const Gradients &grads);

struct TrainConfig {
  std::size_t batch_size = 16;
  double lr = 1e-4;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;
  double min_delta = 0.0;
  std::uint64_t seed = 1;
  std::size_t eval_every = 10;  // batches between learning-curve rows

  /// ValidationError naming the first bad field.
  void validate() const;
};

/// Sequences with integer class labels.
struct LabeledSet {
  std::vector<Matrix> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
};

/// Index batches covering 0..n-1 exactly once, shuffled by an Rng seeded from
/// derive_seed(seed, epoch).  The last batch may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::uint64_t seed,
                                                   std::uint64_t epoch);

/// A learning-curve row.  Train figures are running means over the batches
/// since the previous row; val figures come from a full infer-mode pass (NaN
/// when there is no validation set).
struct CurveRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

/// Per-epoch figures.  Train loss/accuracy are running over the epoch's
/// batches.
struct EpochSummary {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct LearningCurve {
  std::vector<CurveRow> rows;
  std::vector<EpochSummary> epochs;
};

struct FitResult {
  LearningCurve curve;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

/**
   Mini-batch training with Adam on the mean per-sequence cross entropy.
   Epochs are numbered from 1.  The monitored loss is the validation loss, or
   the epoch's train loss when `val` is empty; an epoch improves when it
   beats the best so far by more than min_delta.  Training stops once
   `patience` + 1 epochs in a row fail to improve, or at max_epochs, and the
   model is left holding the best epoch's parameters and BN statistics.

   A non-finite loss or gradient throws DivergenceError; the model keeps the
   last finite parameters.  Besides what validate() accepts, lr = 0 is
   allowed here and freezes the parameters (BN statistics still update).
*/
FitResult fit(Model &model, const LabeledSet &train, const LabeledSet &val,
              const TrainConfig &config);

/// Mean cross entropy and accuracy in infer mode, evaluated in chunks of
/// `chunk` sequences.
struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};
Evaluation evaluate(const Model &model, const LabeledSet &set,
                    std::size_t chunk = 16);

/// First epoch whose train accuracy reaches `threshold_acc`.
std::optional<std::size_t> converged_epoch(const LearningCurve &curve,
                                           double threshold_acc);

/// Comma-separated rows under the header
/// "epoch,step,train_loss,train_acc,val_loss,val_acc", 6 decimals.
void write_curve(const LearningCurve &curve, std::ostream &out);
void write_curve(const LearningCurve &curve, const std::string &path);

}  // namespace ctdnn

#endif  // CTDNN_TRAIN_H_
