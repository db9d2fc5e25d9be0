// include/ctdnn/layers.h

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

#ifndef CTDNN_LAYERS_H_
#define CTDNN_LAYERS_H_

#include <span>
#include <vector>

#include "ctdnn/matrix.h"

namespace ctdnn {

enum class Mode { kTrain, kInfer };

/// Frame offsets [left, right] read by a time-delay unit, inclusive and
/// contiguous.  left <= 0 <= right.
struct ContextWindow {
  int left = 0;
  int right = 0;

  /// Validating constructor; throws SemanticError unless left <= 0 <= right.
  static ContextWindow make(int left, int right);

  std::size_t span() const { return static_cast<std::size_t>(right - left + 1); }
  /// Frames lost by valid-window scanning: T' = T - shrink().
  std::size_t shrink() const { return static_cast<std::size_t>(right - left); }

  bool operator==(const ContextWindow &) const = default;
};

/// One weight-shared affine filter over `span` consecutive frames.
/// weights is out_dim x (span * in_dim); column block k multiplies frame
/// t' + k of the input.
struct TimeDelayUnit {
  ContextWindow ctx;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Matrix weights;
  Vector bias;

  static TimeDelayUnit zeros(ContextWindow ctx, std::size_t in_dim,
                             std::size_t out_dim);
};

struct TdGrads {
  Matrix weights;
  Vector bias;
  Matrix input;
};

/// Valid (unpadded) scan: output row t' = W . concat(x[t'], ..., x[t'+span-1]) + b.
Matrix td_forward(const TimeDelayUnit &unit, const Matrix &x);
TdGrads td_backward(const TimeDelayUnit &unit, const Matrix &x,
                    const Matrix &grad_out);

/// Parallel time-delay units.  With one input every unit reads it; with one
/// input per unit, unit b reads input b.
struct CrossedTimeDelayLayer {
  std::vector<TimeDelayUnit> units;
};

struct CtdGrads {
  std::vector<TdGrads> units;
  /// One entry per input; in the fan-out form the single input gradient sums
  /// the contributions of every unit.
  std::vector<Matrix> inputs;
};

std::vector<Matrix> ctd_forward(const CrossedTimeDelayLayer &layer,
                                std::span<const Matrix> inputs);
CtdGrads ctd_backward(const CrossedTimeDelayLayer &layer,
                      std::span<const Matrix> inputs,
                      std::span<const Matrix> grad_outputs);

/// Statistics pooling: concat(mean over time, population std over time).
Vector sp_forward(const Matrix &x);
Matrix sp_backward(const Matrix &x, std::span<const double> grad);

/// Statistics concatenation: sp_forward per branch, concatenated in order.
Vector sc_forward(std::span<const Matrix> branches);
std::vector<Matrix> sc_backward(std::span<const Matrix> branches,
                                std::span<const double> grad);

struct FullyConnected {
  Matrix weights;  // out x in
  Vector bias;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
};

struct FcGrads {
  Matrix weights;
  Vector bias;
  Vector input;
};

Vector fc_forward(const FullyConnected &fc, std::span<const double> x);
FcGrads fc_backward(const FullyConnected &fc, std::span<const double> x,
                    std::span<const double> grad_y);

struct BatchNormState {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  static BatchNormState identity(std::size_t dim);
  std::size_t dim() const { return gamma.size(); }
};

struct BnCache {
  Mode mode = Mode::kInfer;
  std::size_t count = 0;  // frames pooled for the statistics
  Vector mean;
  Vector var;  // biased (divide by count) in train mode, running in infer
  Vector inv_std;
  std::vector<Matrix> normalized;  // x-hat, one per sequence
};

struct BnForward {
  std::vector<Matrix> outputs;
  BnCache cache;
};

struct BnGrads {
  Vector gamma;
  Vector beta;
  std::vector<Matrix> inputs;
};

/**
   Per-feature batch normalization of a batch of sequences.  In train mode the
   statistics pool every frame of every sequence; at least two frames in total
   are required (InsufficientStatisticsError otherwise).  In infer mode the
   running statistics are used.  The state is not modified; call
   bn_update_running() with the cache to advance the running statistics.
*/
BnForward bn_forward(const BatchNormState &state, std::span<const Matrix> batch,
                     Mode mode);
void bn_update_running(BatchNormState &state, const BnCache &cache);
BnGrads bn_backward(const BatchNormState &state, const BnCache &cache,
                    std::span<const Matrix> grad_outputs);

Matrix relu(const Matrix &x);
/// Subgradient at exactly zero is zero.
Matrix relu_backward(const Matrix &pre_activation, const Matrix &grad);
Vector relu(std::span<const double> x);
Vector relu_backward(std::span<const double> pre_activation,
                     std::span<const double> grad);

struct SoftmaxCe {
  double loss = 0.0;
  Vector grad;   // p - one_hot(label)
  Vector probs;
};

/// Max-subtracted softmax followed by cross entropy; throws LabelError for
/// labels outside [0, K) and ShapeError for K < 2.
SoftmaxCe softmax_ce(std::span<const double> logits, int label);

}  // namespace ctdnn

#endif  // CTDNN_LAYERS_H_
