// include/ctdnn/model.h

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

#ifndef CTDNN_MODEL_H_
#define CTDNN_MODEL_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ctdnn/arch.h"
#include "ctdnn/layers.h"

namespace ctdnn {

/// One td or ctd layer as built: a batch norm per incoming stream, then the
/// time-delay units, each followed by ReLU.
struct TimeDelayBlock {
  std::vector<BatchNormState> norms;
  CrossedTimeDelayLayer layer;
};

/// Fully connected layer; hidden ones are followed by ReLU, the classifier is
/// not.
struct DenseBlock {
  FullyConnected fc;
  bool relu = true;
};

struct ForwardCache;

struct ParamView {
  std::string name;
  std::span<double> values;
};

struct ConstParamView {
  std::string name;
  std::span<const double> values;
};

/// Gradient set, one vector per entry of Model::parameters(), same order.
using Gradients = std::vector<Vector>;

class Model {
 public:
  Model() = default;

  const ModelConfig &config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<TimeDelayBlock> &time_delay_blocks() const { return td_; }
  const std::vector<DenseBlock> &dense_blocks() const { return dense_; }

  /// Trainable parameters in topology order: per time-delay layer the BN
  /// gamma/beta of each stream then each unit's weights and bias; then each
  /// fc's weights and bias.  Taking mutable views marks outstanding forward
  /// caches stale.
  std::vector<ParamView> parameters();
  std::vector<ConstParamView> parameters() const;

  /// BN running means and variances, topology order.
  std::vector<ParamView> buffers();
  std::vector<ConstParamView> buffers() const;

  std::uint64_t num_parameters() const;
  std::uint64_t revision() const { return revision_; }

  /// Speaker (class) names in label order; may be empty.
  std::vector<std::string> class_names;

  Gradients zero_gradients() const;

  /// Folds the batch statistics of a train-mode forward into the BN running
  /// statistics.
  void update_running_stats(const ForwardCache &cache);

 private:
  friend Model build_model(const ModelConfig &config, std::uint64_t seed);
  friend Model load_model(std::istream &in);

  /// Zero-initialized parameters shaped for `config`.
  explicit Model(const ModelConfig &config);

  template <typename View, typename Self>
  static std::vector<View> param_views(Self &self);
  template <typename View, typename Self>
  static std::vector<View> buffer_views(Self &self);

  ModelConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<TimeDelayBlock> td_;
  std::vector<DenseBlock> dense_;
  std::uint64_t revision_ = 0;
};

/// Builds a model from a bound config.  Weights ~ U(-a, a) with
/// a = sqrt(6 / (fan_in + fan_out)), drawn in topology order; biases zero; BN
/// gamma 1, beta 0, running mean 0, running variance 1.
Model build_model(const ModelConfig &config, std::uint64_t seed);

struct ForwardCache {
  const Model *model = nullptr;
  std::uint64_t revision = 0;
  Mode mode = Mode::kInfer;
  std::size_t batch_size = 0;

  struct Block {
    std::vector<BnCache> bn;                        // [stream]
    std::vector<std::vector<Matrix>> normalized;    // [stream][seq]
    std::vector<std::vector<Matrix>> pre;           // [unit][seq]
    std::vector<std::vector<Matrix>> post;          // [unit][seq]
  };
  std::vector<Block> blocks;
  std::vector<Vector> embeddings;                    // [seq]
  std::vector<std::vector<Vector>> dense_inputs;     // [fc][seq]
  std::vector<std::vector<Vector>> dense_pre;        // [fc][seq]
  std::vector<Vector> logits;                        // [seq]

  /// Smallest |x| over every ReLU input; gradient checks use this to stay
  /// away from the kink.
  double min_abs_relu_input() const;
};

/// Batch forward pass.  Train mode normalizes with batch statistics pooled
/// over all frames of all sequences; the model itself is not modified.
/// SequenceTooShortError names the failing layer.
ForwardCache forward(const Model &model, std::span<const Matrix> batch,
                     Mode mode);

/// Gradients of sum_i <grad_logits[i], logits[i]> with respect to every
/// parameter.  CacheError if the cache belongs to another model or the
/// parameters were touched since the forward pass.
Gradients backward(const Model &model, const ForwardCache &cache,
                   std::span<const Vector> grad_logits);

struct BatchLoss {
  double loss = 0.0;  // mean cross entropy per sequence
  std::size_t correct = 0;
  Gradients grads;
};

/// Mean cross entropy over the batch with gradients (when `with_grads`).
/// Returns the forward cache through `cache_out` if given.
BatchLoss batch_loss(const Model &model, std::span<const Matrix> batch,
                     std::span<const int> labels, Mode mode, bool with_grads,
                     ForwardCache *cache_out = nullptr);

/// Pooled (sp/sc) activation for one sequence with BN in infer mode.
Vector embed(const Model &model, const Matrix &x);

/// Logits for one sequence with BN in infer mode.
Vector predict(const Model &model, const Matrix &x);

/// Binary model file: "CTDM", u16 version, the canonical DSL, dimensions,
/// seed, class names, then parameters and BN buffers as f64 little-endian.
void save_model(const Model &model, std::ostream &out);
Model load_model(std::istream &in);
void save_model(const Model &model, const std::string &path);
Model load_model(const std::string &path);

}  // namespace ctdnn

#endif  // CTDNN_MODEL_H_
