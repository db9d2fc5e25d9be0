// include/ctdnn/arch.h

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

#ifndef CTDNN_ARCH_H_
#define CTDNN_ARCH_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctdnn/layers.h"

namespace ctdnn {

enum class LayerKind { kTd, kCtd, kSp, kSc, kFc, kSoftmax };

struct LayerSpec {
  LayerKind kind = LayerKind::kTd;
  std::vector<ContextWindow> contexts;  // td: exactly one; ctd: one or more
  int width = 0;          // td/ctd output width H, fc output size
  int replicate = 1;      // ctd(L:R)*N
  bool classes = false;   // fc(@classes)

  /// Contexts of the individual units, replication expanded.
  std::vector<ContextWindow> unit_contexts() const;
  bool operator==(const LayerSpec &) const = default;
};

/// A validated architecture.  input_dim and num_classes are zero until
/// bound with with_dims().
struct ModelConfig {
  std::vector<LayerSpec> layers;
  int input_dim = 0;
  int num_classes = 0;
  std::size_t embed_tap = 0;  // index of the sp or sc layer

  bool bound() const { return input_dim > 0 && num_classes > 0; }
  bool operator==(const ModelConfig &) const = default;
};

inline constexpr std::string_view kTdnnPreset = "tdnn-paper";
inline constexpr std::string_view kCtdnnPreset = "ctdnn-paper";

/**
   Parses the architecture DSL:

     arch   ::= layer ("|" layer)*
     layer  ::= "td(" ctx ")x" H
              | "ctd(" ctx ("," ctx)* ")x" H
              | "ctd(" ctx ")*" N "x" H
              | "sp" | "sc" | "fc(" N ")" | "fc(@classes)" | "softmax"
     ctx    ::= int ":" int

   or one of the preset names, expanded at width `preset_width`.  Whitespace
   between tokens is ignored.  Throws ParseError (position + expected token)
   on syntax errors and SemanticError (message starts with the rule name) on
   topology violations.
*/
ModelConfig parse_arch(std::string_view text, int preset_width = 512);

/// DSL text of a preset at width H.
std::string preset_dsl(std::string_view name, int width);

/// Canonical DSL text; parse_arch(to_dsl(c)) reproduces c's layers.
std::string to_dsl(const ModelConfig &config);

/// Binds input and class dimensions.  A numeric final fc must equal
/// num_classes.
ModelConfig with_dims(ModelConfig config, int input_dim, int num_classes);

/// Exact count of trainable scalars (weights, biases, BN gamma/beta) of a
/// bound config.  BN running statistics are not counted.
std::uint64_t param_count(const ModelConfig &config);

/// Number of time-delay layers (td or ctd) in the config.
std::size_t time_delay_depth(const ModelConfig &config);

/// Length of the pooled embedding of a bound config (sum over branches of
/// 2 * H_b).
std::size_t embedding_dim(const ModelConfig &config);

/// Minimum sequence length that survives every time-delay layer.
std::size_t min_sequence_length(const ModelConfig &config);

}  // namespace ctdnn

#endif  // CTDNN_ARCH_H_
