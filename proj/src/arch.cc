// src/arch.cc

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

#include "ctdnn/arch.h"

#include <algorithm>
#include <cctype>
#include <limits>

#include "ctdnn/errors.h"

namespace ctdnn {

namespace {

bool is_time_delay(LayerKind k) {
  return k == LayerKind::kTd || k == LayerKind::kCtd;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  std::vector<LayerSpec> parse() {
    std::vector<LayerSpec> layers;
    layers.push_back(layer());
    skip_space();
    while (pos_ < text_.size()) {
      expect("|");
      layers.push_back(layer());
      skip_space();
    }
    return layers;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool accept(std::string_view token) {
    skip_space();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token) {
    if (!accept(token)) throw ParseError(pos_, "'" + std::string(token) + "'");
  }

  long integer(bool allow_sign, const char *what) {
    skip_space();
    std::size_t start = pos_;
    bool negative = false;
    if (allow_sign && pos_ < text_.size() &&
        (text_[pos_] == '-' || text_[pos_] == '+')) {
      negative = text_[pos_] == '-';
      ++pos_;
    }
    if (pos_ >= text_.size() ||
        !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      pos_ = start;
      throw ParseError(start, what);
    }
    long value = 0;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      value = value * 10 + (text_[pos_] - '0');
      if (value > std::numeric_limits<int>::max()) throw ParseError(start, what);
      ++pos_;
    }
    return negative ? -value : value;
  }

  ContextWindow context() {
    std::size_t at = (skip_space(), pos_);
    int left = static_cast<int>(integer(true, "context offset"));
    expect(":");
    int right = static_cast<int>(integer(true, "context offset"));
    try {
      return ContextWindow::make(left, right);
    } catch (const SemanticError &e) {
      throw SemanticError(std::string(e.what()) + " (at position " +
                          std::to_string(at) + ")");
    }
  }

  int width() {
    expect("x");
    return static_cast<int>(integer(false, "layer width"));
  }

  LayerSpec layer() {
    skip_space();
    LayerSpec spec;
    // Longer keywords first: "ctd" before "td", "softmax" before "sp"/"sc".
    if (accept("ctd")) {
      spec.kind = LayerKind::kCtd;
      expect("(");
      spec.contexts.push_back(context());
      while (accept(",")) spec.contexts.push_back(context());
      expect(")");
      if (accept("*")) {
        if (spec.contexts.size() != 1)
          throw ParseError(pos_ - 1, "'x' (replication takes one context)");
        spec.replicate = static_cast<int>(integer(false, "branch count"));
      }
      spec.width = width();
    } else if (accept("td")) {
      spec.kind = LayerKind::kTd;
      expect("(");
      spec.contexts.push_back(context());
      expect(")");
      spec.width = width();
    } else if (accept("softmax")) {
      spec.kind = LayerKind::kSoftmax;
    } else if (accept("sp")) {
      spec.kind = LayerKind::kSp;
    } else if (accept("sc")) {
      spec.kind = LayerKind::kSc;
    } else if (accept("fc")) {
      spec.kind = LayerKind::kFc;
      expect("(");
      if (accept("@classes"))
        spec.classes = true;
      else
        spec.width = static_cast<int>(integer(false, "fc size or @classes"));
      expect(")");
    } else {
      throw ParseError(pos_, "layer (td, ctd, sp, sc, fc, softmax)");
    }
    return spec;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

[[noreturn]] void semantic(const std::string &rule, std::size_t layer,
                           const std::string &detail) {
  throw SemanticError(rule + ": layer " + std::to_string(layer) + ": " + detail);
}

/// Checks topology and returns the index of the pooling layer.
std::size_t validate(const std::vector<LayerSpec> &layers) {
  std::size_t branches = 1;
  bool seen_time_delay = false;
  std::size_t pool = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec &s = layers[i];
    switch (s.kind) {
      case LayerKind::kTd:
      case LayerKind::kCtd: {
        if (pool != layers.size())
          semantic("td-before-pool", i, "time-delay layer after pooling");
        if (s.width < 1) semantic("width", i, "width must be >= 1");
        if (s.replicate < 1)
          semantic("branch-count", i, "replication must be >= 1");
        std::size_t units = s.unit_contexts().size();
        if (s.kind == LayerKind::kTd) {
          if (branches != 1)
            semantic("td-single-stream", i,
                     "td needs one input stream, got " +
                         std::to_string(branches) + " branches");
        } else if (branches != 1 && units != branches) {
          semantic("branch-count", i,
                   std::to_string(units) + " units for " +
                       std::to_string(branches) + " incoming branches");
        }
        branches = units;
        seen_time_delay = true;
        break;
      }
      case LayerKind::kSp:
      case LayerKind::kSc: {
        if (!seen_time_delay)
          semantic("pool-position", i, "pooling precedes any td layer");
        if (pool != layers.size())
          semantic("single-pool", i, "second pooling layer");
        LayerKind prev = layers[i - 1].kind;
        if (s.kind == LayerKind::kSp && prev != LayerKind::kTd)
          semantic("sp-follows-td", i, "sp must directly follow a td layer");
        if (s.kind == LayerKind::kSc && prev != LayerKind::kCtd)
          semantic("sc-follows-ctd", i, "sc must directly follow a ctd layer");
        pool = i;
        break;
      }
      case LayerKind::kFc:
        if (pool == layers.size())
          semantic("fc-after-pool", i, "fc before the pooling layer");
        if (!s.classes && s.width < 1) semantic("width", i, "fc size must be >= 1");
        break;
      case LayerKind::kSoftmax:
        if (i + 1 != layers.size())
          semantic("head", i, "softmax must be the last layer");
        break;
    }
  }
  if (pool == layers.size())
    semantic("single-pool", layers.size(), "no sp or sc layer");
  const std::size_t n = layers.size();
  if (n < 2 || layers[n - 1].kind != LayerKind::kSoftmax ||
      layers[n - 2].kind != LayerKind::kFc)
    semantic("head", n, "the last two layers must be fc then softmax");
  for (std::size_t i = pool + 1; i + 2 < n; ++i)
    if (layers[i].classes)
      semantic("classes-position", i, "fc(@classes) must be the final fc");
  return pool;
}

}  // namespace

std::vector<ContextWindow> LayerSpec::unit_contexts() const {
  std::vector<ContextWindow> out;
  for (int r = 0; r < replicate; ++r)
    out.insert(out.end(), contexts.begin(), contexts.end());
  return out;
}

std::string preset_dsl(std::string_view name, int width) {
  const std::string h = std::to_string(width);
  const std::string fc = std::to_string(2 * width);
  if (name == kTdnnPreset)
    return "td(-2:2)x" + h + " | td(-1:2)x" + h + " | td(-3:3)x" + h +
           " | td(-7:2)x" + h + " | sp | fc(" + fc +
           ") | fc(@classes) | softmax";
  if (name == kCtdnnPreset)
    return "ctd(-4:4,-2:2,-1:1)x" + h + " | ctd(-1:1)*3x" + h + " | sc | fc(" +
           fc + ") | fc(@classes) | softmax";
  throw ValidationError("unknown preset '" + std::string(name) + "'");
}

ModelConfig parse_arch(std::string_view text, int preset_width) {
  std::string_view trimmed = text;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front())))
    trimmed.remove_prefix(1);
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
    trimmed.remove_suffix(1);
  if (trimmed == kTdnnPreset || trimmed == kCtdnnPreset) {
    if (preset_width < 1) throw ValidationError("preset width must be >= 1");
    return parse_arch(preset_dsl(trimmed, preset_width));
  }
  ModelConfig config;
  config.layers = Parser(text).parse();
  config.embed_tap = validate(config.layers);
  return config;
}

std::string to_dsl(const ModelConfig &config) {
  std::string out;
  for (const LayerSpec &s : config.layers) {
    if (!out.empty()) out += " | ";
    auto ctx = [](const ContextWindow &c) {
      return std::to_string(c.left) + ":" + std::to_string(c.right);
    };
    switch (s.kind) {
      case LayerKind::kTd:
        out += "td(" + ctx(s.contexts[0]) + ")x" + std::to_string(s.width);
        break;
      case LayerKind::kCtd:
        out += "ctd(";
        for (std::size_t i = 0; i < s.contexts.size(); ++i)
          out += (i ? "," : "") + ctx(s.contexts[i]);
        out += ")";
        if (s.replicate != 1) out += "*" + std::to_string(s.replicate);
        out += "x" + std::to_string(s.width);
        break;
      case LayerKind::kSp: out += "sp"; break;
      case LayerKind::kSc: out += "sc"; break;
      case LayerKind::kFc:
        out += s.classes ? "fc(@classes)" : "fc(" + std::to_string(s.width) + ")";
        break;
      case LayerKind::kSoftmax: out += "softmax"; break;
    }
  }
  return out;
}

ModelConfig with_dims(ModelConfig config, int input_dim, int num_classes) {
  if (input_dim < 1) throw ValidationError("input_dim must be >= 1");
  if (num_classes < 2)
    throw ValidationError("num_classes must be >= 2, got " +
                          std::to_string(num_classes));
  const LayerSpec &last_fc = config.layers[config.layers.size() - 2];
  if (!last_fc.classes && last_fc.width != num_classes)
    throw SemanticError("classifier-width: final fc has " +
                        std::to_string(last_fc.width) + " outputs but there are " +
                        std::to_string(num_classes) + " classes");
  config.input_dim = input_dim;
  config.num_classes = num_classes;
  return config;
}

std::uint64_t param_count(const ModelConfig &config) {
  if (!config.bound())
    throw ValidationError("param_count: config has no input/class dimensions");
  std::vector<std::uint64_t> streams{static_cast<std::uint64_t>(config.input_dim)};
  std::uint64_t total = 0, feature = 0;
  for (const LayerSpec &s : config.layers) {
    if (is_time_delay(s.kind)) {
      for (std::uint64_t d : streams) total += 2 * d;  // BN gamma, beta
      auto ctxs = s.unit_contexts();
      const std::uint64_t h = static_cast<std::uint64_t>(s.width);
      for (std::size_t u = 0; u < ctxs.size(); ++u) {
        std::uint64_t d_in = streams.size() == 1 ? streams[0] : streams[u];
        total += h * ctxs[u].span() * d_in + h;
      }
      streams.assign(ctxs.size(), h);
    } else if (s.kind == LayerKind::kSp || s.kind == LayerKind::kSc) {
      for (std::uint64_t d : streams) feature += 2 * d;
    } else if (s.kind == LayerKind::kFc) {
      std::uint64_t out = s.classes ? config.num_classes : s.width;
      total += out * feature + out;
      feature = out;
    }
  }
  return total;
}

std::size_t time_delay_depth(const ModelConfig &config) {
  return static_cast<std::size_t>(
      std::count_if(config.layers.begin(), config.layers.end(),
                    [](const LayerSpec &s) { return is_time_delay(s.kind); }));
}

std::size_t embedding_dim(const ModelConfig &config) {
  std::vector<std::size_t> streams{static_cast<std::size_t>(config.input_dim)};
  for (const LayerSpec &s : config.layers) {
    if (is_time_delay(s.kind))
      streams.assign(s.unit_contexts().size(), static_cast<std::size_t>(s.width));
    if (s.kind == LayerKind::kSp || s.kind == LayerKind::kSc) break;
  }
  std::size_t n = 0;
  for (std::size_t d : streams) n += 2 * d;
  return n;
}

std::size_t min_sequence_length(const ModelConfig &config) {
  std::vector<std::size_t> shrink{0};
  for (const LayerSpec &s : config.layers) {
    if (!is_time_delay(s.kind)) continue;
    auto ctxs = s.unit_contexts();
    std::vector<std::size_t> next(ctxs.size());
    for (std::size_t u = 0; u < ctxs.size(); ++u)
      next[u] = (shrink.size() == 1 ? shrink[0] : shrink[u]) + ctxs[u].shrink();
    shrink = std::move(next);
  }
  return 1 + *std::max_element(shrink.begin(), shrink.end());
}

}  // namespace ctdnn
