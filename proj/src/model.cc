// src/model.cc

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

#include "ctdnn/model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "binary_io.h"
#include "ctdnn/errors.h"
#include "ctdnn/rng.h"

namespace ctdnn {

namespace {

constexpr char kModelMagic[4] = {'C', 'T', 'D', 'M'};
constexpr std::uint16_t kModelVersion = 1;

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

Model::Model(const ModelConfig &config) : config_(config) {
  if (!config.bound())
    throw ValidationError("model: config needs input_dim and num_classes");
  std::vector<std::size_t> streams{static_cast<std::size_t>(config.input_dim)};
  std::size_t feature = 0;
  const std::size_t last = config.layers.size() - 2;  // final fc
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec &s = config.layers[i];
    switch (s.kind) {
      case LayerKind::kTd:
      case LayerKind::kCtd: {
        TimeDelayBlock block;
        for (std::size_t d : streams)
          block.norms.push_back(BatchNormState::identity(d));
        auto ctxs = s.unit_contexts();
        const auto h = static_cast<std::size_t>(s.width);
        for (std::size_t u = 0; u < ctxs.size(); ++u) {
          std::size_t d_in = streams.size() == 1 ? streams[0] : streams[u];
          block.layer.units.push_back(TimeDelayUnit::zeros(ctxs[u], d_in, h));
        }
        streams.assign(ctxs.size(), h);
        td_.push_back(std::move(block));
        break;
      }
      case LayerKind::kSp:
      case LayerKind::kSc:
        for (std::size_t d : streams) feature += 2 * d;
        break;
      case LayerKind::kFc: {
        std::size_t out = s.classes ? static_cast<std::size_t>(config.num_classes)
                                    : static_cast<std::size_t>(s.width);
        DenseBlock dense;
        dense.fc.weights = Matrix(out, feature);
        dense.fc.bias.assign(out, 0.0);
        dense.relu = i != last;
        dense_.push_back(std::move(dense));
        feature = out;
        break;
      }
      case LayerKind::kSoftmax:
        break;
    }
  }
}

template <typename View, typename Self>
std::vector<View> Model::param_views(Self &self) {
  std::vector<View> out;
  for (std::size_t b = 0; b < self.td_.size(); ++b) {
    const std::string p = "td" + std::to_string(b);
    auto &block = self.td_[b];
    for (std::size_t s = 0; s < block.norms.size(); ++s) {
      auto &bn = block.norms[s];
      out.push_back({p + ".bn" + std::to_string(s) + ".gamma", bn.gamma});
      out.push_back({p + ".bn" + std::to_string(s) + ".beta", bn.beta});
    }
    for (std::size_t u = 0; u < block.layer.units.size(); ++u) {
      auto &unit = block.layer.units[u];
      out.push_back({p + ".unit" + std::to_string(u) + ".weights",
                     unit.weights.values()});
      out.push_back({p + ".unit" + std::to_string(u) + ".bias", unit.bias});
    }
  }
  for (std::size_t k = 0; k < self.dense_.size(); ++k) {
    const std::string p = "fc" + std::to_string(k);
    out.push_back({p + ".weights", self.dense_[k].fc.weights.values()});
    out.push_back({p + ".bias", self.dense_[k].fc.bias});
  }
  return out;
}

template <typename View, typename Self>
std::vector<View> Model::buffer_views(Self &self) {
  std::vector<View> out;
  for (std::size_t b = 0; b < self.td_.size(); ++b)
    for (std::size_t s = 0; s < self.td_[b].norms.size(); ++s) {
      auto &bn = self.td_[b].norms[s];
      const std::string p = "td" + std::to_string(b) + ".bn" + std::to_string(s);
      out.push_back({p + ".running_mean", bn.running_mean});
      out.push_back({p + ".running_var", bn.running_var});
    }
  return out;
}

std::vector<ParamView> Model::parameters() {
  ++revision_;
  return param_views<ParamView>(*this);
}

std::vector<ConstParamView> Model::parameters() const {
  return param_views<ConstParamView>(*this);
}

std::vector<ParamView> Model::buffers() { return buffer_views<ParamView>(*this); }

std::vector<ConstParamView> Model::buffers() const {
  return buffer_views<ConstParamView>(*this);
}

std::uint64_t Model::num_parameters() const {
  std::uint64_t n = 0;
  for (const auto &p : parameters()) n += p.values.size();
  return n;
}

Gradients Model::zero_gradients() const {
  Gradients g;
  for (const auto &p : parameters()) g.emplace_back(p.values.size(), 0.0);
  return g;
}

void Model::update_running_stats(const ForwardCache &cache) {
  if (cache.model != this)
    throw CacheError("update_running_stats: cache from a different model");
  if (cache.mode != Mode::kTrain) return;
  for (std::size_t b = 0; b < td_.size(); ++b)
    for (std::size_t s = 0; s < td_[b].norms.size(); ++s)
      bn_update_running(td_[b].norms[s], cache.blocks[b].bn[s]);
}

Model build_model(const ModelConfig &config, std::uint64_t seed) {
  Model m(config);
  m.seed_ = seed;
  Rng rng(seed);
  auto fill = [&rng](std::span<double> w, std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double &v : w) v = rng.uniform(-bound, bound);
  };
  for (auto &block : m.td_)
    for (auto &unit : block.layer.units)
      fill(unit.weights.values(), unit.weights.cols(), unit.out_dim);
  for (auto &dense : m.dense_)
    fill(dense.fc.weights.values(), dense.fc.in_dim(), dense.fc.out_dim());
  return m;
}

double ForwardCache::min_abs_relu_input() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto &block : blocks)
    for (const auto &unit : block.pre)
      for (const Matrix &x : unit)
        for (double v : x.values()) m = std::min(m, std::abs(v));
  for (std::size_t k = 0; k + 1 < dense_pre.size(); ++k)
    for (const Vector &x : dense_pre[k])
      for (double v : x) m = std::min(m, std::abs(v));
  return m;
}

namespace {

ForwardCache run_forward(const Model &model, std::span<const Matrix> batch,
                         Mode mode, bool stop_at_tap) {
  const ModelConfig &config = model.config();
  if (batch.empty()) throw EmptyInputError("forward: empty batch");
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (batch[i].cols() != static_cast<std::size_t>(config.input_dim))
      throw ShapeError("forward: sequence " + std::to_string(i) + " is " +
                       batch[i].shape_string() + ", model expects " +
                       std::to_string(config.input_dim) + " columns");

  ForwardCache c;
  c.model = &model;
  c.revision = model.revision();
  c.mode = mode;
  c.batch_size = batch.size();

  // current[stream][seq]; the first block reads the raw batch.
  std::vector<std::span<const Matrix>> current{batch};

  const auto &blocks = model.time_delay_blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const TimeDelayBlock &block = blocks[b];
    ForwardCache::Block fb;
    for (std::size_t s = 0; s < block.norms.size(); ++s) {
      BnForward bn = bn_forward(block.norms[s], current[s], mode);
      fb.bn.push_back(std::move(bn.cache));
      fb.normalized.push_back(std::move(bn.outputs));
    }
    const auto &units = block.layer.units;
    fb.pre.resize(units.size());
    fb.post.resize(units.size());
    for (std::size_t u = 0; u < units.size(); ++u) {
      const auto &inputs = fb.normalized[fb.normalized.size() == 1 ? 0 : u];
      for (std::size_t i = 0; i < batch.size(); ++i) {
        Matrix pre;
        try {
          pre = td_forward(units[u], inputs[i]);
        } catch (const SequenceTooShortError &e) {
          throw SequenceTooShortError("time-delay layer " + std::to_string(b) +
                                      ", unit " + std::to_string(u) + ": " +
                                      e.what());
        }
        fb.post[u].push_back(relu(pre));
        fb.pre[u].push_back(std::move(pre));
      }
    }
    c.blocks.push_back(std::move(fb));
    current.clear();
    for (const auto &unit_out : c.blocks.back().post) current.emplace_back(unit_out);
  }

  // sc over the branches of each sequence (sp when there is one branch).
  c.embeddings.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t s = 0; s < current.size(); ++s) {
      if (current[s][i].rows() == 0)
        throw EmptyInputError("pooling: branch " + std::to_string(s) + " is empty");
      Vector stats = sp_forward(current[s][i]);
      c.embeddings[i].insert(c.embeddings[i].end(), stats.begin(), stats.end());
    }
  if (stop_at_tap) return c;

  const auto &dense = model.dense_blocks();
  c.dense_inputs.resize(dense.size());
  c.dense_pre.resize(dense.size());
  c.logits.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Vector h = c.embeddings[i];
    for (std::size_t k = 0; k < dense.size(); ++k) {
      Vector pre = fc_forward(dense[k].fc, h);
      c.dense_inputs[k].push_back(std::move(h));
      h = dense[k].relu ? relu(pre) : pre;
      c.dense_pre[k].push_back(std::move(pre));
    }
    c.logits[i] = std::move(h);
  }
  return c;
}

}  // namespace

ForwardCache forward(const Model &model, std::span<const Matrix> batch,
                     Mode mode) {
  return run_forward(model, batch, mode, false);
}

Gradients backward(const Model &model, const ForwardCache &cache,
                   std::span<const Vector> grad_logits) {
  if (cache.model != &model)
    throw CacheError("backward: cache was produced by a different model");
  if (cache.revision != model.revision())
    throw CacheError("backward: parameters changed since the forward pass "
                     "(stale cache)");
  if (cache.logits.size() != cache.batch_size ||
      grad_logits.size() != cache.batch_size)
    throw CacheError("backward: cache holds " + std::to_string(cache.logits.size()) +
                     " logits for " + std::to_string(grad_logits.size()) +
                     " upstream gradients");

  Gradients grads = model.zero_gradients();
  const auto &blocks = model.time_delay_blocks();
  const auto &dense = model.dense_blocks();

  // Gradient slot of each block's first parameter.
  std::vector<std::size_t> td_slot(blocks.size());
  std::size_t slot = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    td_slot[b] = slot;
    slot += 2 * blocks[b].norms.size() + 2 * blocks[b].layer.units.size();
  }
  const std::size_t dense_slot = slot;

  const std::size_t n = cache.batch_size;
  const std::size_t n_branches =
      blocks.empty() ? 0 : blocks.back().layer.units.size();
  // grad_post[stream][seq] flowing into the last block's outputs.
  std::vector<std::vector<Matrix>> grad_post(n_branches);

  for (std::size_t i = 0; i < n; ++i) {
    if (grad_logits[i].size() != cache.logits[i].size())
      throw ShapeError("backward: gradient for sequence " + std::to_string(i) +
                       " has length " + std::to_string(grad_logits[i].size()));
    Vector g = grad_logits[i];
    for (std::size_t k = dense.size(); k-- > 0;) {
      if (dense[k].relu) g = relu_backward(cache.dense_pre[k][i], g);
      FcGrads fg = fc_backward(dense[k].fc, cache.dense_inputs[k][i], g);
      axpy(1.0, fg.weights.values(), grads[dense_slot + 2 * k]);
      axpy(1.0, fg.bias, grads[dense_slot + 2 * k + 1]);
      g = std::move(fg.input);
    }
    std::size_t offset = 0;
    for (std::size_t s = 0; s < n_branches; ++s) {
      const Matrix &branch = cache.blocks.back().post[s][i];
      grad_post[s].push_back(sp_backward(
          branch, std::span<const double>(g).subspan(offset, 2 * branch.cols())));
      offset += 2 * branch.cols();
    }
  }

  for (std::size_t b = blocks.size(); b-- > 0;) {
    const TimeDelayBlock &block = blocks[b];
    const ForwardCache::Block &fb = cache.blocks[b];
    const std::size_t n_streams = block.norms.size();
    const std::size_t bn_slots = 2 * n_streams;
    std::vector<std::vector<Matrix>> grad_norm(n_streams);
    for (std::size_t s = 0; s < n_streams; ++s)
      for (std::size_t i = 0; i < n; ++i)
        grad_norm[s].emplace_back(fb.normalized[s][i].rows(),
                                  fb.normalized[s][i].cols());
    for (std::size_t u = 0; u < block.layer.units.size(); ++u) {
      const std::size_t s = n_streams == 1 ? 0 : u;
      for (std::size_t i = 0; i < n; ++i) {
        Matrix gp = relu_backward(fb.pre[u][i], grad_post[u][i]);
        TdGrads tg = td_backward(block.layer.units[u], fb.normalized[s][i], gp);
        axpy(1.0, tg.weights.values(), grads[td_slot[b] + bn_slots + 2 * u]);
        axpy(1.0, tg.bias, grads[td_slot[b] + bn_slots + 2 * u + 1]);
        axpy(1.0, tg.input.values(), grad_norm[s][i].values());
      }
    }
    std::vector<std::vector<Matrix>> grad_in(n_streams);
    for (std::size_t s = 0; s < n_streams; ++s) {
      BnGrads bg = bn_backward(block.norms[s], fb.bn[s], grad_norm[s]);
      axpy(1.0, bg.gamma, grads[td_slot[b] + 2 * s]);
      axpy(1.0, bg.beta, grads[td_slot[b] + 2 * s + 1]);
      grad_in[s] = std::move(bg.inputs);
    }
    grad_post = std::move(grad_in);
  }
  return grads;
}

BatchLoss batch_loss(const Model &model, std::span<const Matrix> batch,
                     std::span<const int> labels, Mode mode, bool with_grads,
                     ForwardCache *cache_out) {
  if (labels.size() != batch.size())
    throw ShapeError("batch_loss: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(batch.size()) + " sequences");
  ForwardCache cache = forward(model, batch, mode);
  BatchLoss r;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<Vector> grad_logits;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    SoftmaxCe ce = softmax_ce(cache.logits[i], labels[i]);
    r.loss += ce.loss;
    if (argmax(cache.logits[i]) == static_cast<std::size_t>(labels[i])) ++r.correct;
    for (double &g : ce.grad) g *= inv_n;
    grad_logits.push_back(std::move(ce.grad));
  }
  r.loss *= inv_n;
  if (with_grads) r.grads = backward(model, cache, grad_logits);
  if (cache_out) *cache_out = std::move(cache);
  return r;
}

Vector embed(const Model &model, const Matrix &x) {
  return std::move(run_forward(model, std::span(&x, 1), Mode::kInfer, true)
                       .embeddings[0]);
}

Vector predict(const Model &model, const Matrix &x) {
  return std::move(forward(model, std::span(&x, 1), Mode::kInfer).logits[0]);
}

void save_model(const Model &model, std::ostream &out) {
  using namespace binary;
  const ModelConfig &c = model.config();
  out.write(kModelMagic, 4);
  put_uint<std::uint16_t>(out, kModelVersion);
  const std::string dsl = to_dsl(c);
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(dsl.size()));
  out.write(dsl.data(), static_cast<std::streamsize>(dsl.size()));
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(c.input_dim));
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(c.num_classes));
  put_uint<std::uint64_t>(out, model.seed());
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(model.class_names.size()));
  for (const std::string &name : model.class_names) {
    put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  std::uint64_t count = 0;
  for (const auto &p : model.parameters()) count += p.values.size();
  for (const auto &p : model.buffers()) count += p.values.size();
  put_uint<std::uint64_t>(out, count);
  for (const auto &p : model.parameters())
    for (double v : p.values) put_f64(out, v);
  for (const auto &p : model.buffers())
    for (double v : p.values) put_f64(out, v);
  if (!out) throw IoError("save_model: write failed");
}

Model load_model(std::istream &in) {
  binary::Reader r(in);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kModelMagic))
    throw FormatError(0, "bad magic (expected CTDM)");
  const std::size_t version_at = r.offset();
  if (r.uint<std::uint16_t>("version") != kModelVersion)
    throw FormatError(version_at, "unsupported model version");
  const auto dsl_len = r.uint<std::uint32_t>("architecture length");
  const std::size_t dsl_at = r.offset();
  std::string dsl = r.string(dsl_len, "architecture text");
  const auto input_dim = r.uint<std::uint32_t>("input_dim");
  const auto num_classes = r.uint<std::uint32_t>("num_classes");
  const auto seed = r.uint<std::uint64_t>("seed");
  ModelConfig config;
  try {
    config = with_dims(parse_arch(dsl), static_cast<int>(input_dim),
                       static_cast<int>(num_classes));
  } catch (const Error &e) {
    throw FormatError(dsl_at, std::string("invalid architecture: ") + e.what());
  }
  Model m(config);
  m.seed_ = seed;
  const auto n_names = r.uint<std::uint32_t>("class name count");
  for (std::uint32_t i = 0; i < n_names; ++i) {
    const auto len = r.uint<std::uint32_t>("class name length");
    m.class_names.push_back(r.string(len, "class name"));
  }
  const std::size_t count_at = r.offset();
  const auto count = r.uint<std::uint64_t>("value count");
  std::uint64_t expected = 0;
  for (const auto &p : std::as_const(m).parameters()) expected += p.values.size();
  for (const auto &p : std::as_const(m).buffers()) expected += p.values.size();
  if (count != expected)
    throw FormatError(count_at, "value count " + std::to_string(count) +
                                    " does not match architecture (" +
                                    std::to_string(expected) + ")");
  for (auto &p : m.parameters())
    for (double &v : p.values) v = r.f64("parameter");
  for (auto &p : m.buffers())
    for (double &v : p.values) v = r.f64("buffer");
  m.revision_ = 0;
  return m;
}

void save_model(const Model &model, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_model(model, out);
}

Model load_model(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_model(in);
}

}  // namespace ctdnn
