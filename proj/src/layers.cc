// src/layers.cc

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

#include "ctdnn/layers.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctdnn/errors.h"

namespace ctdnn {

namespace {

std::string shape_of(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void check_unit(const TimeDelayUnit &unit) {
  if (unit.weights.rows() != unit.out_dim ||
      unit.weights.cols() != unit.ctx.span() * unit.in_dim ||
      unit.bias.size() != unit.out_dim)
    throw ShapeError("time-delay unit: weights " + unit.weights.shape_string() +
                     " / bias " + std::to_string(unit.bias.size()) +
                     " inconsistent with out_dim " +
                     std::to_string(unit.out_dim) + ", span " +
                     std::to_string(unit.ctx.span()) + ", in_dim " +
                     std::to_string(unit.in_dim));
}

}  // namespace

ContextWindow ContextWindow::make(int left, int right) {
  if (left > 0 || right < 0)
    throw SemanticError("context-window: [" + std::to_string(left) + "," +
                        std::to_string(right) +
                        "] must satisfy left <= 0 <= right");
  return ContextWindow{left, right};
}

TimeDelayUnit TimeDelayUnit::zeros(ContextWindow ctx, std::size_t in_dim,
                                   std::size_t out_dim) {
  TimeDelayUnit u;
  u.ctx = ctx;
  u.in_dim = in_dim;
  u.out_dim = out_dim;
  u.weights = Matrix(out_dim, ctx.span() * in_dim);
  u.bias.assign(out_dim, 0.0);
  return u;
}

Matrix td_forward(const TimeDelayUnit &unit, const Matrix &x) {
  check_unit(unit);
  if (x.cols() != unit.in_dim)
    throw ShapeError("td_forward: input " + x.shape_string() + " has " +
                     std::to_string(x.cols()) + " columns, unit expects " +
                     std::to_string(unit.in_dim));
  const std::size_t span = unit.ctx.span();
  if (x.rows() < span)
    throw SequenceTooShortError("td_forward: sequence of T=" +
                                std::to_string(x.rows()) +
                                " frames is shorter than context span " +
                                std::to_string(span));
  const std::size_t out_len = x.rows() - unit.ctx.shrink();
  Matrix y(out_len, unit.out_dim);
  for (std::size_t t = 0; t < out_len; ++t) {
    auto window = x.rows_flat(t, span);
    auto out = y.row(t);
    for (std::size_t h = 0; h < unit.out_dim; ++h)
      out[h] = dot(unit.weights.row(h), window) + unit.bias[h];
  }
  return y;
}

TdGrads td_backward(const TimeDelayUnit &unit, const Matrix &x,
                    const Matrix &grad_out) {
  check_unit(unit);
  const std::size_t span = unit.ctx.span();
  if (x.cols() != unit.in_dim || x.rows() < span ||
      grad_out.rows() != x.rows() - unit.ctx.shrink() ||
      grad_out.cols() != unit.out_dim)
    throw ShapeError("td_backward: input " + x.shape_string() +
                     " and upstream gradient " + grad_out.shape_string() +
                     " do not match the unit's forward output shape");
  TdGrads g{Matrix(unit.out_dim, span * unit.in_dim),
            Vector(unit.out_dim, 0.0), Matrix(x.rows(), x.cols())};
  for (std::size_t t = 0; t < grad_out.rows(); ++t) {
    auto window = x.rows_flat(t, span);
    auto grad_window = g.input.rows_flat(t, span);
    auto up = grad_out.row(t);
    for (std::size_t h = 0; h < unit.out_dim; ++h) {
      const double gh = up[h];
      if (gh == 0.0) continue;
      g.bias[h] += gh;
      axpy(gh, window, g.weights.row(h));
      axpy(gh, unit.weights.row(h), grad_window);
    }
  }
  return g;
}

std::vector<Matrix> ctd_forward(const CrossedTimeDelayLayer &layer,
                                std::span<const Matrix> inputs) {
  if (layer.units.empty())
    throw TopologyError("ctd_forward: layer has no time-delay units");
  if (inputs.size() != 1 && inputs.size() != layer.units.size())
    throw TopologyError("ctd_forward: " + std::to_string(inputs.size()) +
                        " input branches for " +
                        std::to_string(layer.units.size()) + " units");
  std::vector<Matrix> out;
  out.reserve(layer.units.size());
  for (std::size_t b = 0; b < layer.units.size(); ++b)
    out.push_back(td_forward(layer.units[b], inputs.size() == 1 ? inputs[0]
                                                                : inputs[b]));
  return out;
}

CtdGrads ctd_backward(const CrossedTimeDelayLayer &layer,
                      std::span<const Matrix> inputs,
                      std::span<const Matrix> grad_outputs) {
  if (inputs.size() != 1 && inputs.size() != layer.units.size())
    throw TopologyError("ctd_backward: " + std::to_string(inputs.size()) +
                        " input branches for " +
                        std::to_string(layer.units.size()) + " units");
  if (grad_outputs.size() != layer.units.size())
    throw TopologyError("ctd_backward: " + std::to_string(grad_outputs.size()) +
                        " upstream gradients for " +
                        std::to_string(layer.units.size()) + " units");
  CtdGrads g;
  const bool fan_out = inputs.size() == 1;
  if (fan_out) g.inputs.emplace_back(inputs[0].rows(), inputs[0].cols());
  for (std::size_t b = 0; b < layer.units.size(); ++b) {
    const Matrix &in = fan_out ? inputs[0] : inputs[b];
    TdGrads ug = td_backward(layer.units[b], in, grad_outputs[b]);
    if (fan_out)
      axpy(1.0, ug.input.values(), g.inputs[0].values());
    else
      g.inputs.push_back(std::move(ug.input));
    ug.input = Matrix();
    g.units.push_back(std::move(ug));
  }
  return g;
}

Vector sp_forward(const Matrix &x) {
  if (x.rows() == 0) throw EmptyInputError("sp_forward: empty sequence");
  ColumnStats s = rowwise_mean_std(x);
  Vector out = std::move(s.mean);
  out.insert(out.end(), s.std.begin(), s.std.end());
  return out;
}

Matrix sp_backward(const Matrix &x, std::span<const double> grad) {
  if (x.rows() == 0) throw EmptyInputError("sp_backward: empty sequence");
  const std::size_t dim = x.cols();
  if (grad.size() != 2 * dim)
    throw ShapeError("sp_backward: gradient length " +
                     std::to_string(grad.size()) + " for input " +
                     x.shape_string());
  ColumnStats s = rowwise_mean_std(x);
  const double inv_t = 1.0 / static_cast<double>(x.rows());
  // d std / d x_t = (x_t - mean) / (T std); zero when the column is constant.
  Vector std_scale(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j)
    if (s.std[j] > 0.0) std_scale[j] = grad[dim + j] * inv_t / s.std[j];
  Matrix gx(x.rows(), dim);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    auto xr = x.row(t);
    auto gr = gx.row(t);
    for (std::size_t j = 0; j < dim; ++j)
      gr[j] = grad[j] * inv_t + std_scale[j] * (xr[j] - s.mean[j]);
  }
  return gx;
}

Vector sc_forward(std::span<const Matrix> branches) {
  if (branches.empty()) throw EmptyInputError("sc_forward: no branches");
  Vector out;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    if (branches[b].rows() == 0 || branches[b].cols() == 0)
      throw EmptyInputError("sc_forward: branch " + std::to_string(b) +
                            " is empty");
    Vector s = sp_forward(branches[b]);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

std::vector<Matrix> sc_backward(std::span<const Matrix> branches,
                                std::span<const double> grad) {
  std::size_t expected = 0;
  for (const Matrix &b : branches) expected += 2 * b.cols();
  if (grad.size() != expected)
    throw ShapeError("sc_backward: gradient length " +
                     std::to_string(grad.size()) + ", expected " +
                     std::to_string(expected));
  std::vector<Matrix> out;
  std::size_t offset = 0;
  for (const Matrix &b : branches) {
    out.push_back(sp_backward(b, grad.subspan(offset, 2 * b.cols())));
    offset += 2 * b.cols();
  }
  return out;
}

Vector fc_forward(const FullyConnected &fc, std::span<const double> x) {
  if (x.size() != fc.in_dim() || fc.bias.size() != fc.out_dim())
    throw ShapeError("fc_forward: weights " + fc.weights.shape_string() +
                     ", bias " + std::to_string(fc.bias.size()) + ", input " +
                     std::to_string(x.size()));
  Vector y(fc.out_dim());
  for (std::size_t o = 0; o < y.size(); ++o)
    y[o] = dot(fc.weights.row(o), x) + fc.bias[o];
  return y;
}

FcGrads fc_backward(const FullyConnected &fc, std::span<const double> x,
                    std::span<const double> grad_y) {
  if (x.size() != fc.in_dim() || grad_y.size() != fc.out_dim())
    throw ShapeError("fc_backward: weights " + fc.weights.shape_string() +
                     ", input " + std::to_string(x.size()) +
                     ", upstream gradient " + std::to_string(grad_y.size()));
  FcGrads g{Matrix(fc.out_dim(), fc.in_dim()), Vector(grad_y.begin(), grad_y.end()),
            Vector(fc.in_dim(), 0.0)};
  for (std::size_t o = 0; o < fc.out_dim(); ++o) {
    if (grad_y[o] == 0.0) continue;
    axpy(grad_y[o], x, g.weights.row(o));
    axpy(grad_y[o], fc.weights.row(o), g.input);
  }
  return g;
}

BatchNormState BatchNormState::identity(std::size_t dim) {
  BatchNormState s;
  s.gamma.assign(dim, 1.0);
  s.beta.assign(dim, 0.0);
  s.running_mean.assign(dim, 0.0);
  s.running_var.assign(dim, 1.0);
  return s;
}

BnForward bn_forward(const BatchNormState &state, std::span<const Matrix> batch,
                     Mode mode) {
  const std::size_t dim = state.dim();
  if (state.beta.size() != dim || state.running_mean.size() != dim ||
      state.running_var.size() != dim)
    throw ShapeError("bn_forward: parameter vectors disagree in length");
  BnForward out;
  BnCache &c = out.cache;
  c.mode = mode;
  for (const Matrix &x : batch) {
    if (x.cols() != dim)
      throw ShapeError("bn_forward: sequence " + x.shape_string() +
                       " for a " + std::to_string(dim) + "-feature layer");
    c.count += x.rows();
  }
  if (mode == Mode::kTrain) {
    if (c.count < 2)
      throw InsufficientStatisticsError(
          "bn_forward: train-mode batch has " + std::to_string(c.count) +
          " frames in total; at least 2 are needed");
    c.mean.assign(dim, 0.0);
    c.var.assign(dim, 0.0);
    for (const Matrix &x : batch)
      for (std::size_t t = 0; t < x.rows(); ++t) axpy(1.0, x.row(t), c.mean);
    const double inv_n = 1.0 / static_cast<double>(c.count);
    for (double &m : c.mean) m *= inv_n;
    for (const Matrix &x : batch)
      for (std::size_t t = 0; t < x.rows(); ++t) {
        auto r = x.row(t);
        for (std::size_t j = 0; j < dim; ++j) {
          double d = r[j] - c.mean[j];
          c.var[j] += d * d;
        }
      }
    for (double &v : c.var) v *= inv_n;
  } else {
    c.mean = state.running_mean;
    c.var = state.running_var;
  }
  c.inv_std.resize(dim);
  for (std::size_t j = 0; j < dim; ++j)
    c.inv_std[j] = 1.0 / std::sqrt(c.var[j] + state.epsilon);

  out.outputs.reserve(batch.size());
  c.normalized.reserve(batch.size());
  for (const Matrix &x : batch) {
    Matrix xhat(x.rows(), dim), y(x.rows(), dim);
    for (std::size_t t = 0; t < x.rows(); ++t) {
      auto xr = x.row(t);
      auto hr = xhat.row(t);
      auto yr = y.row(t);
      for (std::size_t j = 0; j < dim; ++j) {
        hr[j] = (xr[j] - c.mean[j]) * c.inv_std[j];
        yr[j] = state.gamma[j] * hr[j] + state.beta[j];
      }
    }
    c.normalized.push_back(std::move(xhat));
    out.outputs.push_back(std::move(y));
  }
  return out;
}

void bn_update_running(BatchNormState &state, const BnCache &cache) {
  if (cache.mode != Mode::kTrain) return;
  const double m = state.momentum;
  // Running variance uses the unbiased estimate.
  const double n = static_cast<double>(cache.count);
  const double unbias = n / (n - 1.0);
  for (std::size_t j = 0; j < state.dim(); ++j) {
    state.running_mean[j] = (1.0 - m) * state.running_mean[j] + m * cache.mean[j];
    state.running_var[j] =
        (1.0 - m) * state.running_var[j] + m * cache.var[j] * unbias;
  }
}

BnGrads bn_backward(const BatchNormState &state, const BnCache &cache,
                    std::span<const Matrix> grad_outputs) {
  const std::size_t dim = state.dim();
  if (grad_outputs.size() != cache.normalized.size())
    throw ShapeError("bn_backward: " + std::to_string(grad_outputs.size()) +
                     " upstream gradients for a batch of " +
                     std::to_string(cache.normalized.size()));
  BnGrads g{Vector(dim, 0.0), Vector(dim, 0.0), {}};
  for (std::size_t i = 0; i < grad_outputs.size(); ++i) {
    const Matrix &gy = grad_outputs[i];
    const Matrix &xhat = cache.normalized[i];
    if (gy.rows() != xhat.rows() || gy.cols() != dim)
      throw ShapeError("bn_backward: upstream gradient " + gy.shape_string() +
                       " for sequence " + xhat.shape_string());
    for (std::size_t t = 0; t < gy.rows(); ++t) {
      auto gr = gy.row(t);
      auto hr = xhat.row(t);
      for (std::size_t j = 0; j < dim; ++j) {
        g.beta[j] += gr[j];
        g.gamma[j] += gr[j] * hr[j];
      }
    }
  }
  const double n = static_cast<double>(cache.count);
  for (std::size_t i = 0; i < grad_outputs.size(); ++i) {
    const Matrix &gy = grad_outputs[i];
    const Matrix &xhat = cache.normalized[i];
    Matrix gx(gy.rows(), dim);
    for (std::size_t t = 0; t < gy.rows(); ++t) {
      auto gr = gy.row(t);
      auto hr = xhat.row(t);
      auto out = gx.row(t);
      for (std::size_t j = 0; j < dim; ++j) {
        const double scale = state.gamma[j] * cache.inv_std[j];
        if (cache.mode == Mode::kTrain)
          out[j] = scale * (gr[j] - (g.beta[j] + hr[j] * g.gamma[j]) / n);
        else
          out[j] = scale * gr[j];
      }
    }
    g.inputs.push_back(std::move(gx));
  }
  return g;
}

Matrix relu(const Matrix &x) {
  Matrix y = x;
  for (double &v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix &pre_activation, const Matrix &grad) {
  if (pre_activation.rows() != grad.rows() || pre_activation.cols() != grad.cols())
    throw ShapeError("relu_backward: activation " +
                     pre_activation.shape_string() + " vs gradient " +
                     grad.shape_string());
  Matrix g = grad;
  auto pre = pre_activation.values();
  auto gv = g.values();
  for (std::size_t i = 0; i < gv.size(); ++i)
    if (!(pre[i] > 0.0)) gv[i] = 0.0;
  return g;
}

Vector relu(std::span<const double> x) {
  Vector y(x.begin(), x.end());
  for (double &v : y) v = v > 0.0 ? v : 0.0;
  return y;
}

Vector relu_backward(std::span<const double> pre_activation,
                     std::span<const double> grad) {
  if (pre_activation.size() != grad.size())
    throw ShapeError("relu_backward: length " +
                     std::to_string(pre_activation.size()) + " vs " +
                     std::to_string(grad.size()));
  Vector g(grad.begin(), grad.end());
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(pre_activation[i] > 0.0)) g[i] = 0.0;
  return g;
}

SoftmaxCe softmax_ce(std::span<const double> logits, int label) {
  const std::size_t k = logits.size();
  if (k < 2)
    throw ShapeError("softmax_ce: need at least 2 classes, got " +
                     shape_of(1, k));
  if (label < 0 || static_cast<std::size_t>(label) >= k)
    throw LabelError("softmax_ce: label " + std::to_string(label) +
                     " outside [0, " + std::to_string(k) + ")");
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  SoftmaxCe r;
  r.probs.resize(k);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    r.probs[i] = std::exp(logits[i] - max_logit);
    z += r.probs[i];
  }
  for (double &p : r.probs) p /= z;
  r.loss = -(logits[label] - max_logit - std::log(z));
  r.grad = r.probs;
  r.grad[label] -= 1.0;
  return r;
}

}  // namespace ctdnn
