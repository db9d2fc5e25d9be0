// src/train.cc

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

#include "ctdnn/train.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "ctdnn/errors.h"
#include "ctdnn/rng.h"

namespace ctdnn {

AdamState AdamState::for_model(const Model &model, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = model.zero_gradients();
  s.v = s.m;
  return s;
}

void adam_step(AdamState &state, const std::vector<ParamView> &params,
               const Gradients &grads) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw ShapeError("adam_step: " + std::to_string(grads.size()) +
                     " gradient blocks, " + std::to_string(params.size()) +
                     " parameter blocks, " + std::to_string(state.m.size()) +
                     " moment blocks");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k].values.size() ||
        state.m[k].size() != params[k].values.size())
      throw ShapeError("adam_step: size mismatch in " + params[k].name);
    if (!all_finite(grads[k]))
      throw DivergenceError("non-finite gradient in " + params[k].name);
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Vector &m = state.m[k];
    Vector &v = state.v[k];
    const Vector &g = grads[k];
    std::span<double> p = params[k].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw ValidationError("train.lr must be > 0");
  if (max_epochs < 1) throw ValidationError("train.max_epochs must be >= 1");
  if (patience < 1) throw ValidationError("train.patience must be >= 1");
  if (!(min_delta >= 0.0)) throw ValidationError("train.min_delta must be >= 0");
  if (eval_every < 1) throw ValidationError("train.eval_every must be >= 1");
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::uint64_t seed,
                                                   std::uint64_t epoch) {
  if (batch_size < 1) throw ValidationError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, epoch));
  rng.shuffle(std::span(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size)
    batches.emplace_back(order.begin() + i,
                         order.begin() + std::min(n, i + batch_size));
  return batches;
}

Evaluation evaluate(const Model &model, const LabeledSet &set,
                    std::size_t chunk) {
  if (set.empty()) throw EmptyInputError("evaluate: empty set");
  if (set.labels.size() != set.inputs.size())
    throw ShapeError("evaluate: labels and inputs differ in length");
  chunk = std::max<std::size_t>(chunk, 1);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); i += chunk) {
    const std::size_t n = std::min(chunk, set.size() - i);
    BatchLoss bl = batch_loss(model, std::span(set.inputs).subspan(i, n),
                              std::span(set.labels).subspan(i, n),
                              Mode::kInfer, false);
    loss += bl.loss * static_cast<double>(n);
    correct += bl.correct;
  }
  const double total = static_cast<double>(set.size());
  return {loss / total, static_cast<double>(correct) / total};
}

FitResult fit(Model &model, const LabeledSet &train, const LabeledSet &val,
              const TrainConfig &config) {
  if (config.lr == 0.0) {
    TrainConfig probe = config;
    probe.lr = 1.0;
    probe.validate();
  } else {
    config.validate();
  }
  if (train.empty()) throw EmptyInputError("fit: empty training set");
  if (train.labels.size() != train.inputs.size())
    throw ShapeError("fit: labels and inputs differ in length");
  for (int label : train.labels)
    if (label < 0 || label >= model.config().num_classes)
      throw LabelError("fit: label " + std::to_string(label) + " outside [0, " +
                       std::to_string(model.config().num_classes) + ")");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  AdamState adam = AdamState::for_model(model, config.lr);
  FitResult result;
  Model best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::size_t step = 0;
  double row_loss = 0.0;
  std::size_t row_correct = 0, row_count = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t epoch_correct = 0;
    for (const auto &idx : make_batches(train.size(), config.batch_size,
                                        config.seed, epoch)) {
      std::vector<Matrix> batch;
      std::vector<int> labels;
      for (std::size_t i : idx) {
        batch.push_back(train.inputs[i]);
        labels.push_back(train.labels[i]);
      }
      ForwardCache cache;
      BatchLoss bl = batch_loss(model, batch, labels, Mode::kTrain, true, &cache);
      if (!std::isfinite(bl.loss))
        throw DivergenceError("non-finite training loss at epoch " +
                              std::to_string(epoch) + ", step " +
                              std::to_string(step + 1));
      adam_step(adam, model.parameters(), bl.grads);
      model.update_running_stats(cache);
      ++step;

      const double n = static_cast<double>(idx.size());
      epoch_loss += bl.loss * n;
      epoch_correct += bl.correct;
      row_loss += bl.loss * n;
      row_correct += bl.correct;
      row_count += idx.size();
      if (step % config.eval_every == 0) {
        CurveRow row{epoch, step, row_loss / static_cast<double>(row_count),
                     static_cast<double>(row_correct) / static_cast<double>(row_count),
                     nan, nan};
        if (!val.empty()) {
          Evaluation e = evaluate(model, val, config.batch_size);
          row.val_loss = e.loss;
          row.val_acc = e.accuracy;
        }
        result.curve.rows.push_back(row);
        row_loss = 0.0;
        row_correct = row_count = 0;
      }
    }

    const double total = static_cast<double>(train.size());
    EpochSummary summary{epoch, epoch_loss / total,
                         static_cast<double>(epoch_correct) / total, nan, nan};
    if (!val.empty()) {
      Evaluation e = evaluate(model, val, config.batch_size);
      summary.val_loss = e.loss;
      summary.val_acc = e.accuracy;
    }
    result.curve.epochs.push_back(summary);
    result.epochs_run = epoch;

    const double monitored = val.empty() ? summary.train_loss : summary.val_loss;
    if (!std::isfinite(monitored))
      throw DivergenceError("non-finite monitored loss at epoch " +
                            std::to_string(epoch));
    if (monitored < best_loss - config.min_delta) {
      best_loss = monitored;
      result.best_epoch = epoch;
      best = model;
      stale = 0;
    } else if (++stale > config.patience) {
      break;
    }
  }
  model = std::move(best);
  return result;
}

std::optional<std::size_t> converged_epoch(const LearningCurve &curve,
                                           double threshold_acc) {
  for (const EpochSummary &e : curve.epochs)
    if (e.train_acc >= threshold_acc) return e.epoch;
  return std::nullopt;
}

void write_curve(const LearningCurve &curve, std::ostream &out) {
  out << "epoch,step,train_loss,train_acc,val_loss,val_acc\n";
  char buf[256];
  for (const CurveRow &r : curve.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch,
                  r.step, r.train_loss, r.train_acc, r.val_loss, r.val_acc);
    out << buf;
  }
}

void write_curve(const LearningCurve &curve, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_curve(curve, out);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace ctdnn
