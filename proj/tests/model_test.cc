// tests/model_test.cc

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

#include <cmath>
#include <sstream>

#include "ctdnn/arch.h"
#include "ctdnn/errors.h"
#include "ctdnn/model.h"
#include "doctest.h"
#include "gradient_cases.h"
#include "test_util.h"

using namespace ctdnn;
using ctdnn::testing::random_matrix;

namespace {

const char *kCtdnnDsl =
    "ctd(-4:4,-2:2,-1:1)x64 | ctd(-1:1)*3x64 | sc | fc(128) | fc(@classes) | softmax";
const char *kTdnnDsl =
    "td(-2:2)x64 | td(-1:2)x64 | td(-3:3)x64 | td(-7:2)x64 | sp | fc(128) | "
    "fc(@classes) | softmax";

}  // namespace

TEST_CASE("parse_arch: CTDNN column") {
  ModelConfig c = parse_arch(kCtdnnDsl);
  REQUIRE(c.layers.size() == 6);
  CHECK(c.layers[0].kind == LayerKind::kCtd);
  CHECK(c.layers[0].contexts == std::vector<ContextWindow>{{-4, 4}, {-2, 2}, {-1, 1}});
  CHECK(c.layers[1].kind == LayerKind::kCtd);
  CHECK(c.layers[1].replicate == 3);
  CHECK(c.layers[1].unit_contexts() ==
        std::vector<ContextWindow>{{-1, 1}, {-1, 1}, {-1, 1}});
  CHECK(c.layers[2].kind == LayerKind::kSc);
  CHECK(c.embed_tap == 2);
  CHECK(c.layers[3].width == 128);
  CHECK(c.layers[4].classes);
  CHECK(c.layers[5].kind == LayerKind::kSoftmax);
  CHECK(parse_arch("ctdnn-paper", 64) == c);
}

TEST_CASE("parse_arch: TDNN column") {
  ModelConfig c = parse_arch(kTdnnDsl);
  REQUIRE(c.layers.size() == 8);
  CHECK(c.layers[3].contexts[0] == ContextWindow{-7, 2});
  CHECK(c.embed_tap == 4);
  CHECK(parse_arch("tdnn-paper", 64) == c);
  CHECK(time_delay_depth(c) == 4);
}

TEST_CASE("parse_arch: errors") {
  try {
    parse_arch("sp | fc(3)");
    FAIL("expected SemanticError");
  } catch (const SemanticError &e) {
    CHECK(std::string(e.what()).rfind("pool-position", 0) == 0);
  }
  try {
    parse_arch("td(-1:1)x8 | sp | fc(3) | softmux");
    FAIL("expected ParseError");
  } catch (const ParseError &e) {
    CHECK(e.position() == 26);
  }
  CHECK_THROWS_AS(parse_arch("td(-1:1x8 | sp | fc(3) | softmax"), ParseError);
  CHECK_THROWS_AS(parse_arch("td(-1:1)x8 | sc | fc(3) | softmax"), SemanticError);
  CHECK_THROWS_AS(parse_arch("ctd(-1:1,0:1)x8 | sp | fc(3) | softmax"), SemanticError);
  CHECK_THROWS_AS(parse_arch("ctd(-1:1,0:1)x8 | ctd(-1:1)*3x8 | sc | fc(3) | softmax"),
                  SemanticError);
  CHECK_THROWS_AS(parse_arch("ctd(-1:1,0:1)x8 | td(-1:1)x8 | sp | fc(3) | softmax"),
                  SemanticError);
  CHECK_THROWS_AS(parse_arch("td(-1:1)x8 | sp | fc(3)"), SemanticError);
  CHECK_THROWS_AS(parse_arch("td(-1:1)x8 | sp | fc(@classes) | fc(3) | softmax"),
                  SemanticError);
  CHECK_THROWS_AS(parse_arch("td(7:2)x8 | sp | fc(3) | softmax"), SemanticError);
  CHECK_THROWS_AS(with_dims(parse_arch("td(-1:1)x8 | sp | fc(3) | softmax"), 4, 5),
                  SemanticError);
}

TEST_CASE("to_dsl round-trips through parse_arch") {
  for (const char *text :
       {kCtdnnDsl, kTdnnDsl, "ctd(0:0)x1 | sc | fc(2) | softmax",
        "td(-1:1)x4 | ctd(-2:0,0:3)x5 | ctd(-1:1,-2:2)x2 | sc | fc(7) | fc(9) | "
        "fc(@classes) | softmax"}) {
    ModelConfig c = parse_arch(text);
    CHECK(parse_arch(to_dsl(c)) == c);
  }
  CHECK(to_dsl(parse_arch(kCtdnnDsl)) == kCtdnnDsl);
}

TEST_CASE("param_count: single td layer and the preset ledgers") {
  // H x span.D + H, with the input batch norm removed from the ledger.
  ModelConfig one = with_dims(parse_arch("td(-1:1)x2 | sp | fc(2) | softmax"), 3, 2);
  const std::uint64_t bn = 2 * 3, head = 2 * 4 + 2;
  CHECK(param_count(one) - bn - head == 20);

  // Hand ledger at H=64, D=13, C=10 (BN gamma+beta on every time-delay input).
  //   TDNN : td1 26+4160+64, td2 128+16384+64, td3 128+28672+64,
  //          td4 128+40960+64, fc 128*128+128, classifier 10*128+10
  //   CTDNN: ctd1 26 + (7488+64) + (4160+64) + (2496+64),
  //          ctd2 3*(128+12288+64), fc 128*384+128, classifier 10*128+10
  ModelConfig tdnn = with_dims(parse_arch("tdnn-paper", 64), 13, 10);
  ModelConfig ctdnn = with_dims(parse_arch("ctdnn-paper", 64), 13, 10);
  CHECK(param_count(tdnn) == 108644);
  CHECK(param_count(ctdnn) == 102372);
  CHECK(build_model(tdnn, 1).num_parameters() == 108644);
  CHECK(build_model(ctdnn, 1).num_parameters() == 102372);
}

TEST_CASE("param_count is additive over layers") {
  ModelConfig a = with_dims(parse_arch("td(-1:1)x4 | sp | fc(3) | softmax"), 5, 3);
  ModelConfig b =
      with_dims(parse_arch("td(-1:1)x4 | td(-2:2)x6 | sp | fc(3) | softmax"), 5, 3);
  // Extra layer: BN on 4 inputs, 6 x 5*4 weights, 6 biases; head grows 2*4 -> 2*6.
  CHECK(param_count(b) - param_count(a) == (8 + 120 + 6) + (3 * 12 - 3 * 8));
}

TEST_CASE("build_model: determinism and shapes") {
  ModelConfig c = with_dims(parse_arch("ctdnn-paper", 8), 5, 4);
  Model a = build_model(c, 42), b = build_model(c, 42), d = build_model(c, 43);
  auto pa = std::as_const(a).parameters(), pb = std::as_const(b).parameters(),
       pd = std::as_const(d).parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(std::equal(pa[i].values.begin(), pa[i].values.end(), pb[i].values.begin()));
    differs |= !std::equal(pa[i].values.begin(), pa[i].values.end(),
                           pd[i].values.begin());
  }
  CHECK(differs);

  ModelConfig h64 = with_dims(parse_arch("ctdnn-paper", 64), 13, 10);
  CHECK(build_model(h64, 0).dense_blocks()[0].fc.in_dim() == 384);
}

TEST_CASE("forward: shapes and branch lengths") {
  Rng rng(21);
  ModelConfig c = with_dims(parse_arch("ctdnn-paper", 4), 13, 6);
  Model m = build_model(c, 3);
  Matrix x = random_matrix(rng, 300, 13);
  ForwardCache cache = forward(m, std::span(&x, 1), Mode::kInfer);
  CHECK(cache.logits[0].size() == 6);
  CHECK(cache.blocks[0].pre[0][0].rows() == 292);
  CHECK(cache.blocks[0].pre[1][0].rows() == 296);
  CHECK(cache.blocks[0].pre[2][0].rows() == 298);
  CHECK(cache.blocks[1].pre[0][0].rows() == 290);
  CHECK(cache.blocks[1].pre[1][0].rows() == 294);
  CHECK(cache.blocks[1].pre[2][0].rows() == 296);
  CHECK(min_sequence_length(c) == 11);

  Matrix short_x = random_matrix(rng, 10, 13);
  try {
    forward(m, std::span(&short_x, 1), Mode::kInfer);
    FAIL("expected SequenceTooShortError");
  } catch (const SequenceTooShortError &e) {
    CHECK(std::string(e.what()).find("time-delay layer 1") != std::string::npos);
  }
}

TEST_CASE("forward: zero parameters give uniform logits") {
  ModelConfig c = with_dims(parse_arch("tdnn-paper", 4), 3, 5);
  Model m = build_model(c, 1);
  for (auto &p : m.parameters()) std::fill(p.values.begin(), p.values.end(), 0.0);
  Rng rng(22);
  Matrix x = random_matrix(rng, 40, 3);
  Vector logits = predict(m, x);
  for (double v : logits) CHECK(v == logits[0]);
  CHECK(softmax_ce(logits, 2).loss == doctest::Approx(std::log(5.0)));
}

TEST_CASE("backward: zero upstream, cache checks") {
  Rng rng(23);
  ModelConfig c = with_dims(parse_arch("ctdnn-paper", 3), 4, 3);
  Model m = build_model(c, 5);
  std::vector<Matrix> batch{random_matrix(rng, 20, 4), random_matrix(rng, 25, 4)};
  ForwardCache cache = forward(m, batch, Mode::kTrain);
  std::vector<Vector> zero(2, Vector(3, 0.0));
  for (const Vector &g : backward(m, cache, zero))
    for (double v : g) CHECK(v == 0.0);

  Model other = m;
  CHECK_THROWS_AS(backward(other, cache, zero), CacheError);
  m.parameters()[0].values[0] += 1.0;
  CHECK_THROWS_AS(backward(m, cache, zero), CacheError);
}

TEST_CASE("backward: tiny CTDNN matches finite differences") {
  Rng rng(24);
  for (int i = 0; i < 3; ++i) CHECK(testing::tiny_ctdnn_gradient_case(rng) < 1e-4);
}

TEST_CASE("backward: first-layer bias gradients count window positions") {
  // With all-ones upstream on every branch, a unit's bias gradient is the
  // number of positions it scanned: T - 8, T - 4, T - 2 for [-4,4], [-2,2], [-1,1].
  Rng rng(25);
  CrossedTimeDelayLayer layer;
  for (auto [l, r] : {std::pair{-4, 4}, {-2, 2}, {-1, 1}})
    layer.units.push_back(testing::random_unit(rng, ContextWindow::make(l, r), 3, 2));
  Matrix x = random_matrix(rng, 30, 3);
  auto ys = ctd_forward(layer, std::span(&x, 1));
  std::vector<Matrix> ones;
  for (const Matrix &y : ys) ones.emplace_back(y.rows(), y.cols(), 1.0);
  CtdGrads g = ctd_backward(layer, std::span(&x, 1), ones);
  CHECK(g.units[0].bias == Vector{22, 22});
  CHECK(g.units[1].bias == Vector{26, 26});
  CHECK(g.units[2].bias == Vector{28, 28});
}

TEST_CASE("embed: tap length and agreement with forward") {
  CHECK(embedding_dim(with_dims(parse_arch("ctdnn-paper", 512), 30, 2)) == 3072);
  CHECK(embedding_dim(with_dims(parse_arch("tdnn-paper", 512), 30, 2)) == 1024);

  Rng rng(26);
  for (const char *preset : {"ctdnn-paper", "tdnn-paper"}) {
    ModelConfig c = with_dims(parse_arch(preset, 6), 5, 4);
    Model m = build_model(c, 9);
    Matrix x = random_matrix(rng, 40, 5);
    Vector e = embed(m, x);
    CHECK(e.size() == embedding_dim(c));
    CHECK(e == forward(m, std::span(&x, 1), Mode::kInfer).embeddings[0]);
  }
}

TEST_CASE("forward then backward round-trips on random configs") {
  Rng rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    std::string dsl;
    const std::size_t layers = 1 + rng.uniform_int(2);
    const std::size_t units = 1 + rng.uniform_int(3);
    for (std::size_t l = 0; l < layers; ++l) {
      ContextWindow ctx = testing::random_context(rng, 3);
      dsl += "ctd(" + std::to_string(ctx.left) + ":" + std::to_string(ctx.right) +
             ")*" + std::to_string(units) + "x" + std::to_string(1 + rng.uniform_int(4)) +
             " | ";
    }
    dsl += "sc | fc(5) | fc(@classes) | softmax";
    ModelConfig c = with_dims(parse_arch(dsl), 3, 3);
    Model m = build_model(c, trial);
    std::vector<Matrix> batch{
        random_matrix(rng, min_sequence_length(c) + rng.uniform_int(5), 3),
        random_matrix(rng, min_sequence_length(c) + rng.uniform_int(5), 3)};
    std::vector<int> labels{0, 2};
    BatchLoss bl = batch_loss(m, batch, labels, Mode::kTrain, true);
    auto params = std::as_const(m).parameters();
    REQUIRE(bl.grads.size() == params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
      CHECK(bl.grads[i].size() == params[i].values.size());
    CHECK(embed(m, batch[0]).size() == embedding_dim(c));
  }
}

TEST_CASE("model file round trip is bit-exact") {
  Rng rng(28);
  ModelConfig c = with_dims(parse_arch("ctdnn-paper", 4), 6, 3);
  Model m = build_model(c, 77);
  m.class_names = {"spk_a", "spk_b", "spk_c"};
  // Move the running statistics off their defaults.
  std::vector<Matrix> batch{random_matrix(rng, 30, 6), random_matrix(rng, 30, 6)};
  m.update_running_stats(forward(m, batch, Mode::kTrain));

  std::stringstream first;
  save_model(m, first);
  const std::string bytes = first.str();
  CHECK(bytes.substr(0, 4) == "CTDM");
  Model loaded = load_model(first);
  CHECK(loaded.config() == m.config());
  CHECK(loaded.seed() == 77);
  CHECK(loaded.class_names == m.class_names);
  std::stringstream second;
  save_model(loaded, second);
  CHECK(second.str() == bytes);
  CHECK(predict(loaded, batch[0]) == predict(m, batch[0]));

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_model(truncated), FormatError);
  std::stringstream bad("XTDM");
  CHECK_THROWS_AS(load_model(bad), FormatError);
  std::stringstream empty("");
  try {
    load_model(empty);
    FAIL("expected FormatError");
  } catch (const FormatError &e) {
    CHECK(e.offset() == 0);
  }
}
