// tests/cli_test.cc

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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctdnn/cli.h"
#include "ctdnn/data.h"
#include "ctdnn/errors.h"
#include "ctdnn/eval.h"
#include "doctest.h"
#include "test_util.h"

using namespace ctdnn;
using ctdnn::testing::TempDir;
using ctdnn::testing::slurp;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const std::string &path, const std::string &text) {
  std::ofstream(path) << text;
}

const char *kSmallSpec =
    "[synth]\nn_speakers = 5\nutts_per_speaker = 5\nframes_per_utt = 40\n"
    "dim = 5\nheldout_speakers = 2\nseed = 3\n";
const char *kSmallArch =
    "ctd(-2:2,-1:1)x6 | ctd(-1:1)*2x6 | sc | fc(12) | fc(@classes) | softmax";

}  // namespace

TEST_CASE("config defaults and validation") {
  RunConfig c;
  CHECK(c.train.lr == 1e-4);
  std::istringstream ok("[train]\nlr = 0.001\nbatch_size = 8\n[eval]\nshrinkage = 0.5\n");
  RunConfig parsed = read_run_config(ok);
  CHECK(parsed.train.lr == 0.001);
  CHECK(parsed.train.batch_size == 8);
  CHECK(parsed.shrinkage == std::optional<double>(0.5));
  std::istringstream unknown("[train]\nlearning_rate = 0.1\n");
  CHECK_THROWS_AS(read_run_config(unknown), ValidationError);
  std::istringstream bad_section("[optimizer]\nlr = 0.1\n");
  CHECK_THROWS_AS(read_run_config(bad_section), ValidationError);
  std::istringstream bad_value("[train]\npatience = 0\n");
  CHECK_THROWS_AS(read_run_config(bad_value), ValidationError);
  std::istringstream not_number("[features]\nn_coeffs = many\n");
  CHECK_THROWS_AS(read_run_config(not_number), ValidationError);
}

TEST_CASE("usage errors exit with 2") {
  TempDir dir("cli_usage");
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"train"}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  REQUIRE(run({"synth", "--spec-file", dir.str("none.ini"), "--out-dir", dir.str("c")}).code ==
          kExitUsage);
  write_text(dir.str("spec.ini"), kSmallSpec);
  REQUIRE(run({"synth", "--spec-file", dir.str("spec.ini"), "--out-dir", dir.str("c")}).code ==
          kExitOk);
  Run r = run({"train", "--manifest", dir.str("c/train.tsv"), "--arch",
               "ctd(-2:2)x8 | softmux", "--model-out", dir.str("m.bin")});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("position 14") != std::string::npos);
  write_text(dir.str("bad.ini"), "[train]\nbatchsize = 4\n");
  r = run({"train", "--manifest", dir.str("c/train.tsv"), "--config", dir.str("bad.ini"),
           "--model-out", dir.str("m.bin")});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("train.batchsize") != std::string::npos);
  // Missing data is a runtime error.
  r = run({"train", "--manifest", dir.str("missing.tsv"), "--model-out", dir.str("m.bin")});
  CHECK(r.code == kExitRuntime);
}

TEST_CASE("train is deterministic and writes the documented curve") {
  TempDir dir("cli_train");
  write_text(dir.str("spec.ini"), kSmallSpec);
  REQUIRE(run({"synth", "--spec-file", dir.str("spec.ini"), "--out-dir", dir.str("c")}).code ==
          kExitOk);
  std::vector<std::string> args{"train", "--manifest", dir.str("c/train.tsv"),
                                "--val-manifest", dir.str("c/val.tsv"),
                                "--arch", "ctdnn-paper", "--width", "8",
                                "--batch-size", "1", "--max-epochs", "6",
                                "--lr", "0.003", "--seed", "5"};
  auto a = args, b = args;
  for (auto *v : {&a, &b}) {
    const std::string tag = v == &a ? "a" : "b";
    v->insert(v->end(), {"--model-out", dir.str(tag + ".bin"), "--curve-out",
                         dir.str(tag + ".csv")});
  }
  Run ra = run(a), rb = run(b);
  REQUIRE(ra.code == kExitOk);
  REQUIRE(rb.code == kExitOk);
  CHECK(ra.out == rb.out);
  CHECK(ra.out.find("converged_epoch ") != std::string::npos);
  CHECK(ra.out.find("best_train_acc ") != std::string::npos);
  CHECK(slurp(dir.str("a.csv")) == slurp(dir.str("b.csv")));
  CHECK(slurp(dir.str("a.bin")) == slurp(dir.str("b.bin")));
  std::istringstream csv(slurp(dir.str("a.csv")));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "epoch,step,train_loss,train_acc,val_loss,val_acc");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6 * 9 / 10);  // 9 batches per epoch, a row every 10 batches

  Run id = run({"identify", "--model", dir.str("a.bin"), "--manifest", dir.str("c/test.tsv")});
  REQUIRE(id.code == kExitOk);
  const double acc = std::stod(id.out);
  CHECK((acc >= 0.0 && acc <= 1.0));
  CHECK(id.out.size() == 7);  // "x.xxxx\n"
}

TEST_CASE("verification chain") {
  TempDir dir("cli_chain");
  write_text(dir.str("spec.ini"), kSmallSpec);
  REQUIRE(run({"synth", "--spec-file", dir.str("spec.ini"), "--out-dir", dir.str("c")}).code ==
          kExitOk);
  REQUIRE(run({"train", "--manifest", dir.str("c/train.tsv"), "--arch", kSmallArch,
               "--max-epochs", "5", "--lr", "0.01", "--model-out", dir.str("m.bin")})
              .code == kExitOk);
  auto chain = [&](const std::string &tag) {
    const auto f = [&](const std::string &leaf) { return dir.str(tag + leaf); };
    REQUIRE(run({"embed", "--model", dir.str("m.bin"), "--manifest", dir.str("c/train.tsv"),
                 "--out", f("train.emb")}).code == kExitOk);
    REQUIRE(run({"embed", "--model", dir.str("m.bin"), "--manifest",
                 dir.str("c/heldout.tsv"), "--out", f("held.emb")}).code == kExitOk);
    Run l = run({"lda", "--embeddings", f("train.emb"), "--dim", "50", "--out", f("lda")});
    REQUIRE(l.code == kExitOk);
    CHECK(l.err.find("capped at 2") != std::string::npos);
    REQUIRE(run({"trials", "--manifest", dir.str("c/heldout.tsv"), "--out", f("trials"),
                 "--mode", "exhaustive"}).code == kExitOk);
    REQUIRE(run({"score", "--trials", f("trials"), "--embeddings", f("held.emb"), "--lda",
                 f("lda"), "--out", f("scores")}).code == kExitOk);
    Run e = run({"eer", "--scores", f("scores"), "--trials", f("trials")});
    REQUIRE(e.code == kExitOk);
    return e.out;
  };
  const std::string first = chain("a"), second = chain("b");
  CHECK(first == second);
  const double eer = std::stod(first);
  CHECK((eer >= 0.0 && eer <= 0.5));
  for (const char *leaf : {"train.emb", "held.emb", "lda", "trials", "scores"})
    CHECK(slurp(dir.str(std::string("a") + leaf)) == slurp(dir.str(std::string("b") + leaf)));

  // Scores follow the trial order, one line each.
  const auto trials = read_trials(dir.str("atrials"));
  const auto scores = read_scores(dir.str("ascores"));
  REQUIRE(scores.size() == trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    CHECK(scores[i].trial.enroll_utt == trials[i].enroll_utt);
    CHECK(scores[i].trial.test_utt == trials[i].test_utt);
  }
}

TEST_CASE("eer command on a separated score file") {
  TempDir dir("cli_eer");
  write_text(dir.str("trials"), "a\tb\t1\na\tc\t0\nb\tc\t0\nd\te\t1\n");
  write_text(dir.str("scores"), "a\tb\t0.900000\na\tc\t0.100000\nb\tc\t-0.200000\nd\te\t0.800000\n");
  Run r = run({"eer", "--scores", dir.str("scores"), "--trials", dir.str("trials")});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "0.0000\n");
  write_text(dir.str("short"), "a\tb\t0.9\n");
  CHECK(run({"eer", "--scores", dir.str("short"), "--trials", dir.str("trials")}).code ==
        kExitRuntime);
}

TEST_CASE("featurize") {
  TempDir dir("cli_feat");
  std::filesystem::create_directories(dir.path() / "empty");
  Run r = run({"featurize", "--wav-dir", dir.str("empty"), "--manifest-out",
               dir.str("o1/manifest.tsv")});
  CHECK(r.code == kExitOk);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(slurp(dir.str("o1/manifest.tsv")).empty());

  std::filesystem::create_directories(dir.path() / "wavs/alice");
  std::vector<double> tone(16000);
  for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = 0.3 * std::sin(0.05 * i);
  write_wav(dir.str("wavs/alice/hello.wav"), tone, 16000);
  write_text(dir.str("config.ini"), "[features]\nn_coeffs = 13\nlength = 98\n");
  r = run({"featurize", "--wav-dir", dir.str("wavs"), "--manifest-out",
           dir.str("o2/manifest.tsv"), "--config", dir.str("config.ini")});
  REQUIRE(r.code == kExitOk);
  Manifest m = read_manifest(dir.str("o2/manifest.tsv"));
  REQUIRE(m.entries.size() == 1);
  CHECK(m.entries[0].speaker_id == "alice");
  Matrix f = read_features(m.resolve(m.entries[0]).string());
  CHECK(f.rows() == 98);
  CHECK(f.cols() == 13);

  write_text(dir.str("wavs/notes.txt"), "not audio");
  r = run({"featurize", "--wav-dir", dir.str("wavs"), "--manifest-out",
           dir.str("o3/manifest.tsv"), "--config", dir.str("config.ini")});
  CHECK(r.code == kExitOk);
  CHECK(r.err.find("notes.txt") != std::string::npos);
  r = run({"featurize", "--wav-dir", dir.str("wavs"), "--manifest-out",
           dir.str("o4/manifest.tsv"), "--config", dir.str("config.ini"), "--strict"});
  CHECK(r.code != kExitOk);
  CHECK(read_manifest(dir.str("o4/manifest.tsv")).entries.size() == 1);
}
