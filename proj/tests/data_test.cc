// tests/data_test.cc

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
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "ctdnn/data.h"
#include "ctdnn/errors.h"
#include "ctdnn/layers.h"
#include "doctest.h"
#include "test_util.h"

using namespace ctdnn;
using ctdnn::testing::TempDir;
using ctdnn::testing::random_matrix;
using ctdnn::testing::slurp;

namespace {

/// Minimal RIFF writer for malformed or unsupported headers.
std::string wav_bytes(std::uint16_t format, std::uint16_t channels,
                      std::uint16_t bits, const std::vector<std::int16_t> &samples) {
  std::string s;
  auto u16 = [&s](std::uint16_t v) { s += char(v & 0xff); s += char(v >> 8); };
  auto u32 = [&](std::uint32_t v) { u16(v & 0xffff); u16(v >> 16); };
  s += "RIFF";
  u32(36 + 2 * static_cast<std::uint32_t>(samples.size()));
  s += "WAVEfmt ";
  u32(16);
  u16(format);
  u16(channels);
  u32(16000);
  u32(16000 * channels * bits / 8);
  u16(channels * bits / 8);
  u16(bits);
  s += "data";
  u32(2 * static_cast<std::uint32_t>(samples.size()));
  for (auto v : samples) u16(static_cast<std::uint16_t>(v));
  return s;
}

}  // namespace

TEST_CASE("read_wav") {
  {
    std::istringstream in(wav_bytes(1, 1, 16, std::vector<std::int16_t>(16, 0)));
    WavData w = read_wav(in);
    CHECK(w.samples == std::vector<double>(16, 0.0));
    CHECK(w.sample_rate == 16000);
  }
  {
    std::istringstream in(wav_bytes(1, 1, 16, {32767, -32768}));
    WavData w = read_wav(in);
    CHECK(w.samples[0] == 0.999969482421875);
    CHECK(w.samples[1] == -1.0);
  }
  auto error_of = [](const std::string &bytes) {
    std::istringstream in(bytes);
    try {
      read_wav(in);
    } catch (const UnsupportedFormatError &e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_of(wav_bytes(1, 2, 16, {1, 2})).find("channels") != std::string::npos);
  CHECK(error_of(wav_bytes(1, 1, 8, {1})).find("bits per sample") != std::string::npos);
  CHECK(error_of(wav_bytes(3, 1, 16, {1})).find("format tag") != std::string::npos);
  std::istringstream junk("not a wav file");
  CHECK_THROWS_AS(read_wav(junk), FormatError);
}

TEST_CASE("wav write/read round trip") {
  TempDir dir("wav");
  std::vector<double> s{0.0, 0.5, -0.25, 0.999969482421875, -1.0};
  write_wav(dir.str("a.wav"), s, 8000);
  WavData w = read_wav(dir.str("a.wav"));
  CHECK(w.samples == s);
  CHECK(w.sample_rate == 8000);
}

TEST_CASE("mfcc frame count and constant input") {
  MfccConfig c;
  c.n_coeffs = 13;
  CHECK(c.frame_samples() == 400);
  CHECK(c.hop_samples() == 160);
  CHECK(c.fft_size() == 512);
  std::vector<double> second(16000, 0.0);
  Matrix m = mfcc(second, c);
  CHECK(m.rows() == 98);
  CHECK(m.cols() == 13);
  for (std::size_t t = 1; t < m.rows(); ++t)
    CHECK(std::equal(m.row(t).begin(), m.row(t).end(), m.row(0).begin()));
  // c0 of a floored spectrum: sqrt(M) * log(floor).
  CHECK(m(0, 0) == doctest::Approx(std::sqrt(40.0) * std::log(1e-10)));
  CHECK_THROWS_AS(mfcc(std::vector<double>(399, 0.0), c), SequenceTooShortError);
}

TEST_CASE("mfcc frame-count law over random lengths") {
  Rng rng(1);
  MfccConfig c;
  for (int i = 0; i < 40; ++i) {
    const std::size_t n = 400 + rng.uniform_int(8000);
    std::vector<double> x(n);
    for (double &v : x) v = 0.1 * rng.normal();
    Matrix m = mfcc(x, c);
    CHECK(m.rows() == 1 + (n - 400) / 160);
    CHECK(m.cols() == 30);
    CHECK(all_finite(m.values()));
  }
}

TEST_CASE("mfcc of a pure tone peaks in the matching mel band") {
  MfccConfig c;
  c.pre_emphasis = 0.0;
  std::vector<double> x(4000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / 16000.0);
  Matrix m = mfcc(x, c);
  // Undo the DCT to recover the log-mel energies.
  c.n_coeffs = c.mel_filters;
  Matrix full = mfcc(x, c);
  Matrix b = dct_basis(40);
  Vector logmel(40, 0.0);
  for (std::size_t k = 0; k < 40; ++k)
    for (std::size_t j = 0; j < 40; ++j) logmel[j] += b(k, j) * full(0, k);
  const auto peak = std::max_element(logmel.begin(), logmel.end()) - logmel.begin();
  // 1 kHz sits at 1000 mel; band centres are spaced top/(M+1) apart.
  const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  const double expected = 2595.0 * std::log10(1.0 + 1000.0 / 700.0) / (top / 41.0) - 1.0;
  CHECK(std::abs(static_cast<double>(peak) - expected) <= 1.0);
  CHECK(m.rows() == full.rows());
}

TEST_CASE("dct basis is orthonormal") {
  for (std::size_t n : {1u, 2u, 13u, 40u}) {
    Matrix b = dct_basis(n);
    Matrix g = matmul(b, transpose(b));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK(std::abs(g(i, j) - (i == j ? 1.0 : 0.0)) < 1e-10);
  }
}

TEST_CASE("normalize_length") {
  Matrix x{{1.0}, {2.0}, {3.0}};
  CHECK(normalize_length(x, 7) == Matrix{{1.0}, {2.0}, {3.0}, {1.0}, {2.0}, {3.0}, {1.0}});
  Rng rng(2);
  Matrix big = random_matrix(rng, 1000, 4);
  CHECK(normalize_length(big, 1000) == big);
  Matrix five = random_matrix(rng, 500, 3);
  Matrix cut = normalize_length(five, 300);
  CHECK(cut == Matrix(300, 3, std::vector<double>(five.values().begin(),
                                                   five.values().begin() + 900)));
  for (int i = 0; i < 200; ++i) {
    const std::size_t t = 1 + rng.uniform_int(40), l = 1 + rng.uniform_int(120);
    Matrix a = random_matrix(rng, t, 2);
    Matrix y = normalize_length(a, l);
    REQUIRE(y.rows() == l);
    for (std::size_t k = 0; k < l; ++k)
      CHECK(std::equal(y.row(k).begin(), y.row(k).end(), a.row(k % t).begin()));
  }
}

TEST_CASE("feature files") {
  TempDir dir("feat");
  Rng rng(3);
  Matrix x = random_matrix(rng, 10, 13);
  write_features(x, dir.str("a.ctdf"));
  Matrix y = read_features(dir.str("a.ctdf"));
  REQUIRE(y.rows() == 10);
  for (std::size_t i = 0; i < x.values().size(); ++i)
    CHECK(y.values()[i] == static_cast<double>(static_cast<float>(x.values()[i])));
  write_features(y, dir.str("b.ctdf"));
  Matrix z = read_features(dir.str("b.ctdf"));
  write_features(z, dir.str("c.ctdf"));
  CHECK(slurp(dir.str("b.ctdf")) == slurp(dir.str("c.ctdf")));

  Matrix big = random_matrix(rng, 300, 13);
  write_features(big, dir.str("big.ctdf"));
  const std::string bytes = slurp(dir.str("big.ctdf"));
  CHECK(bytes.size() == kFeatureHeaderBytes + 300 * 13 * 4);
  CHECK(kFeatureHeaderBytes == 18);
  CHECK(bytes.substr(0, 6) == std::string("CTDF\x01\x00", 6));

  auto offset_of = [](const std::string &data) {
    std::istringstream in(data);
    try {
      read_features(in);
    } catch (const FormatError &e) {
      return e.offset();
    }
    return std::size_t(-1);
  };
  CHECK(offset_of("") == 0);
  CHECK(offset_of("XTDF" + bytes.substr(4)) == 0);
  CHECK(offset_of(bytes.substr(0, 100)) == 100);
  std::string v2 = bytes;
  v2[4] = 2;
  CHECK(offset_of(v2) == 4);
}

TEST_CASE("manifest") {
  std::istringstream in(
      "# corpus\n\nu1\ts1\tfeats/u1.ctdf\nu2\ts2\t/abs/u2.ctdf\n");
  Manifest m = read_manifest(in, "/data");
  REQUIRE(m.entries.size() == 2);
  CHECK(m.resolve(m.entries[0]) == std::filesystem::path("/data/feats/u1.ctdf"));
  CHECK(m.resolve(m.entries[1]) == std::filesystem::path("/abs/u2.ctdf"));
  CHECK(m.speakers() == std::vector<std::string>{"s1", "s2"});
  std::ostringstream out;
  write_manifest(m, out);
  CHECK(out.str() == "u1\ts1\tfeats/u1.ctdf\nu2\ts2\t/abs/u2.ctdf\n");
  std::istringstream dup("u1\ts\ta\nu1\ts\tb\n");
  CHECK_THROWS_AS(read_manifest(dup, "."), ValidationError);
  std::istringstream bad("u1 s a\n");
  CHECK_THROWS_AS(read_manifest(bad, "."), FormatError);
}

TEST_CASE("synthetic corpus is deterministic and split as documented") {
  SynthSpec spec;
  spec.n_speakers = 10;
  spec.utts_per_speaker = 20;
  spec.frames_per_utt = 300;
  spec.dim = 13;
  spec.seed = 7;
  TempDir a("synth_a"), b("synth_b");
  synth_corpus(spec, a.path());
  synth_corpus(spec, b.path());
  std::size_t files = 0;
  for (const auto &entry : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a.path());
    CHECK(slurp(entry.path().string()) == slurp((b.path() / rel).string()));
    ++files;
  }
  CHECK(files == 200 + 4);

  Manifest train = read_manifest(a.str("train.tsv"));
  Manifest val = read_manifest(a.str("val.tsv"));
  Manifest test = read_manifest(a.str("test.tsv"));
  Manifest mini = read_manifest(a.str("mini.tsv"));
  CHECK(train.entries.size() == 120);
  CHECK(val.entries.size() == 40);
  CHECK(test.entries.size() == 40);
  CHECK(mini.entries.size() == 20);
  CHECK(mini.entries[0].utt_id == "spk000_u000");
  CHECK(mini.entries[1].utt_id == "spk000_u001");
  auto seqs = load_features(mini);
  CHECK(seqs[3].frames.rows() == 300);
  CHECK(seqs[3].frames.cols() == 13);

  spec.heldout_speakers = 3;
  auto utts = synth_utterances(spec);
  std::size_t heldout = 0;
  for (const auto &u : utts)
    if (u.split == Split::kHeldout) {
      ++heldout;
      CHECK(!u.mini);
      CHECK(u.seq.speaker_id >= "spk007");
    }
  CHECK(heldout == 60);
  spec.ar_coefficient = 1.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("degenerate synthetic speakers are constant") {
  SynthSpec spec;
  spec.n_speakers = 3;
  spec.utts_per_speaker = 5;
  spec.frames_per_utt = 50;
  spec.dim = 4;
  spec.ar_coefficient = 0.0;
  spec.noise_scale = 1e-300;
  for (const auto &u : synth_utterances(spec)) {
    for (std::size_t t = 1; t < u.seq.frames.rows(); ++t)
      CHECK(std::equal(u.seq.frames.row(t).begin(), u.seq.frames.row(t).end(),
                       u.seq.frames.row(0).begin()));
    const Vector pooled = sp_forward(u.seq.frames);
    for (std::size_t j = 4; j < 8; ++j) CHECK(pooled[j] < 1e-12);
  }
}

TEST_CASE("per-speaker sample means sit within the standard-error bound") {
  SynthSpec spec;
  spec.n_speakers = 4;
  spec.utts_per_speaker = 10;
  spec.frames_per_utt = 200;
  spec.dim = 6;
  spec.ar_coefficient = 0.0;
  spec.seed = 11;
  SynthSpec exact = spec;
  exact.noise_scale = 1e-300;
  auto noisy = synth_utterances(spec), clean = synth_utterances(exact);
  std::map<std::string, Vector> sum, mu;
  std::map<std::string, double> count;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const auto &spk = noisy[i].seq.speaker_id;
    Vector &s = sum[spk];
    s.resize(6, 0.0);
    for (std::size_t t = 0; t < 200; ++t)
      for (std::size_t j = 0; j < 6; ++j) s[j] += noisy[i].seq.frames(t, j);
    count[spk] += 200;
    auto r = clean[i].seq.frames.row(0);
    mu[spk] = Vector(r.begin(), r.end());
  }
  for (const auto &[spk, s] : sum)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(std::abs(s[j] / count[spk] - mu[spk][j]) <
            3.0 * spec.noise_scale / std::sqrt(count[spk]));
}

TEST_CASE("default synthetic speakers are separable by utterance means") {
  SynthSpec spec;  // speaker_mean_scale >= 3 * noise_scale
  REQUIRE(spec.speaker_mean_scale >= 3.0 * spec.noise_scale);
  auto utts = synth_utterances(spec);
  std::map<std::string, Vector> centroid;
  std::map<std::string, int> n;
  auto utt_mean = [](const Matrix &x) { return rowwise_mean_std(x).mean; };
  for (const auto &u : utts) {
    if (u.split != Split::kTrain) continue;
    Vector m = utt_mean(u.seq.frames);
    Vector &c = centroid[u.seq.speaker_id];
    c.resize(m.size(), 0.0);
    for (std::size_t j = 0; j < m.size(); ++j) c[j] += m[j];
    ++n[u.seq.speaker_id];
  }
  for (auto &[spk, c] : centroid)
    for (double &v : c) v /= n[spk];
  int right = 0, total = 0;
  for (const auto &u : utts) {
    if (u.split == Split::kTrain) continue;
    Vector m = utt_mean(u.seq.frames);
    std::string best;
    double best_d = INFINITY;
    for (const auto &[spk, c] : centroid) {
      double d = 0;
      for (std::size_t j = 0; j < m.size(); ++j) d += (m[j] - c[j]) * (m[j] - c[j]);
      if (d < best_d) best_d = d, best = spk;
    }
    right += best == u.seq.speaker_id;
    ++total;
  }
  CHECK(static_cast<double>(right) / total >= 0.99);
}

TEST_CASE("make_trials") {
  std::vector<ManifestEntry> one{{"a1", "A", "x"}, {"a2", "A", "x"}};
  auto t = make_trials(one, TrialMode::kExhaustive, 0, 0);
  REQUIRE(t.size() == 1);
  CHECK(t[0].target);
  auto s = make_trials(one, TrialMode::kSampled, 3, 5);
  REQUIRE(s.size() == 1);
  CHECK(s[0].target);

  std::vector<ManifestEntry> two{{"a1", "A", "x"}, {"a2", "A", "x"},
                                 {"b1", "B", "x"}, {"b2", "B", "x"}};
  auto ex = make_trials(two, TrialMode::kExhaustive, 0, 0);
  CHECK(ex.size() == 6);
  CHECK(std::count_if(ex.begin(), ex.end(), [](const Trial &x) { return x.target; }) == 2);

  std::vector<ManifestEntry> many;
  for (int spk = 0; spk < 5; ++spk)
    for (int u = 0; u < 6; ++u)
      many.push_back({"s" + std::to_string(spk) + "u" + std::to_string(u),
                      "s" + std::to_string(spk), "x"});
  auto a = make_trials(many, TrialMode::kSampled, 2, 9);
  CHECK(a == make_trials(many, TrialMode::kSampled, 2, 9));
  std::set<std::string> used;
  std::size_t targets = 0;
  for (const Trial &x : a) {
    CHECK(x.enroll_utt != x.test_utt);
    used.insert(x.enroll_utt);
    used.insert(x.test_utt);
    targets += x.target;
  }
  CHECK(used.size() == many.size());
  CHECK(targets > 0);
  CHECK(targets < a.size());
  CHECK(std::abs(2.0 * static_cast<double>(targets) - static_cast<double>(a.size())) <=
        0.2 * static_cast<double>(a.size()));
}
