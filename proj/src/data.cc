// src/data.cc

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

#include "ctdnn/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <unordered_set>

#include <fftw3.h>

#include "binary_io.h"
#include "ctdnn/errors.h"
#include "ctdnn/rng.h"

namespace ctdnn {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// WAV

WavData read_wav(std::istream &in) {
  binary::Reader r(in);
  char tag[4];
  r.bytes(tag, 4, "RIFF tag");
  if (std::string(tag, 4) != "RIFF") throw FormatError(0, "missing RIFF tag");
  r.uint<std::uint32_t>("RIFF size");
  r.bytes(tag, 4, "WAVE tag");
  if (std::string(tag, 4) != "WAVE") throw FormatError(8, "missing WAVE tag");

  bool have_fmt = false;
  WavData wav;
  for (;;) {
    const std::size_t chunk_at = r.offset();
    r.bytes(tag, 4, "chunk id");
    const std::string id(tag, 4);
    const std::uint32_t size = r.uint<std::uint32_t>("chunk size");
    if (id == "fmt ") {
      if (size < 16) throw FormatError(chunk_at, "fmt chunk shorter than 16 bytes");
      const auto format = r.uint<std::uint16_t>("format tag");
      const auto channels = r.uint<std::uint16_t>("channels");
      const auto rate = r.uint<std::uint32_t>("sample rate");
      r.uint<std::uint32_t>("byte rate");
      r.uint<std::uint16_t>("block align");
      const auto bits = r.uint<std::uint16_t>("bits per sample");
      if (format != 1)
        throw UnsupportedFormatError("wav format tag " + std::to_string(format) +
                                     " (only PCM = 1 is supported)");
      if (channels != 1)
        throw UnsupportedFormatError("wav channels " + std::to_string(channels) +
                                     " (only mono is supported)");
      if (bits != 16)
        throw UnsupportedFormatError("wav bits per sample " + std::to_string(bits) +
                                     " (only 16 is supported)");
      r.string(size - 16 + (size & 1), "fmt chunk tail");
      wav.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(chunk_at, "data chunk before fmt chunk");
      if (size % 2) throw FormatError(chunk_at, "odd data size for 16-bit samples");
      wav.samples.resize(size / 2);
      for (double &s : wav.samples)
        s = static_cast<std::int16_t>(r.uint<std::uint16_t>("sample")) / 32768.0;
      return wav;
    } else {
      r.string(size + (size & 1), "chunk body");
    }
  }
}

WavData read_wav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_wav(in);
}

void write_wav(const std::string &path, std::span<const double> samples,
               int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  using namespace binary;
  const auto data_bytes = static_cast<std::uint32_t>(2 * samples.size());
  out.write("RIFF", 4);
  put_uint<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_uint<std::uint32_t>(out, 16);
  put_uint<std::uint16_t>(out, 1);
  put_uint<std::uint16_t>(out, 1);
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate));
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(2 * sample_rate));
  put_uint<std::uint16_t>(out, 2);
  put_uint<std::uint16_t>(out, 16);
  out.write("data", 4);
  put_uint<std::uint32_t>(out, data_bytes);
  for (double s : samples) {
    const double v = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// MFCC

std::size_t MfccConfig::frame_samples() const {
  return static_cast<std::size_t>(std::lround(sample_rate * frame_ms / 1000.0));
}

std::size_t MfccConfig::hop_samples() const {
  return static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0));
}

std::size_t MfccConfig::fft_size() const {
  std::size_t n = 1;
  while (n < frame_samples()) n *= 2;
  return n;
}

void MfccConfig::validate() const {
  if (sample_rate <= 0) throw ValidationError("features.sample_rate must be > 0");
  if (!(hop_ms > 0.0)) throw ValidationError("features.hop_ms must be > 0");
  if (!(frame_ms > hop_ms))
    throw ValidationError("features.frame_ms must exceed features.hop_ms");
  if (hop_samples() < 1) throw ValidationError("features.hop_ms is below one sample");
  if (!(pre_emphasis >= 0.0 && pre_emphasis < 1.0))
    throw ValidationError("features.pre_emphasis must lie in [0, 1)");
  if (mel_filters < 1) throw ValidationError("features.mel_filters must be >= 1");
  if (n_coeffs < 1 || n_coeffs > mel_filters)
    throw ValidationError("features.n_coeffs must lie in [1, mel_filters]");
  if (!(log_floor > 0.0)) throw ValidationError("features.log_floor must be > 0");
}

Matrix dct_basis(std::size_t n) {
  Matrix b(n, n);
  const double dn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / dn);
    for (std::size_t j = 0; j < n; ++j)
      b(k, j) = scale * std::cos(std::numbers::pi * static_cast<double>(k) *
                                 (static_cast<double>(j) + 0.5) / dn);
  }
  return b;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// mel_filters x (fft_size/2 + 1) triangular weights.
Matrix mel_filterbank(const MfccConfig &c) {
  const std::size_t bins = c.fft_size() / 2 + 1;
  const std::size_t m = static_cast<std::size_t>(c.mel_filters);
  const double top = hz_to_mel(c.sample_rate / 2.0);
  std::vector<double> edges(m + 2);
  for (std::size_t i = 0; i < m + 2; ++i)
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(m + 1));
  Matrix fb(m, bins);
  const double bin_hz = static_cast<double>(c.sample_rate) / static_cast<double>(c.fft_size());
  for (std::size_t f = 0; f < m; ++f)
    for (std::size_t k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (hz > edges[f] && hz <= edges[f + 1])
        w = (hz - edges[f]) / (edges[f + 1] - edges[f]);
      else if (hz > edges[f + 1] && hz < edges[f + 2])
        w = (edges[f + 2] - hz) / (edges[f + 2] - edges[f + 1]);
      fb(f, k) = w;
    }
  return fb;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(fftw_alloc_real(n)),
        out_(fftw_alloc_complex(n / 2 + 1)),
        plan_(fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE)) {}
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;

  double *input() { return in_; }
  /// |X_k|^2 for k = 0..n/2.
  void power(std::span<double> out) {
    fftw_execute(plan_);
    for (std::size_t k = 0; k <= n_ / 2; ++k)
      out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  std::size_t n_;
  double *in_;
  fftw_complex *out_;
  fftw_plan plan_;
};

}  // namespace

Matrix mfcc(std::span<const double> samples, const MfccConfig &config) {
  config.validate();
  const std::size_t frame = config.frame_samples(), hop = config.hop_samples();
  if (samples.size() < frame)
    throw SequenceTooShortError("mfcc: " + std::to_string(samples.size()) +
                                " samples, need at least one frame of " +
                                std::to_string(frame));
  const std::size_t frames = 1 + (samples.size() - frame) / hop;
  const std::size_t nfft = config.fft_size(), bins = nfft / 2 + 1;
  const std::size_t m = static_cast<std::size_t>(config.mel_filters);
  const std::size_t d = static_cast<std::size_t>(config.n_coeffs);

  std::vector<double> emph(samples.size());
  emph[0] = samples[0];
  for (std::size_t i = 1; i < samples.size(); ++i)
    emph[i] = samples[i] - config.pre_emphasis * samples[i - 1];

  std::vector<double> window(frame);
  for (std::size_t i = 0; i < frame; ++i)
    window[i] = frame == 1 ? 1.0
                           : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi *
                                                    static_cast<double>(i) /
                                                    static_cast<double>(frame - 1));
  const Matrix fb = mel_filterbank(config);
  const Matrix dct = dct_basis(m);

  RealFft fft(nfft);
  std::vector<double> power(bins), logmel(m);
  Matrix out(frames, d);
  for (std::size_t t = 0; t < frames; ++t) {
    double *buf = fft.input();
    for (std::size_t i = 0; i < frame; ++i) buf[i] = emph[t * hop + i] * window[i];
    std::fill(buf + frame, buf + nfft, 0.0);
    fft.power(power);
    for (std::size_t f = 0; f < m; ++f)
      logmel[f] = std::log(std::max(dot(fb.row(f), power), config.log_floor));
    for (std::size_t k = 0; k < d; ++k) out(t, k) = dot(dct.row(k), logmel);
  }
  return out;
}

Matrix normalize_length(const Matrix &x, std::size_t length) {
  if (x.rows() == 0) throw EmptyInputError("normalize_length: no frames");
  if (length == 0) throw ValidationError("normalize_length: length must be >= 1");
  Matrix out(length, x.cols());
  for (std::size_t i = 0; i < length; ++i) {
    auto src = x.row(i % x.rows());
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature files

namespace {
constexpr char kFeatureMagic[4] = {'C', 'T', 'D', 'F'};
constexpr std::uint16_t kFeatureVersion = 1;
}  // namespace

void write_features(const Matrix &frames, std::ostream &out) {
  using namespace binary;
  out.write(kFeatureMagic, 4);
  put_uint<std::uint16_t>(out, kFeatureVersion);
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(frames.rows()));
  put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(frames.cols()));
  put_uint<std::uint32_t>(out, 0);
  for (double v : frames.values()) put_f32(out, static_cast<float>(v));
}

Matrix read_features(std::istream &in) {
  binary::Reader r(in);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kFeatureMagic)) throw FormatError(0, "bad magic");
  if (const auto v = r.uint<std::uint16_t>("version"); v != kFeatureVersion)
    throw FormatError(4, "unsupported version " + std::to_string(v));
  const auto t = r.uint<std::uint32_t>("frame count");
  const auto d = r.uint<std::uint32_t>("dimension");
  if (r.uint<std::uint32_t>("reserved") != 0) throw FormatError(14, "reserved field not 0");
  if (t == 0 || d == 0) throw FormatError(6, "empty feature matrix");
  Matrix m(t, d);
  for (double &v : m.values()) {
    v = r.f32("frame value");
    if (!std::isfinite(v)) throw FormatError(r.offset() - 4, "non-finite value");
  }
  if (!r.at_end()) throw FormatError(r.offset(), "trailing bytes after payload");
  return m;
}

void write_features(const Matrix &frames, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_features(frames, out);
  if (!out) throw IoError("write failed: " + path);
}

Matrix read_features(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_features(in);
}

// ---------------------------------------------------------------------------
// Manifests

fs::path Manifest::resolve(const ManifestEntry &e) const {
  const fs::path p(e.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> Manifest::speakers() const {
  std::set<std::string> s;
  for (const auto &e : entries) s.insert(e.speaker_id);
  return {s.begin(), s.end()};
}

Manifest read_manifest(std::istream &in, const fs::path &base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t at = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t a = line.find('\t');
    const std::size_t b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos)
      throw FormatError(at, "expected utt<TAB>speaker<TAB>path");
    ManifestEntry e{line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)};
    if (e.utt_id.empty() || e.speaker_id.empty() || e.path.empty())
      throw FormatError(at, "empty manifest field");
    if (!seen.insert(e.utt_id).second)
      throw ValidationError("duplicate utterance id in manifest: " + e.utt_id);
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest read_manifest(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_manifest(in, fs::path(path).parent_path());
}

void write_manifest(const Manifest &manifest, std::ostream &out) {
  for (const auto &e : manifest.entries)
    out << e.utt_id << '\t' << e.speaker_id << '\t' << e.path << '\n';
}

void write_manifest(const Manifest &manifest, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_manifest(manifest, out);
  if (!out) throw IoError("write failed: " + path);
}

std::vector<FeatureSequence> load_features(const Manifest &manifest) {
  std::vector<FeatureSequence> out;
  for (const auto &e : manifest.entries) {
    Matrix frames;
    try {
      frames = read_features(manifest.resolve(e).string());
    } catch (const FormatError &err) {
      const std::string what = err.what();
      throw FormatError(err.offset(), e.path + ": " + what.substr(what.find(": ") + 2));
    }
    if (!out.empty() && frames.cols() != out[0].frames.cols())
      throw ShapeError("feature dimension " + std::to_string(frames.cols()) + " in " +
                       e.path + " differs from " + std::to_string(out[0].frames.cols()));
    out.push_back({e.utt_id, e.speaker_id, std::move(frames)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void SynthSpec::validate() const {
  if (n_speakers < 1) throw ValidationError("synth.n_speakers must be >= 1");
  if (utts_per_speaker < 5) throw ValidationError("synth.utts_per_speaker must be >= 5");
  if (frames_per_utt < 1) throw ValidationError("synth.frames_per_utt must be >= 1");
  if (dim < 1) throw ValidationError("synth.dim must be >= 1");
  if (!(speaker_mean_scale > 0.0))
    throw ValidationError("synth.speaker_mean_scale must be > 0");
  if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0))
    throw ValidationError("synth.ar_coefficient must lie in [0, 1)");
  if (!(noise_scale > 0.0)) throw ValidationError("synth.noise_scale must be > 0");
  if (heldout_speakers < 0 || heldout_speakers >= n_speakers)
    throw ValidationError("synth.heldout_speakers must lie in [0, n_speakers)");
}

namespace {

std::string numbered(const char *prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03d", prefix, i);
  return buf;
}

}  // namespace

std::vector<SynthUtterance> synth_utterances(const SynthSpec &spec) {
  spec.validate();
  const std::size_t d = static_cast<std::size_t>(spec.dim);
  const std::size_t frames = static_cast<std::size_t>(spec.frames_per_utt);
  const double rho = spec.ar_coefficient;
  const double start_scale = spec.noise_scale / std::sqrt(1.0 - rho * rho);
  const int n_train = 3 * spec.utts_per_speaker / 5;
  const int n_val = spec.utts_per_speaker / 5;
  std::vector<SynthUtterance> out;
  for (int s = 0; s < spec.n_speakers; ++s) {
    Rng mean_rng(derive_seed(spec.seed, static_cast<std::uint64_t>(s)));
    Vector mu(d);
    for (double &v : mu) v = spec.speaker_mean_scale * mean_rng.normal();
    const bool heldout = s >= spec.n_speakers - spec.heldout_speakers;
    const std::string spk = numbered("spk", s);
    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      Rng rng(derive_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(s)),
                          static_cast<std::uint64_t>(u) + 1));
      Matrix x(frames, d);
      for (std::size_t j = 0; j < d; ++j) x(0, j) = mu[j] + start_scale * rng.normal();
      for (std::size_t t = 1; t < frames; ++t)
        for (std::size_t j = 0; j < d; ++j)
          x(t, j) = mu[j] + rho * (x(t - 1, j) - mu[j]) + spec.noise_scale * rng.normal();
      SynthUtterance utt;
      utt.seq = {spk + "_" + numbered("u", u), spk, std::move(x)};
      if (heldout)
        utt.split = Split::kHeldout;
      else if (u < n_train)
        utt.split = Split::kTrain;
      else if (u < n_train + n_val)
        utt.split = Split::kVal;
      else
        utt.split = Split::kTest;
      utt.mini = !heldout && u < 2;
      out.push_back(std::move(utt));
    }
  }
  return out;
}

std::vector<SynthUtterance> synth_corpus(const SynthSpec &spec, const fs::path &out_dir) {
  auto utts = synth_utterances(spec);
  fs::create_directories(out_dir / "feats");
  std::map<std::string, Manifest> manifests;
  for (const char *name : {"train", "val", "test", "mini"}) manifests[name];
  if (spec.heldout_speakers > 0) manifests["heldout"];
  for (const auto &u : utts) {
    const std::string rel = "feats/" + u.seq.utt_id + ".ctdf";
    write_features(u.seq.frames, (out_dir / rel).string());
    const ManifestEntry e{u.seq.utt_id, u.seq.speaker_id, rel};
    const char *split = u.split == Split::kTrain ? "train"
                        : u.split == Split::kVal ? "val"
                        : u.split == Split::kTest ? "test"
                                                  : "heldout";
    manifests[split].entries.push_back(e);
    if (u.mini) manifests["mini"].entries.push_back(e);
  }
  for (const auto &[name, m] : manifests)
    write_manifest(m, (out_dir / (name + ".tsv")).string());
  return utts;
}

// ---------------------------------------------------------------------------
// Trials

std::vector<Trial> make_trials(std::span<const ManifestEntry> entries,
                               TrialMode mode, std::size_t pairs_per_utt,
                               std::uint64_t seed) {
  std::vector<Trial> out;
  const std::size_t n = entries.size();
  auto trial = [&](std::size_t i, std::size_t j) {
    return Trial{entries[i].utt_id, entries[j].utt_id,
                 entries[i].speaker_id == entries[j].speaker_id};
  };
  if (mode == TrialMode::kExhaustive) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) out.push_back(trial(i, j));
    return out;
  }
  if (pairs_per_utt < 1) throw ValidationError("make_trials: pairs_per_utt must be >= 1");
  Rng rng(seed);
  std::set<std::pair<std::size_t, std::size_t>> emitted;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> same, other;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      (entries[j].speaker_id == entries[i].speaker_id ? same : other).push_back(j);
    }
    for (auto *pool : {&same, &other}) {
      const std::size_t k = std::min(pairs_per_utt, pool->size());
      // Partial Fisher-Yates: the first k slots become the sample.
      for (std::size_t a = 0; a < k; ++a) {
        const std::size_t b = a + rng.uniform_int(pool->size() - a);
        std::swap((*pool)[a], (*pool)[b]);
        const std::size_t j = (*pool)[a];
        if (emitted.insert({std::min(i, j), std::max(i, j)}).second)
          out.push_back(trial(i, j));
      }
    }
  }
  return out;
}

}  // namespace ctdnn
