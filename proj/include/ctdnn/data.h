// include/ctdnn/data.h

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

#ifndef CTDNN_DATA_H_
#define CTDNN_DATA_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ctdnn/eval.h"
#include "ctdnn/matrix.h"

namespace ctdnn {

struct WavData {
  std::vector<double> samples;  // in [-1, 1)
  int sample_rate = 0;
};

/// 16-bit little-endian PCM mono RIFF/WAVE.  UnsupportedFormatError names the
/// offending field (format tag, channels, bits per sample); FormatError for
/// malformed files.
WavData read_wav(const std::string &path);
WavData read_wav(std::istream &in);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1) and rounded.
void write_wav(const std::string &path, std::span<const double> samples,
               int sample_rate);

struct MfccConfig {
  int sample_rate = 16000;
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  double pre_emphasis = 0.97;
  int mel_filters = 40;
  int n_coeffs = 30;
  double log_floor = 1e-10;

  std::size_t frame_samples() const;
  std::size_t hop_samples() const;
  /// Smallest power of two >= frame_samples().
  std::size_t fft_size() const;
  /// ValidationError naming the first bad field.
  void validate() const;
};

/// MFCCs, one row per frame: pre-emphasis, framing, Hamming window, power
/// spectrum, triangular mel filterbank (HTK mel scale, 0 Hz to Nyquist), log
/// with floor, orthonormal DCT-II, coefficients 0..n_coeffs-1.
/// T = 1 + floor((N - frame) / hop); SequenceTooShortError if N < frame.
Matrix mfcc(std::span<const double> samples, const MfccConfig &config);

/// Orthonormal DCT-II basis, n x n: row k is the k-th cosine.
Matrix dct_basis(std::size_t n);

/// Cyclic tiling then truncation to exactly `length` frames.
Matrix normalize_length(const Matrix &x, std::size_t length);

struct FeatureSequence {
  std::string utt_id;
  std::string speaker_id;
  Matrix frames;
};

/// Feature file: "CTDF", u16 version 1, u32 T, u32 D, u32 reserved 0, then
/// T*D f32 values time-major, all little-endian.
inline constexpr std::size_t kFeatureHeaderBytes = 18;
void write_features(const Matrix &frames, std::ostream &out);
Matrix read_features(std::istream &in);
void write_features(const Matrix &frames, const std::string &path);
Matrix read_features(const std::string &path);

struct ManifestEntry {
  std::string utt_id;
  std::string speaker_id;
  std::string path;  // as written; relative paths are relative to the manifest
  bool operator==(const ManifestEntry &) const = default;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry &e) const;
  /// Sorted distinct speaker ids.
  std::vector<std::string> speakers() const;
};

/// Lines "utt<TAB>speaker<TAB>path"; '#' comments and blank lines skipped.
/// Duplicate utt ids are a ValidationError.
Manifest read_manifest(const std::string &path);
Manifest read_manifest(std::istream &in, const std::filesystem::path &base_dir);
void write_manifest(const Manifest &manifest, std::ostream &out);
void write_manifest(const Manifest &manifest, const std::string &path);

/// Loads every feature file of the manifest, in order.
std::vector<FeatureSequence> load_features(const Manifest &manifest);

struct SynthSpec {
  int n_speakers = 10;
  int utts_per_speaker = 20;
  int frames_per_utt = 300;
  int dim = 13;
  double speaker_mean_scale = 1.0;
  double ar_coefficient = 0.5;
  double noise_scale = 0.3;
  std::uint64_t seed = 1;
  /// The last `heldout_speakers` speakers are kept out of every training
  /// split and emitted only in the held-out set.
  int heldout_speakers = 0;

  void validate() const;
};

enum class Split { kTrain, kVal, kTest, kHeldout };

struct SynthUtterance {
  FeatureSequence seq;
  Split split = Split::kTrain;
  bool mini = false;  // one of the first two train utterances of its speaker
};

/**
   Synthetic speakers.  Speaker s has mean mu_s = speaker_mean_scale * N(0, I);
   each utterance is x_t = mu_s + rho (x_{t-1} - mu_s) + noise_scale * N(0, I)
   started from the stationary distribution.  Per speaker the utterances are
   split in order into train (first 3/5), val (next 1/5) and test (the rest).
   Speakers are "spkNNN", utterances "spkNNN_uNNN".
*/
std::vector<SynthUtterance> synth_utterances(const SynthSpec &spec);

/// Writes synth_utterances under `out_dir`: feats/<utt>.ctdf plus manifests
/// train.tsv, val.tsv, test.tsv, mini.tsv and (with held-out speakers)
/// heldout.tsv.  Returns the utterances.
std::vector<SynthUtterance> synth_corpus(const SynthSpec &spec,
                                         const std::filesystem::path &out_dir);

enum class TrialMode { kExhaustive, kSampled };

/**
   Verification trials over (utt, speaker) pairs.  Exhaustive: every
   unordered pair i < j in input order.  Sampled: for each utterance up to
   `pairs_per_utt` same-speaker and as many different-speaker partners drawn
   without replacement, skipping pairs already emitted.  Never pairs an
   utterance with itself.
*/
std::vector<Trial> make_trials(std::span<const ManifestEntry> entries,
                               TrialMode mode, std::size_t pairs_per_utt,
                               std::uint64_t seed);

}  // namespace ctdnn

#endif  // CTDNN_DATA_H_
