// include/ctdnn/cli.h

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

#ifndef CTDNN_CLI_H_
#define CTDNN_CLI_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctdnn/data.h"
#include "ctdnn/train.h"

namespace ctdnn {

/**
   Run configuration, an INI-style key=value file:

     [arch]      spec (DSL or preset name), width (preset width)
     [train]     batch_size, lr, max_epochs, patience, min_delta, seed, eval_every
     [features]  sample_rate, frame_ms, hop_ms, pre_emphasis, mel_filters,
                 n_coeffs, log_floor, length (frames; 0 keeps the native length)
     [eval]      lda_dim (0 means C - 1), shrinkage
     [synth]     n_speakers, utts_per_speaker, frames_per_utt, dim,
                 speaker_mean_scale, ar_coefficient, noise_scale, seed,
                 heldout_speakers

   Unknown sections or keys are rejected with ValidationError.
*/
struct RunConfig {
  std::string arch = "ctdnn-paper";
  int width = 64;
  TrainConfig train;
  MfccConfig features;
  std::size_t length = 0;
  std::size_t lda_dim = 0;
  std::optional<double> shrinkage;
  SynthSpec synth;

  void validate() const;
};

RunConfig read_run_config(std::istream &in);
RunConfig read_run_config(const std::string &path);

/// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (args excludes the program name).  Results go to
/// `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string> &args, std::ostream &out,
            std::ostream &err);

}  // namespace ctdnn

#endif  // CTDNN_CLI_H_
