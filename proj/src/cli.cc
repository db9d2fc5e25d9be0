// src/cli.cc

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

#include "ctdnn/cli.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ctdnn/arch.h"
#include "ctdnn/errors.h"
#include "ctdnn/eval.h"
#include "ctdnn/model.h"

namespace ctdnn {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// RunConfig

namespace {

template <typename T>
T parse_number(const std::string &key, const std::string &text) {
  T v{};
  const char *end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end)
    throw ValidationError(key + ": cannot parse '" + text + "'");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) throw ValidationError(key + ": must be finite");
  return v;
}

}  // namespace

void RunConfig::validate() const {
  if (width < 1) throw ValidationError("arch.width must be >= 1");
  train.validate();
  features.validate();
  if (shrinkage && !(*shrinkage >= 0.0))
    throw ValidationError("eval.shrinkage must be >= 0");
  synth.validate();
}

RunConfig read_run_config(std::istream &in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error &e) {
    throw ValidationError(std::string("config: ") + e.message() + " at line " +
                          std::to_string(e.line()));
  }
  RunConfig c;
  using Setter = std::function<void(const std::string &, const std::string &)>;
  auto size = [](std::size_t &f) {
    return Setter([&f](const std::string &k, const std::string &v) {
      f = parse_number<std::size_t>(k, v);
    });
  };
  auto integer = [](int &f) {
    return Setter([&f](const std::string &k, const std::string &v) {
      f = parse_number<int>(k, v);
    });
  };
  auto real = [](double &f) {
    return Setter([&f](const std::string &k, const std::string &v) {
      f = parse_number<double>(k, v);
    });
  };
  auto u64 = [](std::uint64_t &f) {
    return Setter([&f](const std::string &k, const std::string &v) {
      f = parse_number<std::uint64_t>(k, v);
    });
  };
  const std::map<std::string, std::map<std::string, Setter>> keys{
      {"arch",
       {{"spec", [&c](const std::string &, const std::string &v) { c.arch = v; }},
        {"width", integer(c.width)}}},
      {"train",
       {{"batch_size", size(c.train.batch_size)},
        {"lr", real(c.train.lr)},
        {"max_epochs", size(c.train.max_epochs)},
        {"patience", size(c.train.patience)},
        {"min_delta", real(c.train.min_delta)},
        {"seed", u64(c.train.seed)},
        {"eval_every", size(c.train.eval_every)}}},
      {"features",
       {{"sample_rate", integer(c.features.sample_rate)},
        {"frame_ms", real(c.features.frame_ms)},
        {"hop_ms", real(c.features.hop_ms)},
        {"pre_emphasis", real(c.features.pre_emphasis)},
        {"mel_filters", integer(c.features.mel_filters)},
        {"n_coeffs", integer(c.features.n_coeffs)},
        {"log_floor", real(c.features.log_floor)},
        {"length", size(c.length)}}},
      {"eval",
       {{"lda_dim", size(c.lda_dim)},
        {"shrinkage", [&c](const std::string &k, const std::string &v) {
           c.shrinkage = parse_number<double>(k, v);
         }}}},
      {"synth",
       {{"n_speakers", integer(c.synth.n_speakers)},
        {"utts_per_speaker", integer(c.synth.utts_per_speaker)},
        {"frames_per_utt", integer(c.synth.frames_per_utt)},
        {"dim", integer(c.synth.dim)},
        {"speaker_mean_scale", real(c.synth.speaker_mean_scale)},
        {"ar_coefficient", real(c.synth.ar_coefficient)},
        {"noise_scale", real(c.synth.noise_scale)},
        {"seed", u64(c.synth.seed)},
        {"heldout_speakers", integer(c.synth.heldout_speakers)}}},
  };
  for (const auto &[section, body] : tree) {
    auto s = keys.find(section);
    if (s == keys.end() || body.empty())
      throw ValidationError("config: unknown section or top-level key '" + section + "'");
    for (const auto &[key, value] : body) {
      auto k = s->second.find(key);
      if (k == s->second.end())
        throw ValidationError("config: unknown key '" + section + "." + key + "'");
      k->second(section + "." + key, value.get_value<std::string>());
    }
  }
  c.validate();
  return c;
}

RunConfig read_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_run_config(in);
}

// ---------------------------------------------------------------------------
// Commands

namespace {

/// Bad flags, configuration or architecture: exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Runs `f`, reporting configuration problems as usage errors.
template <typename F>
auto as_usage(F &&f) {
  try {
    return f();
  } catch (const ValidationError &e) {
    throw UsageError(e.what());
  } catch (const IoError &e) {
    throw UsageError(e.what());
  }
}

struct Streams {
  std::ostream &out;
  std::ostream &err;
};

RunConfig config_or_default(const std::string &path) {
  return as_usage([&] { return path.empty() ? RunConfig{} : read_run_config(path); });
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// Labels by position in the sorted speaker list.
LabeledSet labeled(const std::vector<FeatureSequence> &seqs,
                   const std::vector<std::string> &classes) {
  LabeledSet set;
  for (const auto &s : seqs) {
    auto it = std::lower_bound(classes.begin(), classes.end(), s.speaker_id);
    if (it == classes.end() || *it != s.speaker_id)
      throw LabelError("speaker " + s.speaker_id + " of " + s.utt_id +
                       " is not a training class");
    set.inputs.push_back(s.frames);
    set.labels.push_back(static_cast<int>(it - classes.begin()));
  }
  return set;
}

struct FeaturizeArgs {
  std::string wav_dir, manifest_out, config;
  std::optional<std::size_t> length;
  bool strict = false;
};

int cmd_featurize(const FeaturizeArgs &a, Streams io) {
  RunConfig cfg = config_or_default(a.config);
  const std::size_t length = a.length.value_or(cfg.length);
  const fs::path root(a.wav_dir);
  if (!fs::is_directory(root)) throw IoError("not a directory: " + a.wav_dir);
  const fs::path manifest_path(a.manifest_out);
  const fs::path base = manifest_path.parent_path();
  fs::create_directories(base / "feats");

  std::vector<fs::path> files;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  Manifest m;
  std::size_t failures = 0;
  for (const fs::path &file : files) {
    const fs::path rel = fs::relative(file, root);
    try {
      if (file.extension() != ".wav")
        throw UnsupportedFormatError("not a .wav file");
      WavData wav = read_wav(file.string());
      if (wav.sample_rate != cfg.features.sample_rate)
        throw UnsupportedFormatError("sample rate " + std::to_string(wav.sample_rate) +
                                     ", config expects " +
                                     std::to_string(cfg.features.sample_rate));
      Matrix feats = mfcc(wav.samples, cfg.features);
      if (length > 0) feats = normalize_length(feats, length);
      std::string utt = rel.parent_path().empty()
                            ? rel.stem().string()
                            : (rel.parent_path() / rel.stem()).generic_string();
      std::replace(utt.begin(), utt.end(), '/', '_');
      const std::string speaker =
          rel.parent_path().empty() ? "-" : rel.begin()->string();
      const std::string feat_rel = "feats/" + utt + ".ctdf";
      write_features(feats, (base / feat_rel).string());
      m.entries.push_back({utt, speaker, feat_rel});
    } catch (const Error &e) {
      ++failures;
      io.err << "error: " << rel.generic_string() << ": " << e.what() << '\n';
    }
  }
  if (files.empty()) io.err << "warning: no files under " << a.wav_dir << '\n';
  write_manifest(m, a.manifest_out);
  io.out << "featurized " << m.entries.size() << " of " << files.size() << " files\n";
  return failures > 0 && a.strict ? kExitRuntime : kExitOk;
}

int cmd_synth(const std::string &spec_file, const std::string &out_dir, Streams io) {
  RunConfig cfg = config_or_default(spec_file);
  auto utts = synth_corpus(cfg.synth, out_dir);
  io.out << "wrote " << utts.size() << " utterances of " << cfg.synth.n_speakers
         << " speakers to " << out_dir << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string manifest, val_manifest, arch, config, model_out, curve_out;
  std::optional<int> width;
  std::optional<double> lr, threshold;
  std::optional<std::size_t> batch_size, max_epochs, patience;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs &a, Streams io) {
  RunConfig cfg = config_or_default(a.config);
  if (!a.arch.empty()) cfg.arch = a.arch;
  if (a.width) cfg.width = *a.width;
  if (a.lr) cfg.train.lr = *a.lr;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.max_epochs) cfg.train.max_epochs = *a.max_epochs;
  if (a.patience) cfg.train.patience = *a.patience;
  if (a.seed) cfg.train.seed = *a.seed;
  // Checked before touching data so these surface as usage errors.
  const ModelConfig arch = as_usage([&] {
    cfg.validate();
    return parse_arch(cfg.arch, cfg.width);
  });

  const Manifest train_m = read_manifest(a.manifest);
  if (train_m.entries.empty()) throw EmptyInputError("empty training manifest");
  const auto train_seqs = load_features(train_m);
  const std::vector<std::string> classes = train_m.speakers();
  const LabeledSet train = labeled(train_seqs, classes);
  LabeledSet val;
  if (!a.val_manifest.empty()) val = labeled(load_features(read_manifest(a.val_manifest)), classes);

  Model model = build_model(
      with_dims(arch, static_cast<int>(train_seqs[0].frames.cols()),
                static_cast<int>(classes.size())),
      cfg.train.seed);
  model.class_names = classes;
  const FitResult r = fit(model, train, val, cfg.train);
  save_model(model, a.model_out);
  if (!a.curve_out.empty()) write_curve(r.curve, a.curve_out);

  const auto conv = converged_epoch(r.curve, a.threshold.value_or(0.99));
  double best_acc = 0.0;
  for (const auto &e : r.curve.epochs) best_acc = std::max(best_acc, e.train_acc);
  io.out << "converged_epoch " << (conv ? std::to_string(*conv) : "none") << '\n'
         << "best_train_acc " << fixed(best_acc, 4) << '\n'
         << "best_epoch " << r.best_epoch << '\n'
         << "epochs_run " << r.epochs_run << '\n';
  return kExitOk;
}

int cmd_embed(const std::string &model_path, const std::string &manifest,
              const std::string &out_path, Streams io) {
  const Model model = load_model(model_path);
  const Manifest m = read_manifest(manifest);
  std::vector<Embedding> out;
  for (auto &seq : load_features(m))
    out.push_back({seq.utt_id, seq.speaker_id == "-" ? "" : seq.speaker_id,
                   embed(model, seq.frames)});
  write_embeddings(out, out_path);
  io.out << "embedded " << out.size() << " utterances, dim "
         << (out.empty() ? 0 : out[0].vector.size()) << '\n';
  return kExitOk;
}

int cmd_lda(const std::string &emb_path, std::optional<std::size_t> dim,
            std::optional<double> shrinkage, const std::string &config,
            const std::string &out_path, Streams io) {
  RunConfig cfg = config_or_default(config);
  const auto embs = read_embeddings(emb_path);
  std::set<std::string> speakers;
  for (const auto &e : embs) speakers.insert(e.speaker_id);
  const std::size_t c = speakers.size();
  std::size_t d = dim.value_or(cfg.lda_dim);
  const std::size_t cap = std::min(c > 0 ? c - 1 : 0,
                                   embs.empty() ? std::size_t{0} : embs[0].vector.size());
  if (d == 0) d = cap;
  if (d > cap) {
    io.err << "warning: lda dim " << d << " capped at " << cap << '\n';
    d = cap;
  }
  LdaModel lda = lda_fit(embs, d, shrinkage ? shrinkage : cfg.shrinkage);
  write_lda(lda, out_path);
  io.out << "lda " << lda.input_dim() << " -> " << lda.dim() << " over " << c
         << " classes\n";
  return kExitOk;
}

int cmd_score(const std::string &trials_path, const std::string &emb_path,
              const std::string &lda_path, const std::string &out_path, Streams io) {
  const auto trials = read_trials(trials_path);
  auto embs = read_embeddings(emb_path);
  if (!lda_path.empty()) {
    const LdaModel lda = read_lda(lda_path);
    for (auto &e : embs) e = lda_project(lda, e);
  }
  const auto scored = score_trials(trials, embs);
  write_scores(scored, out_path);
  io.out << "scored " << scored.size() << " trials\n";
  return kExitOk;
}

int cmd_eer(const std::string &scores_path, const std::string &trials_path, Streams io) {
  auto scores = read_scores(scores_path);
  const auto trials = read_trials(trials_path);
  if (scores.size() != trials.size())
    throw ValidationError("eer: " + std::to_string(scores.size()) + " scores for " +
                          std::to_string(trials.size()) + " trials");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].trial.enroll_utt != trials[i].enroll_utt ||
        scores[i].trial.test_utt != trials[i].test_utt)
      throw ValidationError("eer: score row " + std::to_string(i + 1) +
                            " does not match the trial list");
    scores[i].trial.target = trials[i].target;
  }
  io.out << fixed(compute_eer(scores), 4) << '\n';
  return kExitOk;
}

int cmd_identify(const std::string &model_path, const std::string &manifest, Streams io) {
  const Model model = load_model(model_path);
  if (model.class_names.empty()) throw LabelError("model has no class names");
  std::vector<std::string> classes = model.class_names;
  std::sort(classes.begin(), classes.end());
  if (classes != model.class_names)
    throw LabelError("model class names are not in sorted order");
  const LabeledSet set = labeled(load_features(read_manifest(manifest)), classes);
  std::vector<Vector> logits;
  for (const Matrix &x : set.inputs) logits.push_back(predict(model, x));
  io.out << fixed(top1_accuracy(logits, set.labels), 4) << '\n';
  return kExitOk;
}

int cmd_trials(const std::string &manifest, const std::string &out_path,
               const std::string &mode, std::size_t pairs, std::uint64_t seed,
               Streams io) {
  const Manifest m = read_manifest(manifest);
  const auto trials = make_trials(
      m.entries, mode == "exhaustive" ? TrialMode::kExhaustive : TrialMode::kSampled,
      pairs, seed);
  write_trials(trials, out_path);
  const auto targets = std::count_if(trials.begin(), trials.end(),
                                     [](const Trial &t) { return t.target; });
  io.out << "wrote " << trials.size() << " trials (" << targets << " target)\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Crossed time-delay speaker recognition toolkit", "ctdnn"};
  app.require_subcommand(1);
  Streams io{out, err};
  std::function<int()> action;

  FeaturizeArgs fz;
  auto *featurize = app.add_subcommand("featurize", "WAV files to MFCC feature files");
  featurize->add_option("--wav-dir", fz.wav_dir, "directory of <speaker>/<utt>.wav")->required();
  featurize->add_option("--manifest-out", fz.manifest_out, "manifest to write")->required();
  featurize->add_option("--config", fz.config, "run configuration file");
  featurize->add_option("--length", fz.length, "frames per utterance (0 keeps native)");
  featurize->add_flag("--strict", fz.strict, "nonzero exit if any file fails");
  featurize->callback([&] { action = [&] { return cmd_featurize(fz, io); }; });

  std::string spec_file, out_dir;
  auto *synth = app.add_subcommand("synth", "write a synthetic corpus");
  synth->add_option("--spec-file", spec_file, "configuration with a [synth] section");
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  synth->callback([&] { action = [&] { return cmd_synth(spec_file, out_dir, io); }; });

  TrainArgs tr;
  auto *train = app.add_subcommand("train", "train a model");
  train->add_option("--manifest", tr.manifest, "training manifest")->required();
  train->add_option("--val-manifest", tr.val_manifest, "validation manifest");
  train->add_option("--arch", tr.arch, "tdnn-paper, ctdnn-paper or a DSL string");
  train->add_option("--width", tr.width, "preset width H");
  train->add_option("--config", tr.config, "run configuration file");
  train->add_option("--model-out", tr.model_out, "model file to write")->required();
  train->add_option("--curve-out", tr.curve_out, "learning-curve CSV to write");
  train->add_option("--lr", tr.lr, "learning rate (default 0.0001)");
  train->add_option("--batch-size", tr.batch_size, "batch size");
  train->add_option("--max-epochs", tr.max_epochs, "epoch limit");
  train->add_option("--patience", tr.patience, "early-stopping patience");
  train->add_option("--seed", tr.seed, "initialization and shuffling seed");
  train->add_option("--converge-threshold", tr.threshold,
                    "train accuracy that counts as converged (default 0.99)");
  train->callback([&] { action = [&] { return cmd_train(tr, io); }; });

  std::string model_path, manifest, out_path;
  auto *embed_cmd = app.add_subcommand("embed", "extract pooled embeddings");
  embed_cmd->add_option("--model", model_path, "model file")->required();
  embed_cmd->add_option("--manifest", manifest, "utterances to embed")->required();
  embed_cmd->add_option("--out", out_path, "embedding file to write")->required();
  embed_cmd->callback([&] {
    action = [&] { return cmd_embed(model_path, manifest, out_path, io); };
  });

  std::string emb_path, config;
  std::optional<std::size_t> lda_dim;
  std::optional<double> shrinkage;
  auto *lda = app.add_subcommand("lda", "fit an LDA projection");
  lda->add_option("--embeddings", emb_path, "labeled embedding file")->required();
  lda->add_option("--dim", lda_dim, "output dimension (default C - 1)");
  lda->add_option("--shrinkage", shrinkage, "within-class shrinkage lambda");
  lda->add_option("--config", config, "run configuration file");
  lda->add_option("--out", out_path, "LDA file to write")->required();
  lda->callback([&] {
    action = [&] { return cmd_lda(emb_path, lda_dim, shrinkage, config, out_path, io); };
  });

  std::string trials_path, lda_path;
  auto *score = app.add_subcommand("score", "cosine-score a trial list");
  score->add_option("--trials", trials_path, "trial list")->required();
  score->add_option("--embeddings", emb_path, "embedding file")->required();
  score->add_option("--lda", lda_path, "LDA file applied before scoring");
  score->add_option("--out", out_path, "score file to write")->required();
  score->callback([&] {
    action = [&] { return cmd_score(trials_path, emb_path, lda_path, out_path, io); };
  });

  std::string scores_path;
  auto *eer = app.add_subcommand("eer", "equal error rate of a score file");
  eer->add_option("--scores", scores_path, "score file")->required();
  eer->add_option("--trials", trials_path, "trial list with labels")->required();
  eer->callback([&] { action = [&] { return cmd_eer(scores_path, trials_path, io); }; });

  auto *identify = app.add_subcommand("identify", "closed-set top-1 accuracy");
  identify->add_option("--model", model_path, "model file")->required();
  identify->add_option("--manifest", manifest, "labeled utterances")->required();
  identify->callback([&] { action = [&] { return cmd_identify(model_path, manifest, io); }; });

  std::string mode = "sampled";
  std::size_t pairs = 5;
  std::uint64_t seed = 1;
  auto *trials = app.add_subcommand("trials", "build a verification trial list");
  trials->add_option("--manifest", manifest, "utterances to pair")->required();
  trials->add_option("--out", out_path, "trial list to write")->required();
  trials->add_option("--mode", mode, "sampled or exhaustive")
      ->check(CLI::IsMember({"sampled", "exhaustive"}));
  trials->add_option("--pairs-per-utt", pairs, "partners of each kind per utterance")
      ->check(CLI::PositiveNumber);
  trials->add_option("--seed", seed, "sampling seed");
  trials->callback([&] {
    action = [&] { return cmd_trials(manifest, out_path, mode, pairs, seed, io); };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    return action();
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SemanticError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace ctdnn
