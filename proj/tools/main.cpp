// Copyright 2026 The Auris Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Command-line entry point. Exit codes: 0 ok, 2 I/O, 3 config/usage,
// 4 data/precondition, 5 internal.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "auris/audio_io.hpp"
#include "auris/casa.hpp"
#include "auris/cascade.hpp"
#include "auris/dsp.hpp"
#include "auris/errors.hpp"
#include "auris/eval.hpp"
#include "auris/mfcc.hpp"
#include "auris/synth.hpp"

namespace {

using nlohmann::json;

auris::CascadeConfig load_config(const std::optional<std::string>& path) {
  auris::CascadeConfig config;
  if (!path) return config;
  json parsed;
  try {
    parsed = json::parse(auris::util::read_file_text(*path));
  } catch (const json::exception& e) {
    throw auris::ConfigError("bad config file: " + std::string(e.what()));
  }
  parsed.get_to(config);
  return config;
}

int run_segregate(const std::string& in_path, const std::string& out_path,
                  const std::optional<std::string>& config_path,
                  const std::optional<std::string>& diag_dir) {
  const auris::CascadeConfig config = load_config(config_path);
  const auris::AudioClip clip = auris::read_wav(in_path);
  auto [separated, diag] = auris::segregate(clip, config.casa);
  auris::write_wav(separated, out_path);

  if (diag_dir) {
    std::filesystem::create_directories(*diag_dir);
    const std::filesystem::path dir(*diag_dir);
    auris::util::write_file_bytes(
        dir / "ibm.bin",
        std::span<const std::uint8_t>(diag.ibm.bits.data(), diag.ibm.bits.size()));
    auris::util::write_file_text(
        dir / "ibm.json",
        json{{"frames", diag.ibm.frames}, {"channels", diag.ibm.channels}}.dump(2) + "\n");
    auris::util::write_file_text(
        dir / "fmask.json",
        json{{"gains", diag.fmask.gains},
             {"target_energy", diag.energies.target},
             {"interference_energy", diag.energies.interference},
             {"passthrough", diag.passthrough}}
                .dump(2) +
            "\n");
    auris::util::write_file_text(
        dir / "pitch.json",
        json{{"f0_hz", diag.pitch.f0},
             {"voicing", diag.pitch.voicing},
             {"voiced_frames", diag.voiced_frames}}
                .dump(2) +
            "\n");
  }
  std::cout << json{{"input", in_path},
                    {"output", out_path},
                    {"voiced_frames", diag.voiced_frames},
                    {"passthrough", diag.passthrough}}
                   .dump()
            << "\n";
  return 0;
}

int run_features(const std::string& in_path, const std::string& out_path,
                 const std::optional<std::string>& config_path) {
  const auris::CascadeConfig config = load_config(config_path);
  const auris::AudioClip clip = auris::read_wav(in_path);
  const auris::FeatureMatrix features = auris::mfcc_features(clip, config.mfcc);
  auris::write_features(features, out_path);
  std::cout << json{{"rows", features.features.rows}, {"cols", features.features.cols}}.dump()
            << "\n";
  return 0;
}

int run_train(const std::string& manifest_path, const std::string& out_dir,
              const std::optional<std::string>& config_path, std::uint64_t seed) {
  const auris::CascadeConfig config = load_config(config_path);
  const auto entries = auris::load_manifest(manifest_path);
  const auris::SystemModel model = auris::train_system(entries, config, seed);
  auris::save_system(model, out_dir);
  std::cout << json{{"model_dir", out_dir},
                    {"speakers", model.speakers},
                    {"emotions", model.emotions},
                    {"tags", model.bank.tags.size()},
                    {"train_gmm_top1", model.train_gmm_top1},
                    {"cnn_final_loss", model.cnn.meta.final_loss}}
                   .dump()
            << "\n";
  return 0;
}

int run_identify(const std::string& in_path, const std::string& model_dir, bool no_casa) {
  const auris::SystemModel model = auris::load_system(model_dir);
  const auris::AudioClip clip = auris::read_wav(in_path);
  const bool use_casa = model.config.casa_test && !no_casa;
  const auris::IdentificationResult result = auris::identify(clip, model, use_casa);
  std::cout << json{{"speaker", result.speaker},
                    {"emotion", result.emotion},
                    {"confidence", result.confidence}}
                   .dump()
            << "\n";
  return 0;
}

std::string trials_to_jsonl(const std::vector<auris::TrialRecord>& trials) {
  std::string text;
  for (const auto& t : trials) {
    json line{{"true_speaker", t.true_speaker},
              {"predicted_speaker", t.predicted_speaker},
              {"scores", t.scores}};
    if (t.true_emotion) line["true_emotion"] = *t.true_emotion;
    if (t.predicted_emotion) line["predicted_emotion"] = *t.predicted_emotion;
    text += line.dump();
    text += '\n';
  }
  return text;
}

int run_evaluate(const std::string& manifest_path, const std::string& model_dir,
                 const std::vector<std::string>& mode_names, double alpha,
                 const std::optional<std::string>& out_path,
                 const std::optional<std::string>& trials_prefix) {
  const auris::SystemModel model = auris::load_system(model_dir);
  const auto entries = auris::load_manifest(manifest_path);

  std::vector<std::string> names = mode_names;
  if (names.empty()) names.push_back("gmm_cnn");

  json rows = json::array();
  std::vector<std::vector<auris::TrialRecord>> all_trials;
  std::optional<double> gmm_only_seconds;
  for (const auto& name : names) {
    const auris::AblateMode mode = auris::ablate_mode_from_string(name);
    std::optional<bool> casa_override;
    auris::AblateMode rule = mode;
    if (mode == auris::AblateMode::casa_on) {
      casa_override = true;
      rule = auris::AblateMode::gmm_cnn;
    } else if (mode == auris::AblateMode::casa_off) {
      casa_override = false;
      rule = auris::AblateMode::gmm_cnn;
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto trials = auris::run_trials(model, entries, rule, casa_override);
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
    const auris::EvalReport report = auris::evaluate(trials, alpha);
    if (mode == auris::AblateMode::gmm_only) gmm_only_seconds = seconds;

    std::cout << "== mode " << name << " ==\n" << auris::eval_report_to_table(report);
    rows.push_back(json{{"mode", name},
                        {"report", auris::eval_report_to_json(report)},
                        {"wall_seconds", seconds}});
    if (trials_prefix) {
      auris::util::write_file_text(*trials_prefix + "." + name + ".jsonl",
                                   trials_to_jsonl(trials));
    }
    all_trials.push_back(std::move(trials));
  }
  if (gmm_only_seconds && *gmm_only_seconds > 0.0) {
    for (auto& row : rows) {
      row["cost_ratio"] = row["wall_seconds"].get<double>() / *gmm_only_seconds;
    }
  }

  json output{{"rows", rows}, {"alpha", alpha}};
  if (names.size() == 2) {
    const auto cells_a = auris::per_cell_sid(all_trials[0]);
    const auto cells_b = auris::per_cell_sid(all_trials[1]);
    std::vector<double> a, b;
    for (const auto& [key, sid] : cells_a) {
      const auto it = cells_b.find(key);
      if (it != cells_b.end()) {
        a.push_back(sid);
        b.push_back(it->second);
      }
    }
    try {
      const auris::WilcoxonResult w = auris::wilcoxon_signed_rank(a, b, alpha);
      output["wilcoxon"] = {{"w", w.w},        {"p", w.p},
                            {"different", w.different}, {"n_used", w.n_used},
                            {"sign", w.sign},  {"exact", w.exact}};
      std::cout << "wilcoxon(" << names[0] << " vs " << names[1] << "): p=" << w.p
                << " different=" << (w.different ? "yes" : "no") << " sign=" << w.sign << "\n";
    } catch (const auris::DegenerateError& e) {
      output["wilcoxon"] = {{"degenerate", true}, {"reason", e.what()}};
      std::cout << "wilcoxon: degenerate (" << e.what() << ")\n";
    }
  }
  if (out_path) {
    auris::util::write_file_text(*out_path, output.dump(2) + "\n");
  }
  return 0;
}

int run_synth(const std::string& out_dir, int speakers, int emotions, int utterances,
              std::uint64_t seed, int sample_rate, double mix_ratio, double train_fraction) {
  auris::SynthConfig config;
  config.n_speakers = speakers;
  config.n_emotions = emotions;
  config.n_utterances = utterances;
  config.seed = seed;
  config.sample_rate = sample_rate;
  config.mix_ratio = mix_ratio;
  config.train_fraction = train_fraction;
  const auris::SynthDataset dataset = auris::synth_dataset(config, out_dir);
  std::cout << json{{"manifest", dataset.manifest_path.string()},
                    {"files", dataset.entries.size()}}
                   .dump()
            << "\n";
  return 0;
}

int run_config(bool print_defaults) {
  if (print_defaults) {
    const auris::CascadeConfig defaults;
    std::cout << json(defaults).dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speaker identification toolkit: modulation-domain separation front end, "
               "MFCC features, cascaded GMM-CNN classification"};
  app.require_subcommand(1);

  // segregate
  std::string seg_in, seg_out;
  std::optional<std::string> seg_config, seg_diag;
  auto* segregate = app.add_subcommand("segregate", "suppress co-channel noise in a WAV file");
  segregate->add_option("input", seg_in, "input wav")->required();
  segregate->add_option("output", seg_out, "output wav")->required();
  segregate->add_option("--config", seg_config, "config JSON");
  segregate->add_option("--dump-diagnostics", seg_diag, "directory for masks/pitch/energies");

  // features
  std::string feat_in, feat_out;
  std::optional<std::string> feat_config;
  auto* features = app.add_subcommand("features", "dump MFCC features (raw f64 + JSON sidecar)");
  features->add_option("input", feat_in, "input wav")->required();
  features->add_option("output", feat_out, "output feature file")->required();
  features->add_option("--config", feat_config, "config JSON");

  // train
  std::string train_manifest, train_out;
  std::optional<std::string> train_config;
  std::uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train", "train a system bundle from a manifest");
  train->add_option("manifest", train_manifest, "JSON-lines manifest")->required();
  train->add_option("out_dir", train_out, "bundle output directory")->required();
  train->add_option("--config", train_config, "config JSON");
  train->add_option("--seed", train_seed, "training seed");

  // identify
  std::string id_in, id_model;
  bool id_no_casa = false;
  auto* identify = app.add_subcommand("identify", "identify the speaker of a WAV file");
  identify->add_option("input", id_in, "input wav")->required();
  identify->add_option("model_dir", id_model, "trained bundle directory")->required();
  identify->add_flag("--no-casa", id_no_casa, "skip the separation front end");

  // evaluate
  std::string eval_manifest, eval_model;
  std::vector<std::string> eval_modes;
  double eval_alpha = 0.10;
  std::optional<std::string> eval_out, eval_trials;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a bundle on a manifest's test split");
  evaluate->add_option("manifest", eval_manifest, "JSON-lines manifest")->required();
  evaluate->add_option("model_dir", eval_model, "trained bundle directory")->required();
  evaluate->add_option("--modes", eval_modes,
                       "comma-separated: gmm_only,cnn_only,gmm_cnn,casa_on,casa_off")
      ->delimiter(',');
  evaluate->add_option("--alpha", eval_alpha, "significance level (default 0.10)");
  evaluate->add_option("--out", eval_out, "write the full report JSON here");
  evaluate->add_option("--trials", eval_trials, "prefix for per-mode trial JSONL logs");

  // synth
  std::string synth_out;
  int synth_speakers = 4, synth_emotions = 2, synth_utts = 6, synth_rate = 8000;
  std::uint64_t synth_seed = 0;
  double synth_mix = 0.0, synth_train_fraction = 0.6;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with a manifest");
  synth->add_option("out_dir", synth_out, "dataset output directory")->required();
  synth->add_option("--speakers", synth_speakers, "number of speakers");
  synth->add_option("--emotions", synth_emotions, "number of talking conditions");
  synth->add_option("--utterances", synth_utts, "utterances per (speaker, condition)");
  synth->add_option("--seed", synth_seed, "dataset seed");
  synth->add_option("--sample-rate", synth_rate, "sample rate in Hz");
  synth->add_option("--mix-noise", synth_mix,
                    "mix white noise into the test split at this energy ratio (0 = off)");
  synth->add_option("--train-fraction", synth_train_fraction, "fraction of utterances for train");

  // config
  bool print_defaults = false;
  auto* config_cmd = app.add_subcommand("config", "configuration helpers");
  config_cmd->add_flag("--print-defaults", print_defaults, "print the default config JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 3;
  }

  try {
    if (*segregate) return run_segregate(seg_in, seg_out, seg_config, seg_diag);
    if (*features) return run_features(feat_in, feat_out, feat_config);
    if (*train) return run_train(train_manifest, train_out, train_config, train_seed);
    if (*identify) return run_identify(id_in, id_model, id_no_casa);
    if (*evaluate)
      return run_evaluate(eval_manifest, eval_model, eval_modes, eval_alpha, eval_out,
                          eval_trials);
    if (*synth)
      return run_synth(synth_out, synth_speakers, synth_emotions, synth_utts, synth_seed,
                       synth_rate, synth_mix, synth_train_fraction);
    if (*config_cmd) return run_config(print_defaults);
  } catch (const auris::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const auris::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const auris::UnsupportedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const auris::CorruptModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const auris::VersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const auris::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const auris::ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const auris::Error& e) {
    // Data-level problems: schema violations, degenerate signals, short input.
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 5;
  }
  return 0;
}
