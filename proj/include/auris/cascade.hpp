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
// End-to-end orchestration: train the per-(speaker, emotion) tag bank and
// the CNN from a manifest, persist/load the bundle, identify utterances with
// or without the separation front end, and run ablation comparisons.

#ifndef AURIS_CASCADE_HPP
#define AURIS_CASCADE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "auris/audio_io.hpp"
#include "auris/casa.hpp"
#include "auris/cnn.hpp"
#include "auris/errors.hpp"
#include "auris/eval.hpp"
#include "auris/gmm.hpp"
#include "auris/mfcc.hpp"
#include "auris/util.hpp"

namespace auris {

struct CascadeConfig {
  CasaConfig casa;
  bool casa_train = true;
  bool casa_test = true;
  MfccConfig mfcc;
  TrainOptions gmm;  // per-tag EM options; seed is derived per tag
  CnnSpec cnn;
  CnnHyper cnn_hyper;
  GatingConfig gating;
};

inline void to_json(nlohmann::json& j, const CascadeConfig& c) {
  j = nlohmann::json{{"casa", c.casa},
                     {"casa_train", c.casa_train},
                     {"casa_test", c.casa_test},
                     {"mfcc", c.mfcc},
                     {"gmm",
                      {{"components", c.gmm.components},
                       {"tol", c.gmm.tol},
                       {"max_iter", c.gmm.max_iter},
                       {"variance_floor", c.gmm.variance_floor}}},
                     {"cnn", c.cnn},
                     {"cnn_hyper", c.cnn_hyper},
                     {"gating", c.gating}};
}

inline void from_json(const nlohmann::json& j, CascadeConfig& c) {
  if (j.contains("casa")) j.at("casa").get_to(c.casa);
  c.casa_train = j.value("casa_train", c.casa_train);
  c.casa_test = j.value("casa_test", c.casa_test);
  if (j.contains("mfcc")) j.at("mfcc").get_to(c.mfcc);
  if (j.contains("gmm")) {
    const auto& g = j.at("gmm");
    c.gmm.components = g.value("components", c.gmm.components);
    c.gmm.tol = g.value("tol", c.gmm.tol);
    c.gmm.max_iter = g.value("max_iter", c.gmm.max_iter);
    c.gmm.variance_floor = g.value("variance_floor", c.gmm.variance_floor);
  }
  if (j.contains("cnn")) j.at("cnn").get_to(c.cnn);
  if (j.contains("cnn_hyper")) j.at("cnn_hyper").get_to(c.cnn_hyper);
  if (j.contains("gating")) j.at("gating").get_to(c.gating);
}

inline constexpr const char* kSystemVersion = "auris-1";

struct SystemModel {
  std::string version = kSystemVersion;
  CascadeConfig config;
  TagBank bank;
  CnnModel cnn;
  std::vector<std::string> speakers;  // CNN class order
  std::vector<std::string> emotions;
  std::string manifest_sha256;
  std::uint64_t seed = 0;
  double train_gmm_top1 = 0.0;  // tag-bank self-consistency on the train split

  void validate() const {
    if (speakers.size() < 2) throw DataError("system needs at least two speakers");
    if (bank.dim != config.mfcc.feature_dim()) {
      throw ShapeError("tag bank dimension does not match feature extractor");
    }
    if (cnn.spec.n_classes != static_cast<int>(speakers.size())) {
      throw ShapeError("CNN class count does not match speaker list");
    }
    if (cnn.spec.input_rows != config.mfcc.feature_dim()) {
      throw ShapeError("CNN input rows do not match feature dimension");
    }
  }
};

struct IdentificationResult {
  std::string speaker;
  std::string emotion;
  double confidence = 0.0;
  LikelihoodVector likelihoods;
  std::vector<double> gated_probs;
  bool casa_used = false;
  bool padded = false;
};

namespace cascade_detail {

struct PreparedUtterance {
  ManifestEntry entry;
  FeatureMatrix features;
};

inline FeatureMatrix extract_features(const AudioClip& clip, const CascadeConfig& config,
                                      bool use_casa) {
  const AudioClip* input = &clip;
  AudioClip separated;
  if (use_casa) {
    separated = segregate(clip, config.casa).first;
    input = &separated;
  }
  try {
    return mfcc_features(*input, config.mfcc);
  } catch (const EmptyFeatureError& e) {
    throw InputTooShortError(e.what());
  }
}

inline std::vector<PreparedUtterance> prepare_split(const std::vector<ManifestEntry>& entries,
                                                    const CascadeConfig& config, Split split,
                                                    bool use_casa) {
  std::vector<const ManifestEntry*> wanted;
  for (const auto& e : entries) {
    if (e.split == split) wanted.push_back(&e);
  }
  std::vector<PreparedUtterance> prepared(wanted.size());
  util::parallel_for(wanted.size(), [&](std::size_t i) {
    const ManifestEntry& entry = *wanted[i];
    AudioClip clip = read_wav(entry.path);
    prepared[i].entry = entry;
    try {
      prepared[i].features = extract_features(clip, config, use_casa);
    } catch (const InputTooShortError&) {
      throw DataError("utterance too short for one frame: " + entry.path.string() +
                      " (speaker " + entry.speaker_id + ")");
    }
  });
  return prepared;
}

inline std::string manifest_digest(const std::vector<ManifestEntry>& entries) {
  std::string acc;
  for (const auto& e : entries) {
    acc += e.path.string();
    acc += '|';
    acc += e.speaker_id;
    acc += '|';
    acc += e.emotion;
    acc += '|';
    acc += to_string(e.split);
    acc += '\n';
  }
  return util::sha256_hex(acc);
}

}  // namespace cascade_detail

// Trains the whole cascade from the manifest's train split: optional
// separation, feature extraction, one GMM tag per (speaker, emotion)
// present, normalization statistics, patch building and CNN training.
inline SystemModel train_system(const std::vector<ManifestEntry>& entries,
                                const CascadeConfig& config, std::uint64_t seed) {
  using cascade_detail::PreparedUtterance;

  auto prepared =
      cascade_detail::prepare_split(entries, config, Split::train, config.casa_train);
  if (prepared.empty()) throw DataError("manifest has no train utterances");

  std::set<std::string> speaker_set;
  for (const auto& p : prepared) speaker_set.insert(p.entry.speaker_id);
  if (speaker_set.size() < 2) throw DataError("training needs at least two speakers");

  SystemModel model;
  model.config = config;
  model.seed = seed;
  model.manifest_sha256 = cascade_detail::manifest_digest(entries);
  model.speakers.assign(speaker_set.begin(), speaker_set.end());

  const int dim = config.mfcc.feature_dim();

  // Pool frames per (speaker, emotion).
  std::map<TagKey, Matrix> pooled;
  for (const auto& p : prepared) {
    if (static_cast<int>(p.features.features.cols) != dim) {
      throw ShapeError("unexpected feature dimension");
    }
    Matrix& pool = pooled[TagKey{p.entry.speaker_id, p.entry.emotion}];
    if (pool.cols == 0) pool.cols = dim;
    pool.data.insert(pool.data.end(), p.features.features.data.begin(),
                     p.features.features.data.end());
    pool.rows += p.features.features.rows;
  }
  for (const auto& speaker : model.speakers) {
    bool has_frames = false;
    for (const auto& [key, pool] : pooled) {
      if (key.speaker == speaker && pool.rows > 0) has_frames = true;
    }
    if (!has_frames) throw DataError("speaker has zero usable frames: " + speaker);
  }

  // Per-tag GMMs, trained in parallel; each tag gets its own derived seed so
  // results do not depend on scheduling.
  model.bank.dim = dim;
  std::vector<std::pair<TagKey, const Matrix*>> jobs;
  for (const auto& [key, pool] : pooled) jobs.emplace_back(key, &pool);
  std::vector<GmmTag> tags(jobs.size());
  util::parallel_for(jobs.size(), [&](std::size_t i) {
    TrainOptions options = config.gmm;
    options.components =
        std::min<int>(options.components, static_cast<int>(jobs[i].second->rows));
    options.seed = Rng::seeded(seed)
                       .fork("gmm/" + jobs[i].first.speaker + "/" + jobs[i].first.emotion)
                       .next_u64();
    tags[i] = train_gmm(*jobs[i].second, options).tag;
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    model.bank.tags.emplace(jobs[i].first, std::move(tags[i]));
  }
  model.emotions = model.bank.emotions();

  // Normalization statistics over all training frames, per feature row.
  std::vector<double> mean(dim, 0.0), stddev(dim, 0.0);
  std::size_t total_frames = 0;
  for (const auto& [key, pool] : pooled) total_frames += pool.rows;
  for (const auto& [key, pool] : pooled) {
    for (std::size_t t = 0; t < pool.rows; ++t) {
      const auto row = pool.row(t);
      for (int d = 0; d < dim; ++d) mean[d] += row[d];
    }
  }
  for (int d = 0; d < dim; ++d) mean[d] /= static_cast<double>(total_frames);
  for (const auto& [key, pool] : pooled) {
    for (std::size_t t = 0; t < pool.rows; ++t) {
      const auto row = pool.row(t);
      for (int d = 0; d < dim; ++d) {
        const double diff = row[d] - mean[d];
        stddev[d] += diff * diff;
      }
    }
  }
  for (int d = 0; d < dim; ++d) {
    stddev[d] = std::max(std::sqrt(stddev[d] / static_cast<double>(total_frames)), 1e-6);
  }

  // Training patches, labels, and per-utterance likelihood vectors.
  CnnSpec spec = config.cnn;
  spec.input_rows = dim;
  spec.n_classes = static_cast<int>(model.speakers.size());
  spec.validate();

  std::vector<Matrix> patches;
  std::vector<int> labels;
  std::size_t gmm_correct = 0;
  for (const auto& p : prepared) {
    const int label = static_cast<int>(
        std::distance(model.speakers.begin(),
                      std::find(model.speakers.begin(), model.speakers.end(),
                                p.entry.speaker_id)));
    PatchSet set = tile_windows(p.features, spec.input_cols);
    for (auto& patch : set.patches) {
      for (std::size_t r = 0; r < patch.rows; ++r) {
        for (std::size_t c = 0; c < patch.cols; ++c) {
          patch.at(r, c) = (patch.at(r, c) - mean[r]) / stddev[r];
        }
      }
      patches.push_back(std::move(patch));
      labels.push_back(label);
    }
    if (identify_speaker_gmm(p.features, model.bank).first == p.entry.speaker_id) {
      ++gmm_correct;
    }
  }
  model.train_gmm_top1 = static_cast<double>(gmm_correct) / prepared.size();

  CnnHyper hyper = config.cnn_hyper;
  hyper.seed = Rng::seeded(seed).fork("cnn").next_u64();
  model.cnn = train_cnn(patches, labels, spec, hyper);
  model.cnn.meta.input_mean = mean;
  model.cnn.meta.input_std = stddev;

  if (config.gating.mode == GatingConfig::Mode::topk && config.gating.k <= 0) {
    model.config.gating.k = GatingConfig::default_k(spec.n_classes);
  }

  model.validate();
  return model;
}

// Identification: optional separation, features, GMM likelihood vector,
// gated CNN decision; the emotion is read from the decided speaker's tags.
inline IdentificationResult identify(const AudioClip& clip, const SystemModel& model,
                                     bool use_casa) {
  model.validate();
  IdentificationResult result;
  result.casa_used = use_casa;

  const FeatureMatrix features =
      cascade_detail::extract_features(clip, model.config, use_casa);
  result.likelihoods = tag_likelihood_vector(features, model.bank);

  const ClassifyResult decision =
      classify(features, model.cnn, result.likelihoods, model.config.gating, model.speakers);
  result.speaker = decision.speaker;
  result.confidence = decision.confidence;
  result.gated_probs = decision.avg_probs;
  result.padded = decision.padded;

  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.likelihoods.keys.size(); ++i) {
    if (result.likelihoods.keys[i].speaker != result.speaker) continue;
    if (result.likelihoods.avg_log_lik[i] > best) {
      best = result.likelihoods.avg_log_lik[i];
      result.emotion = result.likelihoods.keys[i].emotion;
    }
  }
  return result;
}

inline void save_system(const SystemModel& model, const std::filesystem::path& dir) {
  model.validate();
  std::filesystem::create_directories(dir);

  const std::string bank_text = tag_bank_to_json(model.bank).dump(2) + "\n";
  util::write_file_text(dir / "gmm_bank.json", bank_text);

  const std::vector<double> blob = model.cnn.params.flattened();
  util::write_f64_blob(dir / "cnn.bin", blob);
  const std::string blob_sha = util::sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size() * sizeof(double)));

  nlohmann::json cnn_json{{"spec", model.cnn.spec},
                          {"seed", model.cnn.meta.seed},
                          {"epochs", model.cnn.meta.epochs},
                          {"final_loss", model.cnn.meta.final_loss},
                          {"loss_trace", model.cnn.meta.loss_trace},
                          {"input_mean", model.cnn.meta.input_mean},
                          {"input_std", model.cnn.meta.input_std},
                          {"blob_sha256", blob_sha}};
  const std::string cnn_text = cnn_json.dump(2) + "\n";
  util::write_file_text(dir / "cnn.json", cnn_text);

  nlohmann::json system_json{
      {"version", model.version},
      {"config", model.config},
      {"speakers", model.speakers},
      {"emotions", model.emotions},
      {"manifest_sha256", model.manifest_sha256},
      {"seed", model.seed},
      {"train_gmm_top1", model.train_gmm_top1},
      {"hashes",
       {{"gmm_bank.json", util::sha256_hex(bank_text)},
        {"cnn.json", util::sha256_hex(cnn_text)},
        {"cnn.bin", blob_sha}}}};
  util::write_file_text(dir / "system.json", system_json.dump(2) + "\n");
}

inline SystemModel load_system(const std::filesystem::path& dir) {
  nlohmann::json system_json;
  try {
    system_json = nlohmann::json::parse(util::read_file_text(dir / "system.json"));
  } catch (const IoError&) {
    throw CorruptModelError("missing system.json in " + dir.string());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModelError(std::string("bad system.json: ") + e.what());
  }

  SystemModel model;
  try {
    model.version = system_json.at("version").get<std::string>();
    if (model.version != kSystemVersion) {
      throw VersionError("unsupported bundle version: " + model.version);
    }
    system_json.at("config").get_to(model.config);
    model.speakers = system_json.at("speakers").get<std::vector<std::string>>();
    model.emotions = system_json.at("emotions").get<std::vector<std::string>>();
    model.manifest_sha256 = system_json.value("manifest_sha256", std::string());
    model.seed = system_json.value("seed", std::uint64_t{0});
    model.train_gmm_top1 = system_json.value("train_gmm_top1", 0.0);

    const auto hashes = system_json.at("hashes");
    for (const std::string name : {"gmm_bank.json", "cnn.json", "cnn.bin"}) {
      std::vector<std::uint8_t> bytes;
      try {
        bytes = util::read_file_bytes(dir / name);
      } catch (const IoError&) {
        throw CorruptModelError("missing bundle file: " + name);
      }
      if (util::sha256_hex(bytes) != hashes.at(name).get<std::string>()) {
        throw CorruptModelError("hash mismatch for bundle file: " + name);
      }
    }

    model.bank = tag_bank_from_json(
        nlohmann::json::parse(util::read_file_text(dir / "gmm_bank.json")));

    const nlohmann::json cnn_json =
        nlohmann::json::parse(util::read_file_text(dir / "cnn.json"));
    CnnSpec spec = cnn_json.at("spec").get<CnnSpec>();
    model.cnn = init_cnn(spec, cnn_json.value("seed", std::uint64_t{0}));
    model.cnn.meta.epochs = cnn_json.value("epochs", 0);
    model.cnn.meta.final_loss = cnn_json.value("final_loss", 0.0);
    model.cnn.meta.loss_trace = cnn_json.value("loss_trace", std::vector<double>{});
    model.cnn.meta.input_mean = cnn_json.value("input_mean", std::vector<double>{});
    model.cnn.meta.input_std = cnn_json.value("input_std", std::vector<double>{});
    const std::vector<double> blob = util::read_f64_blob(dir / "cnn.bin");
    model.cnn.params.load_flat(blob);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModelError(std::string("bad bundle contents: ") + e.what());
  }

  model.validate();
  return model;
}

enum class AblateMode { gmm_only, cnn_only, gmm_cnn, casa_on, casa_off };

inline std::string to_string(AblateMode m) {
  switch (m) {
    case AblateMode::gmm_only: return "gmm_only";
    case AblateMode::cnn_only: return "cnn_only";
    case AblateMode::gmm_cnn: return "gmm_cnn";
    case AblateMode::casa_on: return "casa_on";
    case AblateMode::casa_off: return "casa_off";
  }
  return "?";
}

inline AblateMode ablate_mode_from_string(const std::string& s) {
  if (s == "gmm_only") return AblateMode::gmm_only;
  if (s == "cnn_only") return AblateMode::cnn_only;
  if (s == "gmm_cnn") return AblateMode::gmm_cnn;
  if (s == "casa_on") return AblateMode::casa_on;
  if (s == "casa_off") return AblateMode::casa_off;
  throw ConfigError("unknown ablation mode: " + s);
}

struct AblationRow {
  std::string mode;
  EvalReport report;
  std::vector<TrialRecord> trials;
  double wall_seconds = 0.0;
  std::optional<double> cost_ratio;  // relative to gmm_only when present
  double train_seconds = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

// Evaluates one decision rule over the test split of a trained system.
// use_casa overrides the system's test-time separation flag when set.
inline std::vector<TrialRecord> run_trials(const SystemModel& model,
                                           const std::vector<ManifestEntry>& entries,
                                           AblateMode mode,
                                           std::optional<bool> use_casa = std::nullopt) {
  std::vector<const ManifestEntry*> test_entries;
  for (const auto& e : entries) {
    if (e.split == Split::test) test_entries.push_back(&e);
  }
  if (test_entries.empty()) throw DataError("manifest has no test utterances");

  const bool casa = use_casa.value_or(model.config.casa_test);
  std::vector<TrialRecord> trials(test_entries.size());
  util::parallel_for(test_entries.size(), [&](std::size_t i) {
    const ManifestEntry& entry = *test_entries[i];
    const AudioClip clip = read_wav(entry.path);
    const FeatureMatrix features =
        cascade_detail::extract_features(clip, model.config, casa);
    const LikelihoodVector lv = tag_likelihood_vector(features, model.bank);

    TrialRecord trial;
    trial.true_speaker = entry.speaker_id;
    trial.true_emotion = entry.emotion;

    if (mode == AblateMode::gmm_only) {
      const auto scores = lv.by_speaker();
      trial.scores = scores;
      std::string best;
      double best_score = -std::numeric_limits<double>::infinity();
      for (const auto& [speaker, score] : scores) {
        if (score > best_score) {
          best_score = score;
          best = speaker;
        }
      }
      trial.predicted_speaker = best;
      trial.predicted_emotion = recognize_emotion_gmm(features, model.bank);
    } else {
      GatingConfig gating = model.config.gating;
      if (mode == AblateMode::cnn_only) gating.mode = GatingConfig::Mode::off;
      const ClassifyResult decision =
          classify(features, model.cnn, lv, gating, model.speakers);
      trial.predicted_speaker = decision.speaker;
      for (std::size_t s = 0; s < model.speakers.size(); ++s) {
        trial.scores[model.speakers[s]] = decision.avg_probs[s];
      }
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < lv.keys.size(); ++k) {
        if (lv.keys[k].speaker != decision.speaker) continue;
        if (lv.avg_log_lik[k] > best) {
          best = lv.avg_log_lik[k];
          trial.predicted_emotion = lv.keys[k].emotion;
        }
      }
    }
    trials[i] = std::move(trial);
  });
  return trials;
}

// SID per (speaker, emotion) cell; the pairing unit for Wilcoxon comparisons.
inline std::map<std::pair<std::string, std::string>, double> per_cell_sid(
    const std::vector<TrialRecord>& trials) {
  std::map<std::pair<std::string, std::string>, std::pair<long, long>> cells;
  for (const auto& t : trials) {
    auto& [correct, total] = cells[{t.true_speaker, t.true_emotion.value_or("")}];
    if (t.predicted_speaker == t.true_speaker) ++correct;
    ++total;
  }
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& [key, counts] : cells) {
    out[key] = 100.0 * static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return out;
}

// Runs the requested modes over the manifest's test split. Classifier modes
// share one base system; the casa_on/casa_off modes train their own variants
// with the separation front end enabled or disabled in both phases, matching
// train/test consistency. Wall-clock ratios are relative to gmm_only.
inline AblationReport ablate(const std::vector<ManifestEntry>& entries,
                             const CascadeConfig& config, const std::vector<AblateMode>& modes,
                             std::uint64_t seed, double alpha = 0.10) {
  using clock = std::chrono::steady_clock;
  AblationReport report;
  if (modes.empty()) return report;

  const bool wants_classifier_modes =
      std::any_of(modes.begin(), modes.end(), [](AblateMode m) {
        return m == AblateMode::gmm_only || m == AblateMode::cnn_only ||
               m == AblateMode::gmm_cnn;
      });

  std::optional<SystemModel> base;
  std::optional<SystemModel> casa_on_model, casa_off_model;
  double base_train_seconds = 0.0, on_train_seconds = 0.0, off_train_seconds = 0.0;

  auto train_variant = [&](bool casa_enabled, double& seconds) {
    CascadeConfig variant = config;
    variant.casa_train = variant.casa_test = casa_enabled;
    const auto t0 = clock::now();
    SystemModel model = train_system(entries, variant, seed);
    seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return model;
  };

  if (wants_classifier_modes) {
    const auto t0 = clock::now();
    base = train_system(entries, config, seed);
    base_train_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  }
  for (AblateMode m : modes) {
    if (m == AblateMode::casa_on && !casa_on_model) {
      if (base && config.casa_train && config.casa_test) {
        casa_on_model = base;
        on_train_seconds = base_train_seconds;
      } else {
        casa_on_model = train_variant(true, on_train_seconds);
      }
    }
    if (m == AblateMode::casa_off && !casa_off_model) {
      if (base && !config.casa_train && !config.casa_test) {
        casa_off_model = base;
        off_train_seconds = base_train_seconds;
      } else {
        casa_off_model = train_variant(false, off_train_seconds);
      }
    }
  }

  std::optional<double> gmm_only_seconds;
  for (AblateMode m : modes) {
    AblationRow row;
    row.mode = to_string(m);
    const auto t0 = clock::now();
    switch (m) {
      case AblateMode::gmm_only:
      case AblateMode::cnn_only:
      case AblateMode::gmm_cnn:
        row.trials = run_trials(*base, entries, m);
        row.train_seconds = base_train_seconds;
        break;
      case AblateMode::casa_on:
        row.trials = run_trials(*casa_on_model, entries, AblateMode::gmm_cnn, true);
        row.train_seconds = on_train_seconds;
        break;
      case AblateMode::casa_off:
        row.trials = run_trials(*casa_off_model, entries, AblateMode::gmm_cnn, false);
        row.train_seconds = off_train_seconds;
        break;
    }
    row.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    row.report = evaluate(row.trials, alpha);
    if (m == AblateMode::gmm_only) gmm_only_seconds = row.wall_seconds;
    report.rows.push_back(std::move(row));
  }
  if (gmm_only_seconds && *gmm_only_seconds > 0.0) {
    for (auto& row : report.rows) {
      row.cost_ratio = row.wall_seconds / *gmm_only_seconds;
    }
  }
  return report;
}

}  // namespace auris

#endif  // AURIS_CASCADE_HPP
