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

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "auris/cascade.hpp"
#include "auris/synth.hpp"
#include "support/test_util.hpp"

using namespace auris;
using auris_test::TempDir;

namespace {

// Small fast configuration shared by the cascade tests: separation disabled,
// light mixtures and a narrow CNN.
CascadeConfig fast_config() {
  CascadeConfig config;
  config.casa_train = false;
  config.casa_test = false;
  config.gmm.components = 4;
  config.gmm.tol = 1e-4;
  config.gmm.max_iter = 50;
  config.cnn.input_cols = 16;
  config.cnn.blocks = {{3, 3, 4, 1}};
  config.cnn.fc_hidden = {16};
  config.cnn_hyper.epochs = 12;
  config.cnn_hyper.learning_rate = 0.03;
  config.cnn_hyper.seed = 0;
  config.gating.mode = GatingConfig::Mode::topk;
  config.gating.k = 2;
  return config;
}

struct Fixture {
  TempDir dir;
  SynthDataset dataset;

  explicit Fixture(int speakers, int emotions, int utterances, std::uint64_t seed,
                   double mix = 0.0)
      : dir("cascade") {
    SynthConfig config;
    config.n_speakers = speakers;
    config.n_emotions = emotions;
    config.n_utterances = utterances;
    config.seed = seed;
    config.mix_ratio = mix;
    dataset = synth_dataset(config, dir.path());
  }
};

bool same_file_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  return util::read_file_bytes(a) == util::read_file_bytes(b);
}

}  // namespace

TEST_CASE("train_system counting contract and determinism") {
  Fixture fixture(2, 1, 3, 7);
  const CascadeConfig config = fast_config();

  const SystemModel model = train_system(fixture.dataset.entries, config, 11);
  CHECK(model.bank.tags.size() == 2);
  CHECK(model.cnn.spec.n_classes == 2);
  CHECK(model.speakers.size() == 2);
  CHECK(model.emotions == std::vector<std::string>{"neutral"});

  // Same manifest and seed twice: byte-identical persisted bundles.
  const SystemModel again = train_system(fixture.dataset.entries, config, 11);
  TempDir out("bundles");
  save_system(model, out.path() / "a");
  save_system(again, out.path() / "b");
  for (const char* name : {"system.json", "gmm_bank.json", "cnn.json", "cnn.bin"}) {
    REQUIRE(same_file_bytes(out.path() / "a" / name, out.path() / "b" / name));
  }
}

TEST_CASE("identify self-consistency on training material") {
  Fixture fixture(3, 1, 4, 21);
  const SystemModel model = train_system(fixture.dataset.entries, fast_config(), 5);

  std::size_t correct = 0, total = 0;
  for (const auto& entry : fixture.dataset.entries) {
    if (entry.split != Split::train) continue;
    const AudioClip clip = read_wav(entry.path);
    const IdentificationResult result = identify(clip, model, false);
    CHECK(result.confidence > 1.0 / 3.0);
    CHECK(result.confidence <= 1.0);
    if (result.speaker == entry.speaker_id) ++correct;
    ++total;

    // Emotion always comes from the bank.
    CHECK(std::find(model.emotions.begin(), model.emotions.end(), result.emotion) !=
          model.emotions.end());
  }
  REQUIRE(total == 9);  // ceil(0.6*4) = 3 train utterances each
  CHECK(correct == total);
}

TEST_CASE("identify is a pure function of clip and model") {
  Fixture fixture(2, 1, 3, 31);
  const SystemModel model = train_system(fixture.dataset.entries, fast_config(), 9);
  const AudioClip clip = read_wav(fixture.dataset.entries[0].path);
  const IdentificationResult a = identify(clip, model, false);
  const IdentificationResult b = identify(clip, model, false);
  CHECK(a.speaker == b.speaker);
  CHECK(a.confidence == b.confidence);
  CHECK(a.gated_probs == b.gated_probs);
}

TEST_CASE("identify rejects clips shorter than one frame") {
  Fixture fixture(2, 1, 3, 41);
  const SystemModel model = train_system(fixture.dataset.entries, fast_config(), 3);
  AudioClip tiny;
  tiny.sample_rate = 8000;
  tiny.samples.assign(40, 0.1);
  CHECK_THROWS_AS(identify(tiny, model, false), InputTooShortError);
}

TEST_CASE("topk=1 gating always matches the GMM speaker decision") {
  Fixture fixture(3, 2, 3, 51);
  CascadeConfig config = fast_config();
  config.gating.k = 1;
  const SystemModel model = train_system(fixture.dataset.entries, config, 13);

  for (const auto& entry : fixture.dataset.entries) {
    const AudioClip clip = read_wav(entry.path);
    const IdentificationResult cascade_result = identify(clip, model, false);
    const FeatureMatrix features = mfcc_features(clip, config.mfcc);
    const auto [gmm_speaker, scores] = identify_speaker_gmm(features, model.bank);
    REQUIRE(cascade_result.speaker == gmm_speaker);
  }
}

TEST_CASE("save/load round-trip is exact and validated") {
  Fixture fixture(2, 2, 3, 61);
  const SystemModel model = train_system(fixture.dataset.entries, fast_config(), 17);
  TempDir out("bundle_rt");
  const auto dir = out.path() / "m";
  save_system(model, dir);

  SECTION("round-trip preserves everything") {
    const SystemModel loaded = load_system(dir);
    CHECK(loaded.speakers == model.speakers);
    CHECK(loaded.emotions == model.emotions);
    CHECK(loaded.seed == model.seed);
    CHECK(loaded.cnn.params.flattened() == model.cnn.params.flattened());
    CHECK(loaded.cnn.meta.input_mean == model.cnn.meta.input_mean);
    CHECK(tag_bank_to_json(loaded.bank) == tag_bank_to_json(model.bank));

    // Saving the loaded model reproduces identical files.
    const auto dir2 = out.path() / "m2";
    save_system(loaded, dir2);
    for (const char* name : {"system.json", "gmm_bank.json", "cnn.json", "cnn.bin"}) {
      REQUIRE(same_file_bytes(dir / name, dir2 / name));
    }
  }

  SECTION("tampered weight blob is rejected") {
    auto bytes = util::read_file_bytes(dir / "cnn.bin");
    bytes[8] ^= 0xff;
    util::write_file_bytes(dir / "cnn.bin", bytes);
    CHECK_THROWS_AS(load_system(dir), CorruptModelError);
  }

  SECTION("missing bank file is rejected") {
    std::filesystem::remove(dir / "gmm_bank.json");
    CHECK_THROWS_AS(load_system(dir), CorruptModelError);
  }

  SECTION("version mismatch is rejected") {
    auto text = util::read_file_text(dir / "system.json");
    const auto pos = text.find("auris-1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 7, "auris-9");
    util::write_file_text(dir / "system.json", text);
    CHECK_THROWS_AS(load_system(dir), VersionError);
  }

  SECTION("missing directory is rejected") {
    CHECK_THROWS_AS(load_system(out.path() / "nope"), CorruptModelError);
  }
}

TEST_CASE("train_system validates its inputs") {
  const CascadeConfig config = fast_config();

  SECTION("one speaker is not enough") {
    Fixture fixture(1, 1, 3, 71);
    CHECK_THROWS_AS(train_system(fixture.dataset.entries, config, 0), DataError);
  }

  SECTION("no train split is rejected") {
    Fixture fixture(2, 1, 3, 72);
    std::vector<ManifestEntry> test_only;
    for (auto e : fixture.dataset.entries) {
      e.split = Split::test;
      test_only.push_back(e);
    }
    CHECK_THROWS_AS(train_system(test_only, config, 0), DataError);
  }
}

TEST_CASE("ablate runs the requested modes") {
  Fixture fixture(3, 1, 5, 81);
  const CascadeConfig config = fast_config();

  SECTION("single mode gives a single row") {
    const AblationReport report =
        ablate(fixture.dataset.entries, config, {AblateMode::gmm_only}, 23);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].mode == "gmm_only");
    CHECK(report.rows[0].report.n_trials == 6);  // 3 speakers x 2 test utterances
    REQUIRE(report.rows[0].cost_ratio.has_value());
    CHECK(*report.rows[0].cost_ratio == Catch::Approx(1.0));
  }

  SECTION("classifier modes share the base system; ratios are relative") {
    const AblationReport report = ablate(
        fixture.dataset.entries, config,
        {AblateMode::gmm_only, AblateMode::cnn_only, AblateMode::gmm_cnn}, 23);
    REQUIRE(report.rows.size() == 3);
    for (const auto& row : report.rows) {
      REQUIRE(row.cost_ratio.has_value());
      CHECK(row.report.n_trials == 6);
    }
  }

  SECTION("casa rows both present when requested") {
    const AblationReport report = ablate(fixture.dataset.entries, config,
                                         {AblateMode::casa_on, AblateMode::casa_off}, 23);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].mode == "casa_on");
    CHECK(report.rows[1].mode == "casa_off");
  }
}

TEST_CASE("held-out accuracy on a clean synthetic speaker task") {
  Fixture fixture(4, 1, 6, 91);
  CascadeConfig config = fast_config();
  config.cnn_hyper.epochs = 20;
  config.cnn_hyper.learning_rate = 0.01;
  const SystemModel model = train_system(fixture.dataset.entries, config, 19);

  std::size_t correct = 0, total = 0;
  for (const auto& entry : fixture.dataset.entries) {
    if (entry.split != Split::test) continue;
    const AudioClip clip = read_wav(entry.path);
    if (identify(clip, model, false).speaker == entry.speaker_id) ++correct;
    ++total;
  }
  REQUIRE(total == 8);  // 4 speakers x 2 held-out utterances
  CHECK(correct * 10 >= total * 9);  // >= 90%
}

TEST_CASE("separation on clean input rarely changes the decision") {
  Fixture fixture(3, 1, 5, 92);
  const SystemModel model = train_system(fixture.dataset.entries, fast_config(), 29);

  std::size_t changed = 0, total = 0;
  for (const auto& entry : fixture.dataset.entries) {
    const AudioClip clip = read_wav(entry.path);
    const IdentificationResult with = identify(clip, model, true);
    const IdentificationResult without = identify(clip, model, false);
    if (with.speaker != without.speaker) ++changed;
    ++total;
  }
  REQUIRE(total == 15);
  CHECK(changed * 10 < total);  // < 10% of clean trials
}

TEST_CASE("per_cell_sid groups by speaker and emotion") {
  std::vector<TrialRecord> trials;
  TrialRecord t;
  t.true_speaker = "s0";
  t.true_emotion = "neutral";
  t.predicted_speaker = "s0";
  trials.push_back(t);
  t.predicted_speaker = "s1";
  trials.push_back(t);
  t.true_emotion = "angry";
  t.predicted_speaker = "s0";
  trials.push_back(t);
  const auto cells = per_cell_sid(trials);
  CHECK(cells.at({"s0", "neutral"}) == Catch::Approx(50.0));
  CHECK(cells.at({"s0", "angry"}) == Catch::Approx(100.0));
}
