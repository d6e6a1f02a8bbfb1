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
// End-to-end checks of the installed command-line binary.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "auris/audio_io.hpp"
#include "auris/synth.hpp"
#include "auris/util.hpp"
#include "support/test_util.hpp"

using namespace auris;
using auris_test::TempDir;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args, const std::filesystem::path& capture_dir) {
  static int counter = 0;
  const auto out_path = capture_dir / ("cli_out_" + std::to_string(counter++) + ".txt");
  const std::string command =
      std::string(AURIS_CLI_PATH) + " " + args + " > " + out_path.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CliResult result;
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  result.out = util::read_file_text(out_path);
  return result;
}

// Fast training configuration for integration runs.
void write_fast_config(const std::filesystem::path& path) {
  const json config{{"casa_train", false},
                    {"casa_test", false},
                    {"gmm", {{"components", 4}, {"tol", 1e-4}, {"max_iter", 40}}},
                    {"cnn",
                     {{"input_cols", 16},
                      {"blocks", json::array({{{"kernel_h", 3},
                                               {"kernel_w", 3},
                                               {"channels", 4},
                                               {"stride", 1}}})},
                      {"fc_hidden", json::array({16})}}},
                    {"cnn_hyper", {{"epochs", 10}, {"learning_rate", 0.03}}},
                    {"gating", {{"mode", "topk"}, {"k", 2}}}};
  util::write_file_text(path, config.dump(2));
}

}  // namespace

TEST_CASE("cli help and usage errors") {
  TempDir dir("cli_help");
  CHECK(run_cli("--help", dir.path()).exit_code == 0);
  CHECK(run_cli("segregate --help", dir.path()).exit_code == 0);
  CHECK(run_cli("--definitely-not-a-flag", dir.path()).exit_code == 3);
  CHECK(run_cli("segregate onearg", dir.path()).exit_code == 3);
  CHECK(run_cli("", dir.path()).exit_code == 3);  // subcommand required
}

TEST_CASE("cli config --print-defaults emits JSON") {
  TempDir dir("cli_config");
  const CliResult result = run_cli("config --print-defaults", dir.path());
  REQUIRE(result.exit_code == 0);
  const json defaults = json::parse(result.out);
  CHECK(defaults.contains("casa"));
  CHECK(defaults.contains("mfcc"));
  CHECK(defaults.contains("gating"));
}

TEST_CASE("cli synth writes the dataset and manifest") {
  TempDir dir("cli_synth");
  const auto out = dir.path() / "data";
  const CliResult result =
      run_cli("synth " + out.string() + " --speakers 4 --emotions 2 --utterances 6 --seed 3",
              dir.path());
  REQUIRE(result.exit_code == 0);

  std::size_t wavs = 0;
  for (const auto& e : std::filesystem::directory_iterator(out / "wavs")) {
    if (e.path().extension() == ".wav") ++wavs;
  }
  CHECK(wavs == 48);
  const auto entries = load_manifest(out / "manifest.jsonl");
  CHECK(entries.size() == 48);

  // Same seed, second directory: bit-identical outputs.
  const auto out2 = dir.path() / "data2";
  REQUIRE(run_cli("synth " + out2.string() + " --speakers 4 --emotions 2 --utterances 6 --seed 3",
                  dir.path())
              .exit_code == 0);
  CHECK(util::read_file_text(out / "manifest.jsonl") ==
        util::read_file_text(out2 / "manifest.jsonl"));
  CHECK(util::read_file_bytes(out / "wavs" / "s00_neutral_u00.wav") ==
        util::read_file_bytes(out2 / "wavs" / "s00_neutral_u00.wav"));
}

TEST_CASE("cli segregate and features") {
  TempDir dir("cli_seg");
  const SpeakerProfile profile = make_speaker_profile(0, 2, Rng::seeded(1));
  const AudioClip clip = synth_utterance(profile, emotion_profile(0), 8000, Rng::seeded(2));
  const auto in_wav = dir.path() / "in.wav";
  write_wav(clip, in_wav);

  SECTION("segregate writes output with the input's duration") {
    const auto out_wav = dir.path() / "out.wav";
    const auto diag = dir.path() / "diag";
    const CliResult result = run_cli(
        "segregate " + in_wav.string() + " " + out_wav.string() +
            " --dump-diagnostics " + diag.string(),
        dir.path());
    REQUIRE(result.exit_code == 0);
    const AudioClip out = read_wav(out_wav);
    CHECK(out.samples.size() == clip.samples.size());
    CHECK(std::filesystem::exists(diag / "ibm.bin"));
    CHECK(std::filesystem::exists(diag / "fmask.json"));
    CHECK(std::filesystem::exists(diag / "pitch.json"));
  }

  SECTION("missing input exits 2") {
    const CliResult result =
        run_cli("segregate " + (dir.path() / "missing.wav").string() + " " +
                    (dir.path() / "o.wav").string(),
                dir.path());
    CHECK(result.exit_code == 2);
  }

  SECTION("features reports 32 columns and is deterministic") {
    const auto f1 = dir.path() / "a.f64";
    const auto f2 = dir.path() / "b.f64";
    const CliResult r1 = run_cli("features " + in_wav.string() + " " + f1.string(), dir.path());
    const CliResult r2 = run_cli("features " + in_wav.string() + " " + f2.string(), dir.path());
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(json::parse(r1.out).at("cols") == 32);
    CHECK(util::read_file_bytes(f1) == util::read_file_bytes(f2));
    const json sidecar = json::parse(util::read_file_text(f1.string() + ".json"));
    CHECK(sidecar.at("cols") == 32);
  }

  SECTION("too-short clip exits 4") {
    AudioClip tiny;
    tiny.sample_rate = 8000;
    tiny.samples.assign(40, 0.1);
    const auto tiny_wav = dir.path() / "tiny.wav";
    write_wav(tiny, tiny_wav);
    const CliResult result =
        run_cli("features " + tiny_wav.string() + " " + (dir.path() / "t.f64").string(),
                dir.path());
    CHECK(result.exit_code == 4);
  }
}

TEST_CASE("cli train / identify / evaluate round-trip") {
  TempDir dir("cli_train");
  const auto data = dir.path() / "data";
  REQUIRE(run_cli("synth " + data.string() + " --speakers 3 --emotions 1 --utterances 4 --seed 5",
                  dir.path())
              .exit_code == 0);

  const auto config_path = dir.path() / "config.json";
  write_fast_config(config_path);

  const auto model_dir = dir.path() / "model";
  const CliResult train_result =
      run_cli("train " + (data / "manifest.jsonl").string() + " " + model_dir.string() +
                  " --config " + config_path.string() + " --seed 9",
              dir.path());
  REQUIRE(train_result.exit_code == 0);
  CHECK(json::parse(train_result.out).at("speakers").size() == 3);

  // Identify a training file: the decision must name its speaker.
  const auto entries = load_manifest(data / "manifest.jsonl");
  const auto& first_train = *std::find_if(entries.begin(), entries.end(), [](const auto& e) {
    return e.split == Split::train;
  });
  const CliResult id_result = run_cli(
      "identify " + first_train.path.string() + " " + model_dir.string(), dir.path());
  REQUIRE(id_result.exit_code == 0);
  const json id = json::parse(id_result.out);
  CHECK(id.at("speaker").get<std::string>() == first_train.speaker_id);
  CHECK(id.at("confidence").get<double>() > 1.0 / 3.0);
  CHECK(id.contains("emotion"));

  // Evaluate two inference modes: report has both rows and a Wilcoxon block.
  const auto report_path = dir.path() / "report.json";
  const CliResult eval_result = run_cli(
      "evaluate " + (data / "manifest.jsonl").string() + " " + model_dir.string() +
          " --modes gmm_only,gmm_cnn --out " + report_path.string() + " --trials " +
          (dir.path() / "trials").string(),
      dir.path());
  REQUIRE(eval_result.exit_code == 0);
  const json report = json::parse(util::read_file_text(report_path));
  REQUIRE(report.at("rows").size() == 2);
  CHECK(report.at("rows")[0].at("mode") == "gmm_only");
  CHECK(report.at("rows")[1].at("mode") == "gmm_cnn");
  CHECK(report.contains("wilcoxon"));
  CHECK(std::filesystem::exists(dir.path() / "trials.gmm_only.jsonl"));

  // Test-time separation toggles: both rows plus a Wilcoxon comparison.
  const auto casa_report_path = dir.path() / "casa_report.json";
  const CliResult casa_eval = run_cli(
      "evaluate " + (data / "manifest.jsonl").string() + " " + model_dir.string() +
          " --modes casa_on,casa_off --out " + casa_report_path.string(),
      dir.path());
  REQUIRE(casa_eval.exit_code == 0);
  const json casa_report = json::parse(util::read_file_text(casa_report_path));
  REQUIRE(casa_report.at("rows").size() == 2);
  CHECK(casa_report.at("rows")[0].at("mode") == "casa_on");
  CHECK(casa_report.at("rows")[1].at("mode") == "casa_off");
  CHECK(casa_report.contains("wilcoxon"));

  // Corrupt model directory exits 2.
  auto bytes = util::read_file_bytes(model_dir / "cnn.bin");
  bytes[0] ^= 0x1;
  util::write_file_bytes(model_dir / "cnn.bin", bytes);
  CHECK(run_cli("identify " + first_train.path.string() + " " + model_dir.string(),
                dir.path())
            .exit_code == 2);
}
