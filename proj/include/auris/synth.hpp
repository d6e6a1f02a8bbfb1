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
// Synthetic desk-scale datasets: seeded speaker profiles (pitch + formant
// palettes), talking-condition profiles (pitch scale, spectral tilt, rate,
// loudness), multi-syllable utterances with pauses, optional white-noise
// mixing of the test split, and manifest emission.

#ifndef AURIS_SYNTH_HPP
#define AURIS_SYNTH_HPP

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "auris/audio_io.hpp"
#include "auris/util.hpp"

namespace auris {

struct SpeakerProfile {
  std::string id;
  double base_pitch_hz = 120.0;
  std::vector<std::array<Formant, 3>> vowels;
};

// A talking condition, realized acoustically as pitch scaling, spectral
// tilt, speaking-rate change and loudness change.
struct EmotionProfile {
  std::string name;
  double pitch_scale = 1.0;
  double tilt = 0.0;  // >0: first-difference emphasis; <0: one-pole lowpass
  double rate = 1.0;  // scales syllable and gap durations
  double loudness = 1.0;
};

inline EmotionProfile emotion_profile(int index) {
  static const EmotionProfile presets[] = {
      {"neutral", 1.00, 0.00, 1.00, 1.0},
      {"angry", 1.30, 0.90, 0.85, 1.25},
      {"happy", 1.15, 0.50, 0.95, 1.1},
      {"sad", 0.85, -0.60, 1.25, 0.85},
      {"fear", 1.25, 0.35, 0.90, 1.0},
      {"disgust", 0.90, -0.35, 1.10, 0.95},
      {"loud", 1.10, 0.25, 1.00, 1.35},
      {"soft", 0.95, -0.20, 1.05, 0.6},
      {"slow", 1.00, 0.10, 1.40, 1.0},
      {"fast", 1.05, 0.15, 0.70, 1.0},
      {"lombard", 1.20, 0.60, 1.05, 1.2},
  };
  const int n = static_cast<int>(std::size(presets));
  if (index < n) return presets[index];
  // Past the named set, vary the knobs procedurally.
  EmotionProfile p;
  p.name = "cond" + std::to_string(index);
  p.pitch_scale = 0.9 + 0.05 * ((index - n) % 9);
  p.tilt = -0.6 + 0.15 * ((index - n) % 9);
  p.rate = 0.8 + 0.07 * ((index - n) % 7);
  return p;
}

inline SpeakerProfile make_speaker_profile(int index, int n_speakers, Rng rng) {
  SpeakerProfile profile;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%02d", index % 100);
  profile.id = buf;

  // Base pitches spread log-uniformly over [115, 265] Hz with a small
  // per-speaker jitter; emotion scaling stays inside the [50, 400] window.
  const double lo = 115.0, hi = 265.0;
  const double frac = n_speakers > 1 ? static_cast<double>(index) / (n_speakers - 1) : 0.5;
  profile.base_pitch_hz =
      lo * std::pow(hi / lo, frac) * std::pow(2.0, 0.02 * rng.normal());

  for (int v = 0; v < 3; ++v) {
    std::array<Formant, 3> vowel;
    vowel[0] = {rng.uniform(280.0, 850.0), rng.uniform(60.0, 110.0)};
    vowel[1] = {rng.uniform(950.0, 2300.0), rng.uniform(80.0, 140.0)};
    vowel[2] = {rng.uniform(2400.0, 3500.0), rng.uniform(100.0, 180.0)};
    profile.vowels.push_back(vowel);
  }
  return profile;
}

// A short "sentence": 3-4 vowel syllables with pauses, pitch drift across
// syllables, and the condition's tilt/rate/loudness applied.
inline AudioClip synth_utterance(const SpeakerProfile& speaker, const EmotionProfile& emotion,
                                 int sample_rate, Rng rng) {
  const int n_syllables = 3 + static_cast<int>(rng.uniform_int(2));
  std::vector<double> samples;
  auto append_silence = [&](double seconds) {
    samples.insert(samples.end(),
                   static_cast<std::size_t>(std::max(0.0, seconds) * sample_rate), 0.0);
  };

  append_silence(0.05);
  for (int s = 0; s < n_syllables; ++s) {
    const auto& vowel = speaker.vowels[rng.uniform_int(speaker.vowels.size())];
    const double pitch = std::clamp(
        speaker.base_pitch_hz * emotion.pitch_scale * std::pow(2.0, 0.04 * rng.normal()),
        55.0, 395.0);
    const double duration = (0.14 + 0.08 * rng.uniform()) * emotion.rate;
    const double amplitude = emotion.loudness * (0.8 + 0.4 * rng.uniform());
    const AudioClip syllable =
        synth_speaker(pitch, vowel, duration, sample_rate, rng.next_u64());
    for (double x : syllable.samples) samples.push_back(amplitude * x);
    if (s + 1 < n_syllables) append_silence((0.04 + 0.05 * rng.uniform()) * emotion.rate);
  }
  append_silence(0.05);

  if (emotion.tilt > 0.0) {
    for (std::size_t i = samples.size(); i-- > 1;) {
      samples[i] -= emotion.tilt * samples[i - 1];
    }
  } else if (emotion.tilt < 0.0) {
    const double a = -emotion.tilt;
    double state = 0.0;
    for (double& x : samples) {
      state = (1.0 - a) * x + a * state;
      x = state;
    }
  }

  double peak = 1e-12;
  for (double x : samples) peak = std::max(peak, std::abs(x));
  const double gain = 0.35 / peak;
  for (double& x : samples) x *= gain;

  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples = std::move(samples);
  return clip;
}

struct SynthConfig {
  int n_speakers = 4;
  int n_emotions = 2;
  int n_utterances = 6;
  int sample_rate = 8000;
  double train_fraction = 0.6;
  double mix_ratio = 0.0;  // > 0 mixes white noise into the test split
  std::uint64_t seed = 0;
};

struct SynthDataset {
  std::vector<ManifestEntry> entries;
  std::filesystem::path manifest_path;
  std::filesystem::path stems_dir;  // clean test stems when mixing is on
};

// Writes n_speakers * n_emotions * n_utterances WAV files plus a manifest.
// When mix_ratio > 0 the test-split files contain the mixture (seeded white
// noise at the requested target-to-interference energy ratio) and the clean
// stems are kept next to them for oracle measurements.
inline SynthDataset synth_dataset(const SynthConfig& config,
                                  const std::filesystem::path& out_dir) {
  if (config.n_speakers < 1 || config.n_emotions < 1 || config.n_utterances < 1) {
    throw ParamError("dataset needs at least one speaker, emotion and utterance");
  }
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw ParamError("train fraction must lie in (0, 1)");
  }
  std::filesystem::create_directories(out_dir / "wavs");
  SynthDataset dataset;
  const bool mixing = config.mix_ratio > 0.0;
  if (mixing) {
    dataset.stems_dir = out_dir / "stems";
    std::filesystem::create_directories(dataset.stems_dir);
  }

  Rng root = Rng::seeded(config.seed);
  const int n_train = std::max(
      1, static_cast<int>(std::ceil(config.train_fraction * config.n_utterances)));

  for (int spk = 0; spk < config.n_speakers; ++spk) {
    const SpeakerProfile profile =
        make_speaker_profile(spk, config.n_speakers, root.fork("speaker" + std::to_string(spk)));
    for (int emo = 0; emo < config.n_emotions; ++emo) {
      const EmotionProfile condition = emotion_profile(emo);
      for (int utt = 0; utt < config.n_utterances; ++utt) {
        const std::string tag = "s" + std::to_string(spk) + "_e" + std::to_string(emo) +
                                "_u" + std::to_string(utt);
        AudioClip clip =
            synth_utterance(profile, condition, config.sample_rate, root.fork(tag));
        const bool is_train = utt < n_train;

        char name[64];
        std::snprintf(name, sizeof(name), "%s_%s_u%02d.wav", profile.id.c_str(),
                      condition.name.c_str(), utt);
        const std::filesystem::path rel = std::filesystem::path("wavs") / name;

        if (mixing && !is_train) {
          write_wav(clip, dataset.stems_dir / name);
          Rng noise_rng = root.fork(tag + "/noise");
          AudioClip noise;
          noise.sample_rate = config.sample_rate;
          noise.samples.resize(clip.samples.size());
          for (double& x : noise.samples) x = 0.2 * noise_rng.normal();
          clip = mix_noise(clip, noise, MixSpec{config.mix_ratio, noise_rng.next_u64()});
        }
        write_wav(clip, out_dir / rel);

        ManifestEntry entry;
        entry.path = rel;  // manifest-relative
        entry.speaker_id = profile.id;
        entry.emotion = condition.name;
        entry.split = is_train ? Split::train : Split::test;
        dataset.entries.push_back(entry);
      }
    }
  }

  dataset.manifest_path = out_dir / "manifest.jsonl";
  save_manifest(dataset.entries, dataset.manifest_path);
  // Return entries with resolved paths, as load_manifest would.
  for (auto& e : dataset.entries) e.path = out_dir / e.path;
  return dataset;
}

}  // namespace auris

#endif  // AURIS_SYNTH_HPP
