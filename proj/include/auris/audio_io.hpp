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
// Audio ingest/emit and dataset plumbing: 16-bit PCM WAV I/O, windowed-sinc
// resampling, energy-ratio noise mixing, JSON-lines manifests and a
// deterministic synthetic-speaker generator for desk-scale experiments.

#ifndef AURIS_AUDIO_IO_HPP
#define AURIS_AUDIO_IO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auris/errors.hpp"
#include "auris/util.hpp"

namespace auris {

// Mono sample sequence plus rate. Samples are dimensionless amplitudes with
// nominal range [-1, 1]; values outside that range are legal in memory and
// only clamped when written to PCM.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }

  void validate() const {
    if (samples.empty()) throw DegenerateSignalError("audio clip is empty");
    if (sample_rate <= 0) throw ParamError("sample rate must be positive");
    if (!util::all_finite(samples)) throw DegenerateSignalError("audio clip has non-finite samples");
  }
};

enum class Split { train, test };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct ManifestEntry {
  std::filesystem::path path;
  std::string speaker_id;
  std::string emotion;
  Split split = Split::train;
};

struct MixSpec {
  double ratio = 2.0;  // target-to-interference energy ratio
  std::uint64_t seed = 0;
};

// Side data produced by mix_noise: the gain applied to the interference and
// the uniform rescale (1.0 when the mix never clipped).
struct MixInfo {
  double interference_gain = 0.0;
  double rescale = 1.0;
};

struct Formant {
  double hz = 0.0;
  double bandwidth = 0.0;
};

namespace wav_detail {

inline std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

}  // namespace wav_detail

// Reads a RIFF/WAVE file holding 16-bit PCM. Multi-channel data is averaged
// down to mono; samples are scaled to [-1, 1] by 1/32768.
inline AudioClip read_wav(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = util::read_file_bytes(path);
  } catch (const IoError&) {
    throw;
  }
  using namespace wav_detail;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = read_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + len > bytes.size()) throw FormatError("truncated chunk in " + path.string());
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError("fmt chunk too short in " + path.string());
      audio_format = read_u16(bytes.data() + pos);
      channels = read_u16(bytes.data() + pos + 2);
      rate = read_u32(bytes.data() + pos + 4);
      bits = read_u16(bytes.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) throw FormatError("missing fmt/data chunk in " + path.string());
  if (audio_format != 1) throw UnsupportedError("only PCM wav is supported: " + path.string());
  if (bits != 16) throw UnsupportedError("only 16-bit wav is supported: " + path.string());
  if (channels == 0) throw FormatError("zero channels in " + path.string());
  if (rate == 0) throw FormatError("zero sample rate in " + path.string());
  if (data_len == 0) throw FormatError("empty data chunk in " + path.string());
  const std::size_t bytes_per_frame = 2u * channels;
  if (data_len % bytes_per_frame != 0) throw FormatError("ragged data chunk in " + path.string());

  const std::size_t frames = data_len / bytes_per_frame;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + f * bytes_per_frame + 2 * c;
      const std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      acc += static_cast<double>(s);
    }
    clip.samples[f] = acc / channels / 32768.0;
  }
  return clip;
}

// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] and quantized by
// rounding; +1.0 maps to the largest representable code 32767.
inline void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  clip.validate();
  using namespace wav_detail;
  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_len = 2 * n;

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_len);
  for (double x : clip.samples) {
    const double clamped = std::clamp(x, -1.0, 1.0);
    const long q = std::lround(clamped * 32768.0);
    const std::int16_t s = static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
    put_u16(out, static_cast<std::uint16_t>(s));
  }
  util::write_file_bytes(path, out);
}

// Band-limited arbitrary-factor resampling with a Blackman-windowed sinc
// kernel, cutoff at min(rates)/2. Per-sample kernel normalization keeps DC
// exact regardless of the phase of the output grid.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
  clip.validate();
  if (target_rate <= 0) throw ParamError("target rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const double cutoff = 0.5 * std::min(1.0, ratio);  // cycles per source sample
  const int zero_crossings = 24;
  const double half_width = zero_crossings / (2.0 * cutoff);

  const std::size_t n_in = clip.samples.size();
  const std::size_t n_out =
      static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(std::max<std::size_t>(n_out, 1));

  auto kernel = [&](double u) {
    const double t = u / half_width;  // [-1, 1] inside the support
    const double window = 0.42 + 0.5 * std::cos(M_PI * t) + 0.08 * std::cos(2.0 * M_PI * t);
    const double a = 2.0 * M_PI * cutoff * u;
    const double sinc = std::abs(a) < 1e-12 ? 1.0 : std::sin(a) / a;
    return sinc * window;
  };

  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const double center = static_cast<double>(i) / ratio;
    const long lo = std::max<long>(0, static_cast<long>(std::ceil(center - half_width)));
    const long hi = std::min<long>(static_cast<long>(n_in) - 1,
                                   static_cast<long>(std::floor(center + half_width)));
    double acc = 0.0, norm = 0.0;
    for (long j = lo; j <= hi; ++j) {
      const double w = kernel(center - static_cast<double>(j));
      acc += w * clip.samples[static_cast<std::size_t>(j)];
      norm += w;
    }
    out.samples[i] = norm != 0.0 ? acc / norm : 0.0;
  }
  return out;
}

// Mixes interference into the target so that the component energy ratio
// (sum of squares of target over scaled interference) equals spec.ratio.
// The interference is tiled from a seeded start offset to cover the target,
// and the mix is uniformly rescaled only if its peak exceeds 1.
inline AudioClip mix_noise(const AudioClip& target, const AudioClip& interference,
                           const MixSpec& spec, MixInfo* info = nullptr) {
  target.validate();
  interference.validate();
  if (target.sample_rate != interference.sample_rate) {
    throw ParamError("mix_noise requires equal sample rates");
  }
  if (!(spec.ratio > 0.0)) throw ParamError("mix ratio must be positive");

  const double target_energy = util::sum_squares(target.samples);
  if (target_energy <= 0.0) throw DegenerateSignalError("silent target");

  Rng rng = Rng::seeded(spec.seed);
  const std::size_t offset = interference.samples.empty()
                                 ? 0
                                 : rng.uniform_int(interference.samples.size());

  std::vector<double> tiled(target.samples.size());
  for (std::size_t i = 0; i < tiled.size(); ++i) {
    tiled[i] = interference.samples[(offset + i) % interference.samples.size()];
  }
  const double interf_energy = util::sum_squares(tiled);
  if (interf_energy <= 0.0) throw DegenerateSignalError("silent interference");

  const double gain = std::sqrt(target_energy / (spec.ratio * interf_energy));

  AudioClip out;
  out.sample_rate = target.sample_rate;
  out.samples.resize(target.samples.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = target.samples[i] + gain * tiled[i];
    peak = std::max(peak, std::abs(out.samples[i]));
  }
  double rescale = 1.0;
  if (peak > 1.0) {
    rescale = 1.0 / peak;
    for (double& x : out.samples) x *= rescale;
  }
  if (info) {
    info->interference_gain = gain;
    info->rescale = rescale;
  }
  return out;
}

// Parses a JSON-lines manifest. Each non-blank line must be an object with
// exactly the keys path/speaker_id/emotion/split. Relative paths resolve
// against the manifest's directory.
inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");

  std::vector<ManifestEntry> entries;
  std::vector<std::string> seen_paths;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": bad JSON (" +
                        e.what() + ")");
    }
    if (!obj.is_object()) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": not an object");
    }
    for (const char* key : {"path", "speaker_id", "emotion", "split"}) {
      if (!obj.contains(key) || !obj[key].is_string()) {
        throw SchemaError("manifest line " + std::to_string(line_no) +
                          ": missing string key \"" + key + "\"");
      }
    }
    if (obj.size() != 4) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": unexpected keys");
    }
    ManifestEntry entry;
    std::filesystem::path p = obj["path"].get<std::string>();
    entry.path = p.is_absolute() ? p : base / p;
    entry.speaker_id = obj["speaker_id"].get<std::string>();
    entry.emotion = obj["emotion"].get<std::string>();
    const std::string split = obj["split"].get<std::string>();
    if (split == "train") {
      entry.split = Split::train;
    } else if (split == "test") {
      entry.split = Split::test;
    } else {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": unknown split \"" +
                        split + "\"");
    }
    if (entry.speaker_id.empty() || entry.emotion.empty()) {
      throw SchemaError("manifest line " + std::to_string(line_no) +
                        ": empty speaker_id or emotion");
    }
    const std::string key = entry.path.string();
    if (std::find(seen_paths.begin(), seen_paths.end(), key) != seen_paths.end()) {
      throw SchemaError("manifest line " + std::to_string(line_no) + ": duplicate path " + key);
    }
    seen_paths.push_back(key);
    entries.push_back(std::move(entry));
  }
  return entries;
}

inline void save_manifest(const std::vector<ManifestEntry>& entries,
                          const std::filesystem::path& path) {
  std::string text;
  for (const auto& e : entries) {
    nlohmann::json obj{{"path", e.path.string()},
                       {"speaker_id", e.speaker_id},
                       {"emotion", e.emotion},
                       {"split", to_string(e.split)}};
    text += obj.dump();
    text += '\n';
  }
  util::write_file_text(path, text);
}

// Deterministic vowel-like tone: a glottal impulse train at pitch_hz (with
// small seeded period jitter and fractional-sample pulse placement) driven
// through two-pole resonators at the given formants.
inline AudioClip synth_speaker(double pitch_hz, std::span<const Formant> formants,
                               double duration_s, int sample_rate, std::uint64_t seed) {
  if (!(pitch_hz >= 50.0 && pitch_hz <= 400.0)) {
    throw ParamError("pitch must lie in [50, 400] Hz");
  }
  if (sample_rate <= 0) throw ParamError("sample rate must be positive");
  if (!(duration_s > 0.0)) throw ParamError("duration must be positive");
  for (const auto& f : formants) {
    if (!(f.hz > 0.0 && f.hz < sample_rate / 2.0)) {
      throw ParamError("formant frequency must lie below Nyquist");
    }
    if (!(f.bandwidth > 0.0)) throw ParamError("formant bandwidth must be positive");
  }

  const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  std::vector<double> excitation(n, 0.0);

  Rng rng = Rng::seeded(seed);
  const double period = sample_rate / pitch_hz;
  double t = rng.uniform() * period;  // random initial phase
  while (t < static_cast<double>(n) - 1.0) {
    const std::size_t i = static_cast<std::size_t>(t);
    const double frac = t - static_cast<double>(i);
    // Linear fractional placement keeps the effective pitch off the sample grid.
    excitation[i] += 1.0 - frac;
    if (i + 1 < n) excitation[i + 1] += frac;
    const double jitter = 1.0 + 0.003 * rng.normal();
    t += period * std::clamp(jitter, 0.98, 1.02);
  }

  std::vector<double> y = excitation;
  for (const auto& f : formants) {
    const double r = std::exp(-M_PI * f.bandwidth / sample_rate);
    const double theta = 2.0 * M_PI * f.hz / sample_rate;
    const double a1 = 2.0 * r * std::cos(theta);
    const double a2 = -r * r;
    double y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = y[i] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = v;
      y[i] = v;
    }
  }

  // 5 ms raised-cosine fades to avoid clicks at the ends.
  const std::size_t fade = std::min<std::size_t>(n / 2, static_cast<std::size_t>(0.005 * sample_rate));
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(i) / fade);
    y[i] *= g;
    y[n - 1 - i] *= g;
  }

  double peak = 1e-12;
  for (double v : y) peak = std::max(peak, std::abs(v));
  const double gain = 0.5 / peak;
  for (double& v : y) v *= gain;

  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples = std::move(y);
  return clip;
}

}  // namespace auris

#endif  // AURIS_AUDIO_IO_HPP
