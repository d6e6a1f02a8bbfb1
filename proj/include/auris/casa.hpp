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
// Modulation-domain noise suppression. The chain: STFT, envelope detection,
// modulation transform of the sub-band envelopes, onset/offset segmentation
// along the modulation-frequency axis, a pitch-driven time-frequency binary
// mask, per-channel target/interference modulation energies, and a soft
// frequency mask applied before resynthesis.

#ifndef AURIS_CASA_HPP
#define AURIS_CASA_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "auris/dsp.hpp"
#include "auris/errors.hpp"
#include "auris/util.hpp"

namespace auris {

// Sub-band envelopes |X(m,k)|, frames by channels.
struct EnvelopeMatrix {
  std::vector<double> values;  // row-major [frame][channel]
  std::size_t frames = 0;
  std::size_t channels = 0;
  FrameParams params;

  double& at(std::size_t m, std::size_t k) { return values[m * channels + k]; }
  double at(std::size_t m, std::size_t k) const { return values[m * channels + k]; }
};

// Per-channel DFT of the envelope across frames: values[k][i], i < length.
struct ModulationSpectrum {
  std::vector<std::complex<double>> values;  // row-major [channel][mod bin]
  std::size_t channels = 0;
  std::size_t length = 0;

  std::complex<double> at(std::size_t k, std::size_t i) const {
    return values[k * length + i];
  }
  std::complex<double>& at(std::size_t k, std::size_t i) {
    return values[k * length + i];
  }
};

// Per channel, sorted non-overlapping (onset, offset) index pairs along the
// modulation-frequency axis.
struct OnsetOffsetMap {
  std::vector<std::vector<std::pair<int, int>>> segments;

  std::size_t channels() const { return segments.size(); }
};

struct BinaryMask {
  std::vector<std::uint8_t> bits;  // row-major [frame][channel]
  std::size_t frames = 0;
  std::size_t channels = 0;

  std::uint8_t at(std::size_t m, std::size_t k) const { return bits[m * channels + k]; }
  void set(std::size_t m, std::size_t k, bool v) { bits[m * channels + k] = v ? 1 : 0; }

  BinaryMask complement() const {
    BinaryMask out = *this;
    for (auto& b : out.bits) b = b ? 0 : 1;
    return out;
  }
};

// Mean modulation spectral energy per channel for the pitch-masked (target)
// and complement (interference) signals.
struct BandEnergies {
  std::vector<double> target;
  std::vector<double> interference;
};

// Soft per-channel gains in [0,1], broadcast over frames when applied.
struct FrequencyMask {
  std::vector<double> gains;
};

struct ModParams {
  std::size_t length = 0;  // DFT length over frames; 0 = next power of two
  int smoothing_radius = 2;
  double threshold_k = 1.0;

  std::size_t resolve_length(std::size_t frames) const {
    const std::size_t want = length ? length : util::next_power_of_two(std::max<std::size_t>(frames, 1));
    if (want < frames) throw ParamError("modulation DFT length shorter than frame count");
    return want;
  }
};

struct CasaConfig {
  double frame_ms = 30.0;
  double hop_ms = 5.0;
  Window window = Window::hamming;
  int fft_size = 0;
  ModParams mod;
  int rho_min = -10;
  int rho_max = 10;
  double pitch_low_hz = 50.0;
  double pitch_high_hz = 400.0;
  double voicing_threshold = 0.45;

  FrameParams frame_params(int sample_rate) const {
    return FrameParams::from_ms(sample_rate, frame_ms, hop_ms, window, fft_size);
  }
};

inline void to_json(nlohmann::json& j, const CasaConfig& c) {
  j = nlohmann::json{{"frame_ms", c.frame_ms},
                     {"hop_ms", c.hop_ms},
                     {"window", to_string(c.window)},
                     {"fft_size", c.fft_size},
                     {"mod_length", c.mod.length},
                     {"smoothing_radius", c.mod.smoothing_radius},
                     {"threshold_k", c.mod.threshold_k},
                     {"rho_min", c.rho_min},
                     {"rho_max", c.rho_max},
                     {"pitch_low_hz", c.pitch_low_hz},
                     {"pitch_high_hz", c.pitch_high_hz},
                     {"voicing_threshold", c.voicing_threshold}};
}

inline void from_json(const nlohmann::json& j, CasaConfig& c) {
  c.frame_ms = j.value("frame_ms", c.frame_ms);
  c.hop_ms = j.value("hop_ms", c.hop_ms);
  if (j.contains("window")) c.window = window_from_string(j["window"].get<std::string>());
  c.fft_size = j.value("fft_size", c.fft_size);
  c.mod.length = j.value("mod_length", c.mod.length);
  c.mod.smoothing_radius = j.value("smoothing_radius", c.mod.smoothing_radius);
  c.mod.threshold_k = j.value("threshold_k", c.mod.threshold_k);
  c.rho_min = j.value("rho_min", c.rho_min);
  c.rho_max = j.value("rho_max", c.rho_max);
  c.pitch_low_hz = j.value("pitch_low_hz", c.pitch_low_hz);
  c.pitch_high_hz = j.value("pitch_high_hz", c.pitch_high_hz);
  c.voicing_threshold = j.value("voicing_threshold", c.voicing_threshold);
}

// Incoherent envelope detection: M(m,k) = |X(m,k)|.
inline EnvelopeMatrix envelope_detect(const Spectrogram& spec) {
  EnvelopeMatrix env;
  env.frames = spec.frames;
  env.channels = spec.bins;
  env.params = spec.params;
  env.values.resize(spec.frames * spec.bins);
  for (std::size_t i = 0; i < spec.data.size(); ++i) {
    env.values[i] = std::abs(spec.data[i]);
  }
  return env;
}

// Per-channel I-point DFT of the envelope along the frame axis, zero-padded
// when I exceeds the frame count.
inline ModulationSpectrum modulation_transform(const EnvelopeMatrix& env, std::size_t dft_length) {
  if (dft_length < 1) throw ParamError("modulation DFT length must be >= 1");
  if (dft_length < env.frames) {
    throw ParamError("modulation DFT length must cover the frame count");
  }
  ModulationSpectrum mod;
  mod.channels = env.channels;
  mod.length = dft_length;
  mod.values.assign(env.channels * dft_length, {0.0, 0.0});
  std::vector<std::complex<double>> buf(dft_length);
  for (std::size_t k = 0; k < env.channels; ++k) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
    for (std::size_t m = 0; m < env.frames; ++m) buf[m] = env.at(m, k);
    auto spec = fft::transform_any(buf, false);
    std::copy(spec.begin(), spec.end(), mod.values.begin() + k * dft_length);
  }
  return mod;
}

namespace casa_detail {

inline std::vector<double> moving_average(std::span<const double> x, int radius) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - radius);
    const int hi = std::min(n - 1, i + radius);
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += x[j];
    out[i] = acc / (hi - lo + 1);
  }
  return out;
}

}  // namespace casa_detail

// Smooths |X(k,i)| per channel with a moving average, takes the central
// finite difference along the modulation axis, and marks onsets where the
// derivative crosses mean + k*std upward and offsets where it crosses the
// negated threshold downward. Unmatched onsets close at the last index.
inline OnsetOffsetMap detect_onsets_offsets(const ModulationSpectrum& mod, int smoothing_radius,
                                            double threshold_k) {
  if (smoothing_radius < 0) throw ParamError("smoothing radius must be >= 0");
  OnsetOffsetMap map;
  map.segments.resize(mod.channels);
  const int n = static_cast<int>(mod.length);
  if (n < 3) return map;

  std::vector<double> mag(n), deriv(n);
  for (std::size_t k = 0; k < mod.channels; ++k) {
    for (int i = 0; i < n; ++i) mag[i] = std::abs(mod.at(k, i));
    const auto smooth = casa_detail::moving_average(mag, smoothing_radius);
    deriv[0] = deriv[n - 1] = 0.0;
    for (int i = 1; i + 1 < n; ++i) deriv[i] = 0.5 * (smooth[i + 1] - smooth[i - 1]);

    double mean = 0.0;
    for (double d : deriv) mean += d;
    mean /= n;
    double var = 0.0;
    for (double d : deriv) var += (d - mean) * (d - mean);
    const double stddev = std::sqrt(var / n);
    const double theta = mean + threshold_k * stddev;

    auto& segs = map.segments[k];
    int open = -1;
    for (int i = 1; i < n; ++i) {
      if (open < 0 && deriv[i - 1] <= theta && deriv[i] > theta) {
        open = i;
      } else if (open >= 0 && deriv[i - 1] >= -theta && deriv[i] < -theta) {
        if (i > open) segs.emplace_back(open, i);
        open = -1;
      }
    }
    if (open >= 0 && open < n - 1) segs.emplace_back(open, n - 1);
  }
  return map;
}

// Pitch-driven time-frequency mask. For each voiced frame the channels whose
// center frequency falls in the rho-neighborhood of any harmonic h*f_d below
// Nyquist are kept; unvoiced frames stay all-zero. Neighborhoods are bins
// round(h*f_d*N/fs) + rho for integer rho in [rho_min, rho_max].
inline BinaryMask build_ideal_binary_mask(const Spectrogram& spec, const PitchTrack& pitch,
                                          int rho_min, int rho_max) {
  if (pitch.size() != spec.frames) {
    throw ShapeError("pitch track and spectrogram frame counts differ");
  }
  if (rho_min > rho_max) throw ParamError("rho range is empty");
  BinaryMask mask;
  mask.frames = spec.frames;
  mask.channels = spec.bins;
  mask.bits.assign(spec.frames * spec.bins, 0);

  const double bin_hz = static_cast<double>(spec.sample_rate) / spec.params.fft_size;
  const double nyquist = spec.sample_rate / 2.0;
  for (std::size_t m = 0; m < spec.frames; ++m) {
    if (!pitch.voiced(m)) continue;
    const double f0 = pitch.f0[m];
    for (int h = 1; h * f0 <= nyquist + 0.5 * bin_hz; ++h) {
      const int center = static_cast<int>(std::lround(h * f0 / bin_hz));
      for (int rho = rho_min; rho <= rho_max; ++rho) {
        const int k = center + rho;
        if (k >= 0 && k < static_cast<int>(spec.bins)) mask.set(m, k, true);
      }
    }
  }
  return mask;
}

inline Spectrogram apply_binary_mask(const Spectrogram& spec, const BinaryMask& mask) {
  if (mask.frames != spec.frames || mask.channels != spec.bins) {
    throw ShapeError("mask shape does not match spectrogram");
  }
  Spectrogram out = spec;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!mask.bits[i]) out.data[i] = {0.0, 0.0};
  }
  return out;
}

// Mean modulation energy per channel within that signal's own detected
// onset/offset segments; falls back to the full modulation axis for channels
// with no segments. Target uses the masked spectrogram, interference the
// complement-masked one.
inline BandEnergies estimate_band_energies(const Spectrogram& spec, const BinaryMask& mask,
                                           const ModParams& mod_params) {
  if (mask.frames != spec.frames || mask.channels != spec.bins) {
    throw ShapeError("mask shape does not match spectrogram");
  }
  const std::size_t dft_length = mod_params.resolve_length(spec.frames);

  auto mean_energy = [&](const Spectrogram& s) {
    const EnvelopeMatrix env = envelope_detect(s);
    const ModulationSpectrum mod = modulation_transform(env, dft_length);
    const OnsetOffsetMap segments =
        detect_onsets_offsets(mod, mod_params.smoothing_radius, mod_params.threshold_k);
    std::vector<double> out(mod.channels, 0.0);
    for (std::size_t k = 0; k < mod.channels; ++k) {
      double acc = 0.0;
      std::size_t count = 0;
      for (const auto& [on, off] : segments.segments[k]) {
        for (int i = on; i <= off; ++i) {
          acc += std::norm(mod.at(k, i));
          ++count;
        }
      }
      if (count == 0) {
        for (std::size_t i = 0; i < mod.length; ++i) acc += std::norm(mod.at(k, i));
        count = mod.length;
      }
      out[k] = acc / static_cast<double>(count);
    }
    return out;
  };

  BandEnergies energies;
  energies.target = mean_energy(apply_binary_mask(spec, mask));
  energies.interference = mean_energy(apply_binary_mask(spec, mask.complement()));
  return energies;
}

// F(k) = X_T / (X_T + X_I); 0 where both vanish.
inline FrequencyMask build_frequency_mask(const BandEnergies& e) {
  if (e.target.size() != e.interference.size()) {
    throw ShapeError("band energy vectors differ in length");
  }
  FrequencyMask mask;
  mask.gains.resize(e.target.size());
  for (std::size_t k = 0; k < mask.gains.size(); ++k) {
    const double t = e.target[k], i = e.interference[k];
    if (t < 0.0 || i < 0.0 || !std::isfinite(t) || !std::isfinite(i)) {
      throw ParamError("band energies must be finite and nonnegative");
    }
    mask.gains[k] = (t + i) > 0.0 ? t / (t + i) : 0.0;
  }
  return mask;
}

// Every intermediate product of the separation chain, for inspection and
// diagnostics dumps.
struct CasaDiagnostics {
  FrameParams params;
  Spectrogram mixture;          // pre-mask STFT of the input
  EnvelopeMatrix envelope;
  ModulationSpectrum modulation;
  OnsetOffsetMap onsets;
  PitchTrack pitch;
  BinaryMask ibm;
  BandEnergies energies;
  FrequencyMask fmask;
  std::size_t voiced_frames = 0;
  bool passthrough = false;  // all-unvoiced fallback engaged
  double input_energy = 0.0;
  double output_energy = 0.0;
};

// Full separation pipeline. The frequency mask multiplies every frame of the
// mixture spectrogram (mixture phase kept), and the result is resynthesized
// by normalized overlap-add. If no frame is voiced the mask falls back to
// all-ones so clean unvoiced input passes through.
inline std::pair<AudioClip, CasaDiagnostics> segregate(const AudioClip& clip,
                                                       const CasaConfig& config) {
  clip.validate();
  const FrameParams params = config.frame_params(clip.sample_rate);
  CasaDiagnostics diag;
  diag.params = params;
  diag.input_energy = util::sum_squares(clip.samples);

  Spectrogram spec = stft(clip, params);
  if (spec.frames == 0) {
    diag.passthrough = true;
    diag.output_energy = diag.input_energy;
    return {clip, diag};
  }
  diag.mixture = spec;

  diag.pitch = estimate_pitch(clip, params, {config.pitch_low_hz, config.pitch_high_hz},
                              config.voicing_threshold);
  diag.voiced_frames = static_cast<std::size_t>(
      std::count_if(diag.pitch.f0.begin(), diag.pitch.f0.end(), [](double f) { return f > 0.0; }));

  diag.ibm = build_ideal_binary_mask(spec, diag.pitch, config.rho_min, config.rho_max);

  if (diag.voiced_frames == 0) {
    diag.passthrough = true;
    diag.fmask.gains.assign(spec.bins, 1.0);
    diag.energies.target.assign(spec.bins, 0.0);
    diag.energies.interference.assign(spec.bins, 0.0);
    diag.output_energy = diag.input_energy;
    return {clip, diag};
  }

  const std::size_t dft_length = config.mod.resolve_length(spec.frames);
  diag.envelope = envelope_detect(spec);
  diag.modulation = modulation_transform(diag.envelope, dft_length);
  diag.onsets = detect_onsets_offsets(diag.modulation, config.mod.smoothing_radius,
                                      config.mod.threshold_k);
  diag.energies = estimate_band_energies(spec, diag.ibm, config.mod);
  diag.fmask = build_frequency_mask(diag.energies);

  for (std::size_t m = 0; m < spec.frames; ++m) {
    for (std::size_t k = 0; k < spec.bins; ++k) {
      spec.at(m, k) *= diag.fmask.gains[k];
    }
  }
  AudioClip out = istft_overlap_add(spec);
  diag.output_energy = util::sum_squares(out.samples);
  return {std::move(out), diag};
}

}  // namespace auris

#endif  // AURIS_CASA_HPP
