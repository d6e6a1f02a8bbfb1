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
// Time-frequency primitives shared by the separation front end and the
// feature extractor: pre-emphasis, framing/windowing, STFT with normalized
// overlap-add inverse, and autocorrelation pitch tracking.

#ifndef AURIS_DSP_HPP
#define AURIS_DSP_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "auris/audio_io.hpp"
#include "auris/errors.hpp"
#include "auris/util.hpp"

namespace auris {

enum class Window { hamming, rectangular };

inline std::string to_string(Window w) {
  return w == Window::hamming ? "hamming" : "rectangular";
}

inline Window window_from_string(const std::string& s) {
  if (s == "hamming") return Window::hamming;
  if (s == "rectangular") return Window::rectangular;
  throw ConfigError("unknown window: " + s);
}

// Analysis framing. fft_size must be a power of two at least frame_len;
// fft_size == 0 means "next power of two above frame_len".
struct FrameParams {
  int frame_len = 0;
  int hop = 0;
  Window window = Window::hamming;
  int fft_size = 0;

  static FrameParams from_ms(int sample_rate, double frame_ms, double hop_ms,
                             Window window = Window::hamming, int fft_size = 0) {
    FrameParams p;
    p.frame_len = static_cast<int>(std::lround(frame_ms * 1e-3 * sample_rate));
    p.hop = static_cast<int>(std::lround(hop_ms * 1e-3 * sample_rate));
    p.window = window;
    p.fft_size = fft_size;
    return p.resolved();
  }

  // Frame/hop from a frame length and fractional overlap (e.g. 0.3125).
  static FrameParams from_overlap(int sample_rate, double frame_ms, double overlap,
                                  Window window = Window::hamming, int fft_size = 0) {
    FrameParams p;
    p.frame_len = static_cast<int>(std::lround(frame_ms * 1e-3 * sample_rate));
    p.hop = static_cast<int>(std::lround(p.frame_len * (1.0 - overlap)));
    p.window = window;
    p.fft_size = fft_size;
    return p.resolved();
  }

  FrameParams resolved() const {
    FrameParams p = *this;
    if (p.fft_size == 0) p.fft_size = static_cast<int>(util::next_power_of_two(p.frame_len));
    p.validate();
    return p;
  }

  void validate() const {
    if (frame_len <= 0 || hop <= 0 || hop > frame_len) {
      throw ParamError("framing requires 0 < hop <= frame_len");
    }
    if (fft_size < frame_len || !util::is_power_of_two(static_cast<std::size_t>(fft_size))) {
      throw ParamError("fft_size must be a power of two >= frame_len");
    }
  }

  std::vector<double> window_values() const {
    std::vector<double> w(frame_len, 1.0);
    if (window == Window::hamming) {
      for (int i = 0; i < frame_len; ++i) {
        w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (frame_len - 1));
      }
    }
    return w;
  }

  std::size_t frame_count(std::size_t n_samples) const {
    if (n_samples < static_cast<std::size_t>(frame_len)) return 0;
    return (n_samples - frame_len) / hop + 1;
  }

  bool operator==(const FrameParams&) const = default;
};

// One-sided complex spectrogram, bins 0..N/2 per frame.
struct Spectrogram {
  std::vector<std::complex<double>> data;  // row-major [frame][bin]
  std::size_t frames = 0;
  std::size_t bins = 0;  // fft_size/2 + 1
  FrameParams params;
  int sample_rate = 0;
  std::size_t source_samples = 0;

  std::complex<double>& at(std::size_t m, std::size_t k) { return data[m * bins + k]; }
  std::complex<double> at(std::size_t m, std::size_t k) const { return data[m * bins + k]; }

  double bin_hz(std::size_t k) const {
    return static_cast<double>(k) * sample_rate / params.fft_size;
  }

  double energy() const {
    double e = 0.0;
    for (const auto& z : data) e += std::norm(z);
    return e;
  }
};

// Per-frame pitch estimates; f0 <= 0 marks an unvoiced frame.
struct PitchTrack {
  std::vector<double> f0;
  std::vector<double> voicing;  // normalized autocorrelation peak per frame
  FrameParams params;

  bool voiced(std::size_t m) const { return f0[m] > 0.0; }
  std::size_t size() const { return f0.size(); }
};

namespace fft {

// Iterative radix-2 Cooley-Tukey; a.size() must be a power of two.
inline void transform_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& z : a) z /= static_cast<double>(n);
  }
}

// DFT of arbitrary length via Bluestein's chirp-z reduction to a
// power-of-two convolution. Forward sign convention e^{-j2pi mi/I}.
inline std::vector<std::complex<double>> transform_any(
    std::span<const std::complex<double>> x, bool inverse) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (util::is_power_of_two(n)) {
    std::vector<std::complex<double>> a(x.begin(), x.end());
    transform_pow2(a, inverse);
    return a;
  }
  const double sign = inverse ? 1.0 : -1.0;
  const std::size_t m = util::next_power_of_two(2 * n - 1);
  std::vector<std::complex<double>> a(m, {0.0, 0.0}), b(m, {0.0, 0.0});
  std::vector<std::complex<double>> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = sign * M_PI * static_cast<double>(k) * static_cast<double>(k) /
                         static_cast<double>(n);
    chirp[k] = {std::cos(angle), std::sin(angle)};
    a[k] = x[k] * chirp[k];
    b[k] = std::conj(chirp[k]);
    if (k > 0) b[m - k] = std::conj(chirp[k]);
  }
  transform_pow2(a, false);
  transform_pow2(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  transform_pow2(a, true);
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
  if (inverse) {
    for (auto& z : out) z /= static_cast<double>(n);
  }
  return out;
}

}  // namespace fft

// y(n) = x(n) - coeff * x(n-1), y(0) = x(0).
inline AudioClip pre_emphasize(const AudioClip& clip, double coeff) {
  clip.validate();
  if (!(coeff >= 0.0 && coeff < 1.0)) throw ParamError("pre-emphasis coeff must be in [0, 1)");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(clip.samples.size());
  out.samples[0] = clip.samples[0];
  for (std::size_t i = 1; i < clip.samples.size(); ++i) {
    out.samples[i] = clip.samples[i] - coeff * clip.samples[i - 1];
  }
  return out;
}

// Splits into windowed frames; tail samples that do not fill a frame are
// dropped. Clips shorter than one frame yield an empty list.
inline std::vector<std::vector<double>> frame_signal(const AudioClip& clip,
                                                     const FrameParams& params) {
  params.validate();
  const std::size_t count = params.frame_count(clip.samples.size());
  const std::vector<double> w = params.window_values();
  std::vector<std::vector<double>> frames(count);
  for (std::size_t m = 0; m < count; ++m) {
    frames[m].resize(params.frame_len);
    const std::size_t off = m * params.hop;
    for (int i = 0; i < params.frame_len; ++i) {
      frames[m][i] = clip.samples[off + i] * w[i];
    }
  }
  return frames;
}

inline Spectrogram stft(const AudioClip& clip, const FrameParams& params) {
  params.validate();
  const auto frames = frame_signal(clip, params);
  const std::size_t n = static_cast<std::size_t>(params.fft_size);
  Spectrogram spec;
  spec.frames = frames.size();
  spec.bins = n / 2 + 1;
  spec.params = params;
  spec.sample_rate = clip.sample_rate;
  spec.source_samples = clip.samples.size();
  spec.data.assign(spec.frames * spec.bins, {0.0, 0.0});

  std::vector<std::complex<double>> buf(n);
  for (std::size_t m = 0; m < frames.size(); ++m) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
    for (int i = 0; i < params.frame_len; ++i) buf[i] = frames[m][i];
    fft::transform_pow2(buf, false);
    for (std::size_t k = 0; k < spec.bins; ++k) spec.at(m, k) = buf[k];
  }
  return spec;
}

namespace dsp_detail {

// Sum of shifted analysis windows over the reconstructed support. The
// inverse divides by this, so it must stay bounded away from zero.
inline std::vector<double> window_overlap_sum(const FrameParams& params,
                                              std::size_t frames, std::size_t length) {
  std::vector<double> acc(length, 0.0);
  const std::vector<double> w = params.window_values();
  for (std::size_t m = 0; m < frames; ++m) {
    const std::size_t off = m * params.hop;
    for (int i = 0; i < params.frame_len && off + i < length; ++i) {
      acc[off + i] += w[i];
    }
  }
  return acc;
}

}  // namespace dsp_detail

// Inverse STFT by normalized overlap-add: per-frame inverse DFT, overlap-add,
// then division by the summed window. Reconstruction of an unmodified
// spectrogram is exact on the covered interval; samples past the last frame
// (dropped by framing) come back as zeros.
inline AudioClip istft_overlap_add(const Spectrogram& spec) {
  spec.params.validate();
  const std::size_t n = static_cast<std::size_t>(spec.params.fft_size);
  const std::size_t length = spec.source_samples != 0
                                 ? spec.source_samples
                                 : (spec.frames == 0 ? 0
                                                     : (spec.frames - 1) * spec.params.hop +
                                                           spec.params.frame_len);

  AudioClip out;
  out.sample_rate = spec.sample_rate;
  out.samples.assign(std::max<std::size_t>(length, 1), 0.0);
  if (spec.frames == 0) return out;

  const std::size_t covered =
      std::min(length, (spec.frames - 1) * spec.params.hop + spec.params.frame_len);
  const auto wsum = dsp_detail::window_overlap_sum(spec.params, spec.frames, covered);
  const double wmax = *std::max_element(wsum.begin(), wsum.end());
  const double wmin = *std::min_element(wsum.begin(), wsum.end());
  if (wmax <= 0.0 || wmin < 1e-3 * wmax) {
    throw ConfigError("window/hop combination leaves near-zero overlap-add coverage");
  }
  // Numeric constant-overlap-add check on the fully overlapped interior:
  // the summed window must be close to flat there, otherwise frames are
  // weighted too unevenly for masked resynthesis.
  const std::size_t lead = static_cast<std::size_t>(spec.params.frame_len);
  if (covered > 2 * lead) {
    double lo = std::numeric_limits<double>::max(), hi = 0.0;
    for (std::size_t i = lead; i + lead < covered; ++i) {
      lo = std::min(lo, wsum[i]);
      hi = std::max(hi, wsum[i]);
    }
    if (hi > 0.0 && (hi - lo) / hi > 0.25) {
      throw ConfigError("window/hop combination is not constant-overlap-add");
    }
  }

  std::vector<std::complex<double>> buf(n);
  for (std::size_t m = 0; m < spec.frames; ++m) {
    // Rebuild the full conjugate-symmetric spectrum from the stored half.
    for (std::size_t k = 0; k < spec.bins; ++k) buf[k] = spec.at(m, k);
    for (std::size_t k = spec.bins; k < n; ++k) buf[k] = std::conj(spec.at(m, n - k));
    fft::transform_pow2(buf, true);
    const std::size_t off = m * spec.params.hop;
    for (int i = 0; i < spec.params.frame_len; ++i) {
      if (off + i < covered) out.samples[off + i] += buf[i].real();
    }
  }
  for (std::size_t i = 0; i < covered; ++i) out.samples[i] /= wsum[i];
  return out;
}

// Autocorrelation pitch tracker. Frames follow `params` timing but are taken
// unwindowed; per frame the normalized autocorrelation r(tau)/r(0) is
// searched over lags inside `band`, with parabolic peak interpolation for
// sub-sample lag. Frames whose best peak falls below voicing_threshold are
// unvoiced. Octave errors are suppressed by preferring the smallest lag whose
// local peak reaches 90% of the global one.
inline PitchTrack estimate_pitch(const AudioClip& clip, const FrameParams& params,
                                 std::pair<double, double> band = {50.0, 400.0},
                                 double voicing_threshold = 0.45) {
  clip.validate();
  params.validate();
  const double nyquist = clip.sample_rate / 2.0;
  if (!(band.first > 0.0 && band.first < band.second && band.second < nyquist)) {
    throw ParamError("pitch band must lie inside (0, sample_rate/2)");
  }

  const int lag_min = std::max(1, static_cast<int>(std::floor(clip.sample_rate / band.second)));
  const int lag_max = static_cast<int>(std::ceil(clip.sample_rate / band.first));

  PitchTrack track;
  track.params = params;
  const std::size_t count = params.frame_count(clip.samples.size());
  track.f0.assign(count, 0.0);
  track.voicing.assign(count, 0.0);

  const int len = params.frame_len;
  std::vector<double> r(lag_max + 2, 0.0);
  for (std::size_t m = 0; m < count; ++m) {
    const double* x = clip.samples.data() + m * params.hop;
    const int hi = std::min(lag_max + 1, len - 1);
    for (int tau = 0; tau <= hi; ++tau) {
      double acc = 0.0;
      for (int i = 0; i + tau < len; ++i) acc += x[i] * x[i + tau];
      r[tau] = acc;
    }
    for (int tau = hi + 1; tau < static_cast<int>(r.size()); ++tau) r[tau] = 0.0;
    if (r[0] <= 1e-12) continue;  // silent frame

    // Local maxima of r(tau)/r(0) within the lag band.
    double best = 0.0;
    for (int tau = lag_min; tau <= std::min(lag_max, hi - 1); ++tau) {
      if (r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1]) {
        best = std::max(best, r[tau] / r[0]);
      }
    }
    if (best < voicing_threshold) continue;

    int chosen = 0;
    for (int tau = lag_min; tau <= std::min(lag_max, hi - 1); ++tau) {
      if (r[tau] >= r[tau - 1] && r[tau] >= r[tau + 1] && r[tau] / r[0] >= 0.9 * best) {
        chosen = tau;
        break;
      }
    }
    if (chosen == 0) continue;

    // Parabolic interpolation around the integer lag.
    double tau_star = chosen;
    const double denom = r[chosen - 1] - 2.0 * r[chosen] + r[chosen + 1];
    if (std::abs(denom) > 1e-18) {
      const double delta = 0.5 * (r[chosen - 1] - r[chosen + 1]) / denom;
      if (std::abs(delta) <= 1.0) tau_star += delta;
    }
    const double f0 = std::clamp(clip.sample_rate / tau_star, band.first, band.second);
    track.f0[m] = f0;
    track.voicing[m] = r[chosen] / r[0];
  }
  return track;
}

}  // namespace auris

#endif  // AURIS_DSP_HPP
