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
// MFCC extraction: periodogram, triangular mel filterbank, log energies,
// orthonormal DCT-II, and regression deltas. The default pipeline emits
// 32-dimensional rows: 16 static cepstra followed by 16 deltas.

#ifndef AURIS_MFCC_HPP
#define AURIS_MFCC_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "auris/dsp.hpp"
#include "auris/errors.hpp"
#include "auris/util.hpp"

namespace auris {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters with centers equally spaced on the mel scale and snapped
// to FFT bins, so each row peaks at exactly 1 on its center bin. Rows are
// stored sparse as (bin, weight) runs.
struct MelFilterbank {
  int n_filters = 0;
  int n_bins = 0;  // fft_size/2 + 1
  double low_hz = 0.0;
  double high_hz = 0.0;
  std::vector<int> center_bins;
  std::vector<std::vector<std::pair<int, double>>> rows;

  std::vector<double> apply(std::span<const double> power) const {
    std::vector<double> energies(n_filters, 0.0);
    for (int j = 0; j < n_filters; ++j) {
      double acc = 0.0;
      for (const auto& [bin, w] : rows[j]) acc += w * power[bin];
      energies[j] = acc;
    }
    return energies;
  }
};

struct MfccConfig {
  double frame_ms = 20.0;
  double overlap = 0.3125;
  Window window = Window::hamming;
  int fft_size = 0;  // 0 = next power of two
  double pre_emphasis = 0.97;
  int n_filters = 26;
  int n_keep = 16;
  double band_low_hz = 0.0;
  double band_high_hz = 0.0;  // 0 = Nyquist
  double energy_floor = 1e-12;
  int delta_window = 2;
  bool area_normalize = false;

  FrameParams frame_params(int sample_rate) const {
    return FrameParams::from_overlap(sample_rate, frame_ms, overlap, window, fft_size);
  }

  int feature_dim() const { return 2 * n_keep; }
};

inline void to_json(nlohmann::json& j, const MfccConfig& c) {
  j = nlohmann::json{{"frame_ms", c.frame_ms},
                     {"overlap", c.overlap},
                     {"window", to_string(c.window)},
                     {"fft_size", c.fft_size},
                     {"pre_emphasis", c.pre_emphasis},
                     {"n_filters", c.n_filters},
                     {"n_keep", c.n_keep},
                     {"band_low_hz", c.band_low_hz},
                     {"band_high_hz", c.band_high_hz},
                     {"energy_floor", c.energy_floor},
                     {"delta_window", c.delta_window},
                     {"area_normalize", c.area_normalize}};
}

inline void from_json(const nlohmann::json& j, MfccConfig& c) {
  c.frame_ms = j.value("frame_ms", c.frame_ms);
  c.overlap = j.value("overlap", c.overlap);
  if (j.contains("window")) c.window = window_from_string(j["window"].get<std::string>());
  c.fft_size = j.value("fft_size", c.fft_size);
  c.pre_emphasis = j.value("pre_emphasis", c.pre_emphasis);
  c.n_filters = j.value("n_filters", c.n_filters);
  c.n_keep = j.value("n_keep", c.n_keep);
  c.band_low_hz = j.value("band_low_hz", c.band_low_hz);
  c.band_high_hz = j.value("band_high_hz", c.band_high_hz);
  c.energy_floor = j.value("energy_floor", c.energy_floor);
  c.delta_window = j.value("delta_window", c.delta_window);
  c.area_normalize = j.value("area_normalize", c.area_normalize);
}

// Per-frame observation rows plus the framing that produced them.
struct FeatureMatrix {
  Matrix features;
  FrameParams frame_params;
  int sample_rate = 0;

  std::size_t frame_count() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
};

// P(k) = (1/N) |DFT_N(frame)(k)|^2 for k = 0..N/2.
inline std::vector<double> periodogram(std::span<const double> frame, int fft_size) {
  if (fft_size <= 0 || !util::is_power_of_two(static_cast<std::size_t>(fft_size))) {
    throw ParamError("periodogram fft size must be a power of two");
  }
  if (frame.size() > static_cast<std::size_t>(fft_size)) {
    throw ParamError("frame longer than fft size");
  }
  std::vector<std::complex<double>> buf(fft_size, {0.0, 0.0});
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  fft::transform_pow2(buf, false);
  std::vector<double> power(fft_size / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) {
    power[k] = std::norm(buf[k]) / fft_size;
  }
  return power;
}

inline MelFilterbank mel_filterbank(int n_filters, int fft_size, int sample_rate,
                                    std::pair<double, double> band, bool area_normalize = false) {
  if (n_filters < 1) throw ParamError("need at least one mel filter");
  if (fft_size <= 0) throw ParamError("fft size must be positive");
  double low = band.first;
  double high = band.second > 0.0 ? band.second : sample_rate / 2.0;
  if (!(low >= 0.0 && low < high && high <= sample_rate / 2.0 + 1e-9)) {
    throw ParamError("mel band must satisfy 0 <= low < high <= Nyquist");
  }

  const int n_bins = fft_size / 2 + 1;
  const double mel_low = hz_to_mel(low);
  const double mel_high = hz_to_mel(high);

  // n_filters + 2 boundary points, snapped to FFT bins.
  std::vector<int> points(n_filters + 2);
  for (int i = 0; i < n_filters + 2; ++i) {
    const double mel = mel_low + (mel_high - mel_low) * i / (n_filters + 1);
    const double hz = mel_to_hz(mel);
    points[i] = static_cast<int>(std::lround(hz * fft_size / sample_rate));
    points[i] = std::clamp(points[i], 0, n_bins - 1);
  }
  // Snapping can merge neighbors when the FFT grid is coarse; nudge apart.
  for (int i = 1; i < n_filters + 2; ++i) {
    if (points[i] <= points[i - 1]) points[i] = points[i - 1] + 1;
  }
  if (points.back() >= n_bins) {
    throw ParamError("mel filterbank does not fit: increase fft size or reduce filters");
  }

  MelFilterbank bank;
  bank.n_filters = n_filters;
  bank.n_bins = n_bins;
  bank.low_hz = low;
  bank.high_hz = high;
  bank.rows.resize(n_filters);
  bank.center_bins.resize(n_filters);
  for (int j = 0; j < n_filters; ++j) {
    const int a = points[j], c = points[j + 1], b = points[j + 2];
    bank.center_bins[j] = c;
    auto& row = bank.rows[j];
    for (int k = a + 1; k <= c; ++k) {
      row.emplace_back(k, static_cast<double>(k - a) / (c - a));
    }
    for (int k = c + 1; k < b; ++k) {
      row.emplace_back(k, static_cast<double>(b - k) / (b - c));
    }
    if (area_normalize) {
      double area = 0.0;
      for (auto& [bin, w] : row) area += w;
      for (auto& [bin, w] : row) w /= area;
    }
  }
  return bank;
}

// e_j = ln(max(sum_k bank[j][k] * P(k), floor)).
inline std::vector<double> log_mel_energies(std::span<const double> power,
                                            const MelFilterbank& bank, double floor) {
  if (static_cast<int>(power.size()) != bank.n_bins) {
    throw ShapeError("power vector length does not match filterbank");
  }
  if (!(floor > 0.0)) throw ParamError("energy floor must be positive");
  std::vector<double> energies = bank.apply(power);
  for (double& e : energies) e = std::log(std::max(e, floor));
  return energies;
}

// Orthonormal DCT-II, first n_keep coefficients (c0 included).
inline std::vector<double> dct_cepstra(std::span<const double> log_energies, int n_keep) {
  const int n = static_cast<int>(log_energies.size());
  if (n_keep < 1 || n_keep > n) throw ParamError("n_keep must be in [1, n_energies]");
  std::vector<double> ceps(n_keep, 0.0);
  for (int q = 0; q < n_keep; ++q) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      acc += log_energies[j] * std::cos(M_PI * q * (2.0 * j + 1.0) / (2.0 * n));
    }
    const double scale = q == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    ceps[q] = scale * acc;
  }
  return ceps;
}

// Regression deltas d_t = sum_w w (c_{t+w} - c_{t-w}) / (2 sum_w w^2), with
// edge frames replicated.
inline Matrix delta(const Matrix& coeffs, int window) {
  if (window < 1) throw ParamError("delta window must be >= 1");
  Matrix out(coeffs.rows, coeffs.cols, 0.0);
  if (coeffs.rows == 0) return out;
  double denom = 0.0;
  for (int w = 1; w <= window; ++w) denom += static_cast<double>(w) * w;
  denom *= 2.0;
  const long last = static_cast<long>(coeffs.rows) - 1;
  for (long t = 0; t <= last; ++t) {
    for (std::size_t c = 0; c < coeffs.cols; ++c) {
      double acc = 0.0;
      for (int w = 1; w <= window; ++w) {
        const long fwd = std::min(t + w, last);
        const long bwd = std::max(t - w, 0L);
        acc += w * (coeffs.at(fwd, c) - coeffs.at(bwd, c));
      }
      out.at(t, c) = acc / denom;
    }
  }
  return out;
}

// Full pipeline: pre-emphasis, framing, periodogram, mel energies, log, DCT,
// deltas, concatenation.
inline FeatureMatrix mfcc_features(const AudioClip& clip, const MfccConfig& config) {
  clip.validate();
  const FrameParams params = config.frame_params(clip.sample_rate);
  const AudioClip emphasized = config.pre_emphasis > 0.0
                                   ? pre_emphasize(clip, config.pre_emphasis)
                                   : clip;
  const auto frames = frame_signal(emphasized, params);
  if (frames.empty()) {
    throw EmptyFeatureError("clip shorter than one analysis frame");
  }
  const MelFilterbank bank =
      mel_filterbank(config.n_filters, params.fft_size, clip.sample_rate,
                     {config.band_low_hz, config.band_high_hz}, config.area_normalize);

  Matrix statics(frames.size(), config.n_keep);
  for (std::size_t m = 0; m < frames.size(); ++m) {
    const auto power = periodogram(frames[m], params.fft_size);
    const auto energies = log_mel_energies(power, bank, config.energy_floor);
    const auto ceps = dct_cepstra(energies, config.n_keep);
    std::copy(ceps.begin(), ceps.end(), statics.row(m).begin());
  }
  const Matrix deltas = delta(statics, config.delta_window);

  FeatureMatrix out;
  out.frame_params = params;
  out.sample_rate = clip.sample_rate;
  out.features = Matrix(frames.size(), 2 * static_cast<std::size_t>(config.n_keep));
  for (std::size_t m = 0; m < frames.size(); ++m) {
    auto row = out.features.row(m);
    std::copy(statics.row(m).begin(), statics.row(m).end(), row.begin());
    std::copy(deltas.row(m).begin(), deltas.row(m).end(), row.begin() + config.n_keep);
  }
  return out;
}

// Raw little-endian float64 matrix plus a JSON sidecar at path + ".json".
inline void write_features(const FeatureMatrix& fm, const std::filesystem::path& path) {
  util::write_f64_blob(path, fm.features.data);
  nlohmann::json sidecar{{"rows", fm.features.rows},
                         {"cols", fm.features.cols},
                         {"sample_rate", fm.sample_rate},
                         {"frame_len", fm.frame_params.frame_len},
                         {"hop", fm.frame_params.hop}};
  util::write_file_text(path.string() + ".json", sidecar.dump(2) + "\n");
}

inline FeatureMatrix read_features(const std::filesystem::path& path) {
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(util::read_file_text(path.string() + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad feature sidecar: ") + e.what());
  }
  FeatureMatrix fm;
  fm.features.rows = sidecar.at("rows").get<std::size_t>();
  fm.features.cols = sidecar.at("cols").get<std::size_t>();
  fm.sample_rate = sidecar.value("sample_rate", 0);
  fm.features.data = util::read_f64_blob(path);
  if (fm.features.data.size() != fm.features.rows * fm.features.cols) {
    throw FormatError("feature blob size does not match sidecar dimensions");
  }
  return fm;
}

}  // namespace auris

#endif  // AURIS_MFCC_HPP
