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
// Diagonal-covariance Gaussian mixtures: log-domain density evaluation,
// k-means++ initialization, EM with monotone likelihood, per-(speaker,
// emotion) tag banks, and maximum-likelihood identification.

#ifndef AURIS_GMM_HPP
#define AURIS_GMM_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "auris/errors.hpp"
#include "auris/mfcc.hpp"
#include "auris/util.hpp"

namespace auris {

// One mixture: weights on the simplex, means and per-dimension variances
// stored row-major [component][dim].
struct GmmTag {
  int components = 0;
  int dim = 0;
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::span<const double> mean(int i) const { return {means.data() + i * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> variance(int i) const {
    return {variances.data() + i * dim, static_cast<std::size_t>(dim)};
  }

  void validate(double variance_floor) const {
    if (components < 1 || dim < 1) throw ParamError("mixture needs components >= 1, dim >= 1");
    if (static_cast<int>(weights.size()) != components ||
        static_cast<int>(means.size()) != components * dim ||
        static_cast<int>(variances.size()) != components * dim) {
      throw ShapeError("mixture parameter sizes inconsistent");
    }
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw ParamError("mixture weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ParamError("mixture weights must sum to 1");
    for (double v : variances) {
      if (!(v >= variance_floor)) throw ParamError("variance below floor");
    }
    if (!util::all_finite(means)) throw ParamError("non-finite mean");
  }
};

struct TagKey {
  std::string speaker;
  std::string emotion;

  auto operator<=>(const TagKey&) const = default;
};

// Tags keyed by (speaker, emotion); all share one feature dimension.
struct TagBank {
  int dim = 0;
  std::map<TagKey, GmmTag> tags;

  std::vector<std::string> speakers() const {
    std::vector<std::string> out;
    for (const auto& [key, tag] : tags) {
      if (out.empty() || out.back() != key.speaker) out.push_back(key.speaker);
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<std::string> emotions() const {
    std::vector<std::string> out;
    for (const auto& [key, tag] : tags) out.push_back(key.emotion);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

// Average per-frame log-density under each tag, bank iteration order.
struct LikelihoodVector {
  std::vector<TagKey> keys;
  std::vector<double> avg_log_lik;

  // Per-speaker score: max over that speaker's emotions.
  std::map<std::string, double> by_speaker() const {
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      auto [it, inserted] = out.try_emplace(keys[i].speaker, avg_log_lik[i]);
      if (!inserted) it->second = std::max(it->second, avg_log_lik[i]);
    }
    return out;
  }
};

inline double gmm_log_pdf(std::span<const double> x, const GmmTag& tag) {
  if (static_cast<int>(x.size()) != tag.dim) {
    throw ShapeError("feature dimension does not match mixture");
  }
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(tag.components);
  for (int i = 0; i < tag.components; ++i) {
    double log_det = 0.0, quad = 0.0;
    const double* mu = tag.means.data() + i * tag.dim;
    const double* var = tag.variances.data() + i * tag.dim;
    for (int d = 0; d < tag.dim; ++d) {
      log_det += std::log(2.0 * M_PI * var[d]);
      const double diff = x[d] - mu[d];
      quad += diff * diff / var[d];
    }
    const double logw = tag.weights[i] > 0.0 ? std::log(tag.weights[i])
                                             : -std::numeric_limits<double>::infinity();
    terms[i] = logw - 0.5 * (log_det + quad);
    best = std::max(best, terms[i]);
  }
  if (!std::isfinite(best)) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

inline double gmm_pdf(std::span<const double> x, const GmmTag& tag) {
  return std::exp(gmm_log_pdf(x, tag));
}

inline double gmm_log_likelihood(const Matrix& frames, const GmmTag& tag) {
  double acc = 0.0;
  for (std::size_t t = 0; t < frames.rows; ++t) acc += gmm_log_pdf(frames.row(t), tag);
  return acc;
}

struct EmOptions {
  double variance_floor = 1e-4;
};

struct TrainOptions {
  int components = 16;
  double tol = 1e-5;  // relative log-likelihood change
  int max_iter = 200;
  std::uint64_t seed = 0;
  double variance_floor = 1e-4;
};

namespace gmm_detail {

inline void check_data(const Matrix& frames, int needed) {
  if (frames.rows < static_cast<std::size_t>(needed)) {
    throw DataError("need at least " + std::to_string(needed) + " frames, have " +
                    std::to_string(frames.rows));
  }
  if (frames.cols == 0) throw DataError("zero-dimensional features");
}

}  // namespace gmm_detail

// k-means++ seeding refined by at most ten Lloyd iterations; variances are
// per-dimension cluster variances (floored), weights the cluster proportions.
inline GmmTag init_gmm(const Matrix& frames, int components, std::uint64_t seed,
                       double variance_floor = 1e-4) {
  gmm_detail::check_data(frames, components);
  const std::size_t n = frames.rows;
  const int dim = static_cast<int>(frames.cols);
  Rng rng = Rng::seeded(seed);

  std::vector<std::size_t> centers;
  centers.push_back(rng.uniform_int(n));
  std::vector<double> dist2(n, std::numeric_limits<double>::max());
  auto sq_dist = [&](std::size_t a, std::size_t b) {
    double acc = 0.0;
    const auto ra = frames.row(a), rb = frames.row(b);
    for (int d = 0; d < dim; ++d) {
      const double diff = ra[d] - rb[d];
      acc += diff * diff;
    }
    return acc;
  };
  while (static_cast<int>(centers.size()) < components) {
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      dist2[t] = std::min(dist2[t], sq_dist(t, centers.back()));
      total += dist2[t];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total, acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        acc += dist2[t];
        if (acc >= target) {
          pick = t;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(n);
    }
    centers.push_back(pick);
  }

  std::vector<double> mu(components * dim);
  for (int i = 0; i < components; ++i) {
    const auto row = frames.row(centers[i]);
    std::copy(row.begin(), row.end(), mu.begin() + i * dim);
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < 10; ++iter) {
    bool changed = false;
    for (std::size_t t = 0; t < n; ++t) {
      const auto row = frames.row(t);
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (int i = 0; i < components; ++i) {
        double acc = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double diff = row[d] - mu[i * dim + d];
          acc += diff * diff;
        }
        if (acc < best_d) {
          best_d = acc;
          best = i;
        }
      }
      if (assign[t] != best) {
        assign[t] = best;
        changed = true;
      }
    }
    std::vector<double> sum(components * dim, 0.0);
    std::vector<std::size_t> count(components, 0);
    for (std::size_t t = 0; t < n; ++t) {
      const auto row = frames.row(t);
      for (int d = 0; d < dim; ++d) sum[assign[t] * dim + d] += row[d];
      ++count[assign[t]];
    }
    for (int i = 0; i < components; ++i) {
      if (count[i] == 0) {
        // Re-seed an empty cluster at a random frame.
        const std::size_t pick = rng.uniform_int(n);
        const auto row = frames.row(pick);
        std::copy(row.begin(), row.end(), mu.begin() + i * dim);
        changed = true;
        continue;
      }
      for (int d = 0; d < dim; ++d) mu[i * dim + d] = sum[i * dim + d] / count[i];
    }
    if (!changed) break;
  }

  GmmTag tag;
  tag.components = components;
  tag.dim = dim;
  tag.means = mu;
  tag.weights.assign(components, 0.0);
  tag.variances.assign(components * dim, 0.0);
  std::vector<std::size_t> count(components, 0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto row = frames.row(t);
    for (int d = 0; d < dim; ++d) {
      const double diff = row[d] - tag.means[assign[t] * dim + d];
      tag.variances[assign[t] * dim + d] += diff * diff;
    }
    ++count[assign[t]];
  }
  for (int i = 0; i < components; ++i) {
    tag.weights[i] = static_cast<double>(std::max<std::size_t>(count[i], 1)) / n;
    for (int d = 0; d < dim; ++d) {
      double v = count[i] > 0 ? tag.variances[i * dim + d] / count[i] : 0.0;
      tag.variances[i * dim + d] = std::max(v, variance_floor);
    }
  }
  double wsum = 0.0;
  for (double w : tag.weights) wsum += w;
  for (double& w : tag.weights) w /= wsum;
  tag.validate(variance_floor);
  return tag;
}

// One EM update: responsibilities, then weights, means and second-moment
// variances, with flooring. An empty component (zero responsibility mass) is
// re-seeded at the frame the current model explains worst; the event is
// appended to `events` when provided.
inline GmmTag em_step(const Matrix& frames, const GmmTag& tag, const EmOptions& options = {},
                      std::vector<std::string>* events = nullptr) {
  gmm_detail::check_data(frames, 1);
  tag.validate(options.variance_floor);
  if (static_cast<int>(frames.cols) != tag.dim) {
    throw ShapeError("feature dimension does not match mixture");
  }
  const std::size_t n = frames.rows;
  const int m = tag.components, dim = tag.dim;

  std::vector<double> log_comp(m);
  std::vector<double> resp(m);
  std::vector<double> mass(m, 0.0);
  std::vector<double> mean_acc(m * dim, 0.0);
  std::vector<double> sq_acc(m * dim, 0.0);

  double worst_ll = std::numeric_limits<double>::max();
  std::size_t worst_frame = 0;

  for (std::size_t t = 0; t < n; ++t) {
    const auto x = frames.row(t);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      double log_det = 0.0, quad = 0.0;
      const double* mu = tag.means.data() + i * dim;
      const double* var = tag.variances.data() + i * dim;
      for (int d = 0; d < dim; ++d) {
        log_det += std::log(2.0 * M_PI * var[d]);
        const double diff = x[d] - mu[d];
        quad += diff * diff / var[d];
      }
      log_comp[i] = (tag.weights[i] > 0.0 ? std::log(tag.weights[i])
                                          : -std::numeric_limits<double>::infinity()) -
                    0.5 * (log_det + quad);
      best = std::max(best, log_comp[i]);
    }
    double norm = 0.0;
    for (int i = 0; i < m; ++i) {
      resp[i] = std::exp(log_comp[i] - best);
      norm += resp[i];
    }
    const double frame_ll = best + std::log(norm);
    if (frame_ll < worst_ll) {
      worst_ll = frame_ll;
      worst_frame = t;
    }
    for (int i = 0; i < m; ++i) {
      const double r = resp[i] / norm;
      mass[i] += r;
      double* macc = mean_acc.data() + i * dim;
      double* sacc = sq_acc.data() + i * dim;
      for (int d = 0; d < dim; ++d) {
        macc[d] += r * x[d];
        sacc[d] += r * x[d] * x[d];
      }
    }
  }

  GmmTag next;
  next.components = m;
  next.dim = dim;
  next.weights.resize(m);
  next.means.resize(m * dim);
  next.variances.resize(m * dim);

  for (int i = 0; i < m; ++i) {
    if (mass[i] <= n * 1e-12) {
      // Rescue: park the component on the worst-explained frame.
      const auto x = frames.row(worst_frame);
      next.weights[i] = 1.0 / static_cast<double>(n);
      for (int d = 0; d < dim; ++d) {
        next.means[i * dim + d] = x[d];
        next.variances[i * dim + d] = std::max(1.0, options.variance_floor);
      }
      if (events) {
        events->push_back("component " + std::to_string(i) + " re-seeded at frame " +
                          std::to_string(worst_frame));
      }
      continue;
    }
    next.weights[i] = mass[i] / static_cast<double>(n);
    for (int d = 0; d < dim; ++d) {
      const double mu = mean_acc[i * dim + d] / mass[i];
      next.means[i * dim + d] = mu;
      const double second = sq_acc[i * dim + d] / mass[i];
      next.variances[i * dim + d] = std::max(second - mu * mu, options.variance_floor);
    }
  }
  double wsum = 0.0;
  for (double w : next.weights) wsum += w;
  for (double& w : next.weights) w /= wsum;
  next.validate(options.variance_floor);
  return next;
}

struct TrainedGmm {
  GmmTag tag;
  std::vector<double> loglik_trace;
  std::vector<std::string> events;
};

// EM to convergence: stop when the relative improvement drops below tol or
// max_iter is reached. The trace holds the log-likelihood of the model
// *after* each step.
inline TrainedGmm train_gmm(const Matrix& frames, const TrainOptions& options) {
  gmm_detail::check_data(frames, options.components);
  TrainedGmm result;
  result.tag = init_gmm(frames, options.components, options.seed, options.variance_floor);
  EmOptions em_options{options.variance_floor};

  double prev = gmm_log_likelihood(frames, result.tag);
  result.loglik_trace.push_back(prev);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    result.tag = em_step(frames, result.tag, em_options, &result.events);
    const double current = gmm_log_likelihood(frames, result.tag);
    result.loglik_trace.push_back(current);
    const double rel = std::abs(current - prev) / std::max(std::abs(prev), 1e-12);
    prev = current;
    if (rel < options.tol) break;
  }
  return result;
}

// Average per-frame log-density of the features under every tag in the bank.
inline LikelihoodVector tag_likelihood_vector(const FeatureMatrix& features, const TagBank& bank) {
  if (bank.tags.empty()) throw DataError("empty tag bank");
  if (features.features.rows == 0) throw DataError("no feature frames");
  if (static_cast<int>(features.features.cols) != bank.dim) {
    throw ShapeError("feature dimension does not match bank");
  }
  LikelihoodVector lv;
  lv.keys.reserve(bank.tags.size());
  lv.avg_log_lik.reserve(bank.tags.size());
  for (const auto& [key, tag] : bank.tags) {
    lv.keys.push_back(key);
    lv.avg_log_lik.push_back(gmm_log_likelihood(features.features, tag) /
                             static_cast<double>(features.features.rows));
  }
  return lv;
}

// Speaker with the highest per-speaker score (max over that speaker's
// emotions of the tag log-likelihood); lexicographic tie-break.
inline std::pair<std::string, std::map<std::string, double>> identify_speaker_gmm(
    const FeatureMatrix& features, const TagBank& bank) {
  const LikelihoodVector lv = tag_likelihood_vector(features, bank);
  const auto scores = lv.by_speaker();
  std::string best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [speaker, score] : scores) {
    if (score > best_score) {
      best_score = score;
      best = speaker;
    }
  }
  return {best, scores};
}

// Emotion with the highest score (max over speakers per emotion).
inline std::string recognize_emotion_gmm(const FeatureMatrix& features, const TagBank& bank) {
  const LikelihoodVector lv = tag_likelihood_vector(features, bank);
  std::map<std::string, double> scores;
  for (std::size_t i = 0; i < lv.keys.size(); ++i) {
    auto [it, inserted] = scores.try_emplace(lv.keys[i].emotion, lv.avg_log_lik[i]);
    if (!inserted) it->second = std::max(it->second, lv.avg_log_lik[i]);
  }
  std::string best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [emotion, score] : scores) {
    if (score > best_score) {
      best_score = score;
      best = emotion;
    }
  }
  return best;
}

inline nlohmann::json tag_bank_to_json(const TagBank& bank) {
  nlohmann::json tags = nlohmann::json::array();
  for (const auto& [key, tag] : bank.tags) {
    nlohmann::json means = nlohmann::json::array();
    nlohmann::json variances = nlohmann::json::array();
    for (int i = 0; i < tag.components; ++i) {
      means.push_back(std::vector<double>(tag.mean(i).begin(), tag.mean(i).end()));
      variances.push_back(std::vector<double>(tag.variance(i).begin(), tag.variance(i).end()));
    }
    tags.push_back({{"speaker", key.speaker},
                    {"emotion", key.emotion},
                    {"weights", tag.weights},
                    {"means", means},
                    {"variances", variances}});
  }
  return nlohmann::json{{"dim", bank.dim}, {"tags", tags}};
}

inline TagBank tag_bank_from_json(const nlohmann::json& j) {
  TagBank bank;
  try {
    bank.dim = j.at("dim").get<int>();
    for (const auto& t : j.at("tags")) {
      TagKey key{t.at("speaker").get<std::string>(), t.at("emotion").get<std::string>()};
      GmmTag tag;
      tag.dim = bank.dim;
      tag.weights = t.at("weights").get<std::vector<double>>();
      tag.components = static_cast<int>(tag.weights.size());
      for (const auto& row : t.at("means")) {
        const auto v = row.get<std::vector<double>>();
        tag.means.insert(tag.means.end(), v.begin(), v.end());
      }
      for (const auto& row : t.at("variances")) {
        const auto v = row.get<std::vector<double>>();
        tag.variances.insert(tag.variances.end(), v.begin(), v.end());
      }
      bank.tags.emplace(std::move(key), std::move(tag));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad tag bank: ") + e.what());
  }
  return bank;
}

}  // namespace auris

#endif  // AURIS_GMM_HPP
