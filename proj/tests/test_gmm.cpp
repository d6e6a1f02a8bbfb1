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

#include <cmath>

#include "auris/gmm.hpp"
#include "auris/synth.hpp"
#include "support/test_util.hpp"

using namespace auris;

namespace {

GmmTag single_gaussian(double mean, double variance) {
  GmmTag tag;
  tag.components = 1;
  tag.dim = 1;
  tag.weights = {1.0};
  tag.means = {mean};
  tag.variances = {variance};
  return tag;
}

Matrix samples_from_two_cluster_1d(std::size_t n, std::uint64_t seed, double mu1 = -2.0,
                                   double mu2 = 2.0, double sd = 0.5, double w1 = 0.5) {
  Matrix x(n, 1);
  Rng rng = Rng::seeded(seed);
  for (std::size_t t = 0; t < n; ++t) {
    const bool first = rng.uniform() < w1;
    x.at(t, 0) = rng.normal(first ? mu1 : mu2, sd);
  }
  return x;
}

// Direct-sum density evaluation, the non-log-domain route.
double direct_pdf(std::span<const double> x, const GmmTag& tag) {
  double acc = 0.0;
  for (int i = 0; i < tag.components; ++i) {
    double det = 1.0, quad = 0.0;
    for (int d = 0; d < tag.dim; ++d) {
      det *= 2.0 * M_PI * tag.variances[i * tag.dim + d];
      const double diff = x[d] - tag.means[i * tag.dim + d];
      quad += diff * diff / tag.variances[i * tag.dim + d];
    }
    acc += tag.weights[i] * std::exp(-0.5 * quad) / std::sqrt(det);
  }
  return acc;
}

FeatureMatrix features_from(const Matrix& m) {
  FeatureMatrix f;
  f.features = m;
  f.sample_rate = 8000;
  return f;
}

// Bank of four 1-D "speakers" at distinct means.
TagBank toy_bank() {
  TagBank bank;
  bank.dim = 1;
  const double centers[] = {-6.0, -2.0, 2.0, 6.0};
  for (int s = 0; s < 4; ++s) {
    bank.tags.emplace(TagKey{"spk" + std::to_string(s), "neutral"},
                      single_gaussian(centers[s], 1.0));
  }
  return bank;
}

}  // namespace

TEST_CASE("gmm_pdf closed-form values") {
  // Standard normal at its mode.
  const GmmTag standard = single_gaussian(0.0, 1.0);
  const std::vector<double> zero{0.0};
  CHECK(gmm_pdf(zero, standard) == Catch::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-9));

  // Two identical components behave like one.
  GmmTag twin;
  twin.components = 2;
  twin.dim = 1;
  twin.weights = {0.5, 0.5};
  twin.means = {0.0, 0.0};
  twin.variances = {1.0, 1.0};
  CHECK(gmm_pdf(zero, twin) == Catch::Approx(gmm_pdf(zero, standard)).epsilon(1e-12));

  // Symmetric two-component mixture evaluated at the midpoint.
  GmmTag pair;
  pair.components = 2;
  pair.dim = 1;
  pair.weights = {0.5, 0.5};
  pair.means = {-1.0, 1.0};
  pair.variances = {1.0, 1.0};
  const double expected = std::exp(-0.5) / std::sqrt(2.0 * M_PI);  // N(1;0,1) = N(-1;0,1)
  CHECK(gmm_pdf(zero, pair) == Catch::Approx(expected).epsilon(1e-9));
  CHECK(expected == Catch::Approx(0.241971).margin(1e-6));

  const std::vector<double> wrong_dim{0.0, 1.0};
  CHECK_THROWS_AS(gmm_pdf(wrong_dim, pair), ShapeError);
}

TEST_CASE("log-domain evaluation matches the direct sum") {
  Rng rng = Rng::seeded(12);
  for (int trial = 0; trial < 50; ++trial) {
    const int components = 1 + static_cast<int>(rng.uniform_int(4));
    const int dim = 1 + static_cast<int>(rng.uniform_int(3));
    GmmTag tag;
    tag.components = components;
    tag.dim = dim;
    double wsum = 0.0;
    for (int i = 0; i < components; ++i) {
      tag.weights.push_back(0.1 + rng.uniform());
      wsum += tag.weights.back();
      for (int d = 0; d < dim; ++d) {
        tag.means.push_back(rng.normal(0.0, 2.0));
        tag.variances.push_back(0.2 + rng.uniform());
      }
    }
    for (double& w : tag.weights) w /= wsum;

    std::vector<double> x(dim);
    for (double& v : x) v = rng.normal(0.0, 2.0);
    const double direct = direct_pdf(x, tag);
    if (direct < 1e-280) continue;  // direct sum underflows; log route still fine
    REQUIRE(auris_test::rel_err(gmm_log_pdf(x, tag), std::log(direct)) <= 1e-10);
  }
}

TEST_CASE("init_gmm specials") {
  SECTION("single component reduces to sample statistics") {
    const Matrix x = samples_from_two_cluster_1d(400, 21);
    const GmmTag tag = init_gmm(x, 1, 7);
    double mean = 0.0;
    for (std::size_t t = 0; t < x.rows; ++t) mean += x.at(t, 0);
    mean /= static_cast<double>(x.rows);
    double var = 0.0;
    for (std::size_t t = 0; t < x.rows; ++t) {
      var += (x.at(t, 0) - mean) * (x.at(t, 0) - mean);
    }
    var /= static_cast<double>(x.rows);
    CHECK(tag.means[0] == Catch::Approx(mean).margin(1e-9));
    CHECK(tag.variances[0] == Catch::Approx(var).epsilon(1e-6));
    CHECK(tag.weights[0] == 1.0);
  }

  SECTION("deterministic across runs") {
    const Matrix x = samples_from_two_cluster_1d(300, 22);
    const GmmTag a = init_gmm(x, 4, 9);
    const GmmTag b = init_gmm(x, 4, 9);
    REQUIRE(a.means == b.means);
    REQUIRE(a.variances == b.variances);
    REQUIRE(a.weights == b.weights);
  }

  SECTION("well-separated clusters are found") {
    const Matrix x = samples_from_two_cluster_1d(1000, 23, -3.0, 3.0, 0.3);
    const GmmTag tag = init_gmm(x, 2, 11);
    const double lo = std::min(tag.means[0], tag.means[1]);
    const double hi = std::max(tag.means[0], tag.means[1]);
    CHECK(std::abs(lo + 3.0) <= 0.2);
    CHECK(std::abs(hi - 3.0) <= 0.2);
  }

  SECTION("too few frames rejected") {
    Matrix x(3, 2, 0.0);
    CHECK_THROWS_AS(init_gmm(x, 4, 0), DataError);
  }
}

TEST_CASE("em_step closed forms and normalization") {
  SECTION("M=1 reproduces the sample MLE in one step") {
    const Matrix x = samples_from_two_cluster_1d(500, 31);
    GmmTag start = single_gaussian(0.3, 2.0);
    const GmmTag next = em_step(x, start);
    double mean = 0.0;
    for (std::size_t t = 0; t < x.rows; ++t) mean += x.at(t, 0);
    mean /= static_cast<double>(x.rows);
    double second = 0.0;
    for (std::size_t t = 0; t < x.rows; ++t) second += x.at(t, 0) * x.at(t, 0);
    second /= static_cast<double>(x.rows);
    CHECK(next.means[0] == Catch::Approx(mean).margin(1e-12));
    CHECK(next.variances[0] == Catch::Approx(second - mean * mean).margin(1e-12));
    CHECK(next.weights[0] == 1.0);
  }

  SECTION("updated weights sum to one") {
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix x = samples_from_two_cluster_1d(200, 100 + trial);
      const GmmTag tag = init_gmm(x, 3, trial);
      const GmmTag next = em_step(x, tag);
      double sum = 0.0;
      for (double w : next.weights) sum += w;
      REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    }
  }

  SECTION("log-likelihood increases on a two-cluster set") {
    const Matrix x = samples_from_two_cluster_1d(200, 33);
    const GmmTag start = init_gmm(x, 2, 1);
    const double before = gmm_log_likelihood(x, start);
    const GmmTag next = em_step(x, start);
    const double after = gmm_log_likelihood(x, next);
    CHECK(after > before - 1e-9);
  }
}

TEST_CASE("EM monotonicity over seeded random instances") {
  Rng rng = Rng::seeded(1234);
  for (int instance = 0; instance < 60; ++instance) {
    const int dim = 1 + static_cast<int>(rng.uniform_int(4));
    const int components = 1 + static_cast<int>(rng.uniform_int(4));
    const std::size_t n = 50 + rng.uniform_int(451);

    Matrix x(n, dim);
    for (auto& v : x.data) v = rng.normal(0.0, 1.5);
    GmmTag tag;
    tag.components = components;
    tag.dim = dim;
    double wsum = 0.0;
    for (int i = 0; i < components; ++i) {
      tag.weights.push_back(0.2 + rng.uniform());
      wsum += tag.weights.back();
      for (int d = 0; d < dim; ++d) {
        tag.means.push_back(rng.normal(0.0, 1.5));
        tag.variances.push_back(0.3 + 1.5 * rng.uniform());
      }
    }
    for (double& w : tag.weights) w /= wsum;

    const double before = gmm_log_likelihood(x, tag);
    const GmmTag next = em_step(x, tag);
    const double after = gmm_log_likelihood(x, next);
    REQUIRE(after >= before - 1e-9);
  }
}

TEST_CASE("train_gmm recovers a known mixture") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Matrix x = samples_from_two_cluster_1d(2000, 900 + seed, -2.0, 2.0, 0.5);
    TrainOptions options;
    options.components = 2;
    options.seed = seed;
    const TrainedGmm trained = train_gmm(x, options);
    const double lo = std::min(trained.tag.means[0], trained.tag.means[1]);
    const double hi = std::max(trained.tag.means[0], trained.tag.means[1]);
    CHECK(std::abs(lo + 2.0) <= 0.1);
    CHECK(std::abs(hi - 2.0) <= 0.1);
    for (double w : trained.tag.weights) CHECK(std::abs(w - 0.5) <= 0.05);

    // The trace never decreases (up to slack).
    for (std::size_t i = 1; i < trained.loglik_trace.size(); ++i) {
      REQUIRE(trained.loglik_trace[i] >= trained.loglik_trace[i - 1] - 1e-9);
    }
  }
}

TEST_CASE("train_gmm with infinite tolerance runs exactly one step") {
  const Matrix x = samples_from_two_cluster_1d(300, 44);
  TrainOptions options;
  options.components = 2;
  options.seed = 3;
  options.tol = std::numeric_limits<double>::infinity();
  const TrainedGmm trained = train_gmm(x, options);
  // Trace holds the initial log-likelihood plus exactly one EM step.
  REQUIRE(trained.loglik_trace.size() == 2);
}

TEST_CASE("train_gmm is deterministic") {
  const Matrix x = samples_from_two_cluster_1d(400, 45);
  TrainOptions options;
  options.components = 3;
  options.seed = 17;
  const TrainedGmm a = train_gmm(x, options);
  const TrainedGmm b = train_gmm(x, options);
  REQUIRE(a.tag.means == b.tag.means);
  REQUIRE(a.tag.variances == b.tag.variances);
  REQUIRE(a.tag.weights == b.tag.weights);
}

TEST_CASE("tag_likelihood_vector basics") {
  TagBank bank;
  bank.dim = 1;
  bank.tags.emplace(TagKey{"a", "neutral"}, single_gaussian(0.0, 1.0));

  Matrix x(4, 1);
  x.data = {0.1, -0.2, 0.3, 0.0};
  const LikelihoodVector lv = tag_likelihood_vector(features_from(x), bank);
  REQUIRE(lv.keys.size() == 1);

  // Duplicating every frame leaves the average unchanged.
  Matrix doubled(8, 1);
  for (int i = 0; i < 8; ++i) doubled.at(i, 0) = x.at(i % 4, 0);
  const LikelihoodVector lv2 = tag_likelihood_vector(features_from(doubled), bank);
  CHECK(lv2.avg_log_lik[0] == Catch::Approx(lv.avg_log_lik[0]).epsilon(1e-12));
}

TEST_CASE("generator features score best under their own tag") {
  TagBank bank;
  bank.dim = 2;
  GmmTag a;
  a.components = 1;
  a.dim = 2;
  a.weights = {1.0};
  a.means = {0.0, 0.0};
  a.variances = {1.0, 1.0};
  GmmTag b = a;
  b.means = {8.0, -8.0};
  bank.tags.emplace(TagKey{"a", "neutral"}, a);
  bank.tags.emplace(TagKey{"b", "neutral"}, b);

  Matrix x(100, 2);
  Rng rng = Rng::seeded(46);
  for (auto& v : x.data) v = rng.normal();
  const LikelihoodVector lv = tag_likelihood_vector(features_from(x), bank);
  REQUIRE(lv.keys[0].speaker == "a");
  CHECK(lv.avg_log_lik[0] > lv.avg_log_lik[1]);
}

TEST_CASE("identify_speaker_gmm on synthetic clusters") {
  const TagBank bank = toy_bank();
  Rng rng = Rng::seeded(47);
  int correct = 0;
  const double centers[] = {-6.0, -2.0, 2.0, 6.0};
  for (int trial = 0; trial < 40; ++trial) {
    const int speaker = trial % 4;
    Matrix x(30, 1);
    for (auto& v : x.data) v = rng.normal(centers[speaker], 1.0);
    const auto [winner, scores] = identify_speaker_gmm(features_from(x), bank);
    if (winner == "spk" + std::to_string(speaker)) ++correct;
    REQUIRE(scores.size() == 4);
  }
  CHECK(correct >= 38);  // >= 95% of 40 seeded trials
}

TEST_CASE("identify_speaker_gmm is invariant to constant per-frame offsets") {
  const TagBank bank = toy_bank();
  Matrix x(20, 1);
  Rng rng = Rng::seeded(48);
  for (auto& v : x.data) v = rng.normal(2.0, 1.0);
  const auto [winner, scores] = identify_speaker_gmm(features_from(x), bank);

  // Adding a constant to every tag's log-likelihood cannot move the argmax.
  LikelihoodVector lv = tag_likelihood_vector(features_from(x), bank);
  for (double& v : lv.avg_log_lik) v += 123.75;
  const auto shifted = lv.by_speaker();
  std::string shifted_best;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [speaker, score] : shifted) {
    if (score > best) {
      best = score;
      shifted_best = speaker;
    }
  }
  CHECK(shifted_best == winner);
}

TEST_CASE("single-speaker bank always answers that speaker") {
  TagBank bank;
  bank.dim = 1;
  bank.tags.emplace(TagKey{"only", "neutral"}, single_gaussian(0.0, 1.0));
  Matrix x(10, 1);
  Rng rng = Rng::seeded(49);
  for (auto& v : x.data) v = rng.normal(40.0, 1.0);  // far from the model
  CHECK(identify_speaker_gmm(features_from(x), bank).first == "only");
}

TEST_CASE("recognize_emotion_gmm separates conditions") {
  // Two conditions realized as distinct means along dimension 0.
  TagBank bank;
  bank.dim = 1;
  bank.tags.emplace(TagKey{"s0", "neutral"}, single_gaussian(-3.0, 1.0));
  bank.tags.emplace(TagKey{"s0", "angry"}, single_gaussian(3.0, 1.0));
  bank.tags.emplace(TagKey{"s1", "neutral"}, single_gaussian(-3.5, 1.0));
  bank.tags.emplace(TagKey{"s1", "angry"}, single_gaussian(3.5, 1.0));

  Rng rng = Rng::seeded(50);
  int correct = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const bool angry = trial % 2 == 1;
    Matrix x(25, 1);
    for (auto& v : x.data) v = rng.normal(angry ? 3.2 : -3.2, 1.0);
    const std::string result = recognize_emotion_gmm(features_from(x), bank);
    if (result == (angry ? "angry" : "neutral")) ++correct;
  }
  CHECK(correct >= 36);  // >= 90%

  // Bank with a single condition can only answer it.
  TagBank mono;
  mono.dim = 1;
  mono.tags.emplace(TagKey{"s0", "neutral"}, single_gaussian(0.0, 1.0));
  Matrix far(5, 1, 9.0);
  CHECK(recognize_emotion_gmm(features_from(far), mono) == "neutral");
}

TEST_CASE("tag bank JSON round-trip") {
  const Matrix x = samples_from_two_cluster_1d(200, 51);
  TrainOptions options;
  options.components = 2;
  options.seed = 5;
  TagBank bank;
  bank.dim = 1;
  bank.tags.emplace(TagKey{"s0", "neutral"}, train_gmm(x, options).tag);
  bank.tags.emplace(TagKey{"s1", "angry"}, single_gaussian(1.5, 0.25));

  const nlohmann::json j = tag_bank_to_json(bank);
  const TagBank back = tag_bank_from_json(j);
  REQUIRE(back.dim == 1);
  REQUIRE(back.tags.size() == 2);
  const GmmTag& original = bank.tags.at(TagKey{"s0", "neutral"});
  const GmmTag& restored = back.tags.at(TagKey{"s0", "neutral"});
  REQUIRE(restored.means == original.means);
  REQUIRE(restored.variances == original.variances);
  REQUIRE(restored.weights == original.weights);
}
