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
// Identification metrics and the statistical tests used to compare system
// variants: SID rate, confusion-matrix precision/recall/F1, rank-sum ROC
// AUC, a Kolmogorov-Smirnov normality check and the Wilcoxon signed-rank
// test (exact by enumeration for small n).

#ifndef AURIS_EVAL_HPP
#define AURIS_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "auris/errors.hpp"

namespace auris {

struct TrialRecord {
  std::string true_speaker;
  std::string predicted_speaker;
  std::map<std::string, double> scores;
  std::optional<std::string> true_emotion;
  std::optional<std::string> predicted_emotion;
};

struct ConfusionMatrix {
  std::vector<std::string> labels;  // sorted
  std::vector<long> counts;         // row = true, col = predicted

  long& at(std::size_t t, std::size_t p) { return counts[t * labels.size() + p]; }
  long at(std::size_t t, std::size_t p) const { return counts[t * labels.size() + p]; }

  long total() const {
    long n = 0;
    for (long c : counts) n += c;
    return n;
  }

  long trace() const {
    long n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) n += at(i, i);
    return n;
  }

  std::size_t index_of(const std::string& label) const {
    const auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label) throw LabelError("unknown class: " + label);
    return static_cast<std::size_t>(std::distance(labels.begin(), it));
  }
};

inline ConfusionMatrix confusion_matrix(const std::vector<TrialRecord>& trials) {
  if (trials.empty()) throw EmptyError("no trials");
  std::vector<std::string> labels;
  for (const auto& t : trials) {
    labels.push_back(t.true_speaker);
    labels.push_back(t.predicted_speaker);
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

  ConfusionMatrix cm;
  cm.labels = labels;
  cm.counts.assign(labels.size() * labels.size(), 0);
  for (const auto& t : trials) {
    ++cm.at(cm.index_of(t.true_speaker), cm.index_of(t.predicted_speaker));
  }
  return cm;
}

// 100 * correct / total.
inline double sid_performance(const std::vector<TrialRecord>& trials) {
  if (trials.empty()) throw EmptyError("no trials");
  long correct = 0;
  for (const auto& t : trials) {
    if (t.true_speaker == t.predicted_speaker) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(trials.size());
}

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
};

// Precision = TP/(TP+FP), Recall = TP/(TP+FN), F1 = 2PR/(P+R); zero (and
// flagged undefined) when a denominator vanishes.
inline Prf precision_recall_f1(const ConfusionMatrix& cm, const std::string& label) {
  const std::size_t c = cm.index_of(label);
  long tp = cm.at(c, c), fp = 0, fn = 0;
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    if (i == c) continue;
    fp += cm.at(i, c);
    fn += cm.at(c, i);
  }
  Prf out;
  if (tp + fp > 0) {
    out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    out.precision_defined = false;
  }
  if (tp + fn > 0) {
    out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    out.recall_defined = false;
  }
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

// Mann-Whitney rank-sum AUC with midrank tie handling.
inline double roc_auc(const std::vector<std::pair<double, int>>& scored) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& [score, label] : scored) {
    if (label != 0 && label != 1) throw LabelError("labels must be 0/1");
    if (!std::isfinite(score)) throw ParamError("scores must be finite");
    (label ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) {
    throw DegenerateError("roc_auc needs both label values present");
  }

  std::vector<std::size_t> idx(scored.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scored[a].first < scored[b].first; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scored[idx[j]].first == scored[idx[i]].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (scored[idx[k]].second == 1) rank_sum_pos += midrank;
    }
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace eval_detail {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Asymptotic Kolmogorov distribution: P(K > lambda).
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace eval_detail

struct KsResult {
  double statistic = 0.0;
  double p = 1.0;
  bool reject = false;  // at the supplied alpha
  double mean = 0.0;
  double stddev = 0.0;
};

// One-sample KS statistic against a normal with the sample's own mean and
// standard deviation; p from the asymptotic Kolmogorov distribution with the
// Stephens small-sample correction. Estimating the parameters makes the test
// conservative, which only weakens rejections of normality.
inline KsResult ks_normality(std::span<const double> samples, double alpha = 0.10) {
  const std::size_t n = samples.size();
  if (n < 5) throw ParamError("ks_normality needs at least 5 samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n - 1);
  if (var <= 0.0) throw DegenerateError("zero variance sample");
  const double sd = std::sqrt(var);

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = eval_detail::std_normal_cdf((sorted[i] - mean) / sd);
    const double hi = static_cast<double>(i + 1) / n - cdf;
    const double lo = cdf - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }
  const double root_n = std::sqrt(static_cast<double>(n));
  const double lambda = (root_n + 0.12 + 0.11 / root_n) * d;

  KsResult result;
  result.statistic = d;
  result.p = eval_detail::kolmogorov_sf(lambda);
  result.reject = result.p < alpha;
  result.mean = mean;
  result.stddev = sd;
  return result;
}

struct WilcoxonResult {
  double w = 0.0;  // smaller signed-rank sum
  double w_plus = 0.0;
  double p = 1.0;
  bool different = false;  // at the supplied alpha
  int n_used = 0;          // non-zero differences
  int sign = 0;            // sign of the median non-zero difference
  bool exact = false;
};

// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
// are dropped; |differences| are ranked with midranks. Exact p by
// enumerating all 2^n sign assignments for n <= 12, otherwise a normal
// approximation with tie correction and continuity correction.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                           double alpha = 0.10) {
  if (a.size() != b.size()) throw ParamError("paired samples must have equal length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw DegenerateError("all paired differences are zero");
  if (diffs.size() < 5) {
    throw DegenerateError("need at least 5 non-zero paired differences");
  }
  const int n = static_cast<int>(diffs.size());

  std::vector<std::size_t> idx(diffs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(diffs[x]) < std::abs(diffs[y]);
  });
  std::vector<double> ranks(diffs.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && std::abs(diffs[idx[j]]) == std::abs(diffs[idx[i]])) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = midrank;
    i = j;
  }

  double w_plus = 0.0, w_minus = 0.0;
  int positive = 0;
  for (std::size_t k = 0; k < diffs.size(); ++k) {
    if (diffs[k] > 0.0) {
      w_plus += ranks[k];
      ++positive;
    } else {
      w_minus += ranks[k];
    }
  }

  WilcoxonResult result;
  result.w_plus = w_plus;
  result.w = std::min(w_plus, w_minus);
  result.n_used = n;
  result.sign = positive * 2 > n ? 1 : (positive * 2 < n ? -1 : (w_plus >= w_minus ? 1 : -1));

  if (n <= 12) {
    // Exact: distribution of W+ over all sign assignments of the ranks.
    const std::size_t total = std::size_t{1} << n;
    std::size_t at_most = 0;
    for (std::size_t bits = 0; bits < total; ++bits) {
      double w = 0.0;
      for (int k = 0; k < n; ++k) {
        if (bits & (std::size_t{1} << k)) w += ranks[k];
      }
      if (w <= result.w + 1e-9) ++at_most;
    }
    result.p = std::min(1.0, 2.0 * static_cast<double>(at_most) / static_cast<double>(total));
    result.exact = true;
  } else {
    const double mean = n * (n + 1) / 4.0;
    double tie_term = 0.0;
    {
      std::vector<double> sorted_ranks = ranks;
      std::sort(sorted_ranks.begin(), sorted_ranks.end());
      std::size_t s = 0;
      while (s < sorted_ranks.size()) {
        std::size_t e = s;
        while (e < sorted_ranks.size() && sorted_ranks[e] == sorted_ranks[s]) ++e;
        const double t = static_cast<double>(e - s);
        tie_term += t * t * t - t;
        s = e;
      }
    }
    const double var = n * (n + 1) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) throw DegenerateError("degenerate rank variance");
    const double z = (result.w - mean + 0.5) / std::sqrt(var);  // continuity-corrected
    result.p = std::min(1.0, 2.0 * eval_detail::std_normal_cdf(z));
    result.exact = false;
  }
  result.different = result.p < alpha;
  return result;
}

struct EvalReport {
  double sid_percent = 0.0;
  std::map<std::string, Prf> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double macro_auc = 0.0;
  bool auc_defined = false;
  long n_trials = 0;
  ConfusionMatrix cm;
  double alpha = 0.10;
};

// Assembles the full report: confusion matrix, SID, macro precision /
// recall / F1, and macro one-vs-rest AUC over classes that have both
// positives and negatives with recorded scores.
inline EvalReport evaluate(const std::vector<TrialRecord>& trials, double alpha = 0.10) {
  if (trials.empty()) throw EmptyError("no trials to evaluate");
  EvalReport report;
  report.alpha = alpha;
  report.cm = confusion_matrix(trials);
  report.sid_percent = sid_performance(trials);
  report.n_trials = static_cast<long>(trials.size());

  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
  for (const auto& label : report.cm.labels) {
    const Prf prf = precision_recall_f1(report.cm, label);
    report.per_class[label] = prf;
    sum_p += prf.precision;
    sum_r += prf.recall;
    sum_f += prf.f1;
  }
  const double n_labels = static_cast<double>(report.cm.labels.size());
  report.macro_precision = sum_p / n_labels;
  report.macro_recall = sum_r / n_labels;
  report.macro_f1 = sum_f / n_labels;

  double auc_sum = 0.0;
  int auc_classes = 0;
  for (const auto& label : report.cm.labels) {
    std::vector<std::pair<double, int>> scored;
    for (const auto& t : trials) {
      const auto it = t.scores.find(label);
      if (it == t.scores.end()) continue;
      scored.emplace_back(it->second, t.true_speaker == label ? 1 : 0);
    }
    if (scored.empty()) continue;
    bool has_pos = false, has_neg = false;
    for (const auto& [s, l] : scored) (l ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) continue;
    auc_sum += roc_auc(scored);
    ++auc_classes;
  }
  if (auc_classes > 0) {
    report.macro_auc = auc_sum / auc_classes;
    report.auc_defined = true;
  }
  return report;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [label, prf] : r.per_class) {
    per_class[label] = {{"precision", prf.precision},
                        {"recall", prf.recall},
                        {"f1", prf.f1}};
  }
  nlohmann::json cm = nlohmann::json::object();
  cm["labels"] = r.cm.labels;
  cm["counts"] = r.cm.counts;
  return nlohmann::json{{"sid_percent", r.sid_percent},
                        {"macro_precision", r.macro_precision},
                        {"macro_recall", r.macro_recall},
                        {"macro_f1", r.macro_f1},
                        {"macro_auc", r.auc_defined ? nlohmann::json(r.macro_auc) : nlohmann::json()},
                        {"n_trials", r.n_trials},
                        {"per_class", per_class},
                        {"confusion", cm},
                        {"alpha", r.alpha}};
}

inline std::string eval_report_to_table(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "trials: " << r.n_trials << "\n";
  os << "SID%:   " << std::setprecision(2) << r.sid_percent << std::setprecision(4) << "\n";
  os << "macro:  P=" << r.macro_precision << " R=" << r.macro_recall << " F1=" << r.macro_f1;
  if (r.auc_defined) os << " AUC=" << r.macro_auc;
  os << "\n";
  os << std::left << std::setw(16) << "class" << std::right << std::setw(10) << "precision"
     << std::setw(10) << "recall" << std::setw(10) << "f1" << "\n";
  for (const auto& [label, prf] : r.per_class) {
    os << std::left << std::setw(16) << label << std::right << std::setw(10) << prf.precision
       << std::setw(10) << prf.recall << std::setw(10) << prf.f1 << "\n";
  }
  return os.str();
}

}  // namespace auris

#endif  // AURIS_EVAL_HPP
