#pragma once

// Evaluation protocol: per-domain AUC, pooled S-AUC, fake/real accuracy at a
// fixed threshold and M-ACC (mean over domains of the mean of F-ACC, R-ACC).

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace devdet::metrics {

struct ScoredSample {
  double score = 0.0;
  int label = 0;  // 1 = fake
  int domain_id = 0;
};

// Probability a random fake outscores a random real, ties counted half.
// Rank statistics, O(n log n). Throws ContractError unless both classes present.
double auc(std::span<const ScoredSample> scored);

struct AccSplit {
  std::optional<double> fake_acc;  // absent when there are no fakes
  std::optional<double> real_acc;  // absent when there are no reals
  // Mean of the accuracies that are present.
  std::optional<double> mean() const;
};

// A sample is called fake when score >= threshold.
AccSplit acc_split(std::span<const ScoredSample> scored, double threshold = 0.5);

struct DomainMetrics {
  std::optional<double> auc;
  std::optional<double> fake_acc;
  std::optional<double> real_acc;
  std::size_t n_fake = 0;
  std::size_t n_real = 0;
  friend bool operator==(const DomainMetrics&, const DomainMetrics&) = default;
};

struct MetricsReport {
  std::map<int, DomainMetrics> per_domain;
  double s_auc = 0.0;
  double m_acc = 0.0;
  double threshold = 0.5;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport summarize(std::span<const ScoredSample> scored, double threshold = 0.5);

// Plain accuracy mean(F-ACC, R-ACC) over all samples regardless of domain.
double balanced_acc(std::span<const ScoredSample> scored, double threshold = 0.5);

// Stable key order; doubles printed with round-trip precision.
std::string to_text(const MetricsReport& report);
MetricsReport report_from_text(const std::string& text);

}  // namespace devdet::metrics
