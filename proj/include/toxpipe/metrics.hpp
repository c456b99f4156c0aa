#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "toxpipe/confusion.hpp"
#include "toxpipe/scores.hpp"

namespace toxpipe {

// Per-class and support-weighted classification metrics derived from a
// confusion matrix. Conventions on empty denominators: precision and
// recall are 0 when their denominator is 0, and F1 is 0 when
// precision + recall is 0. weighted_accuracy is balanced accuracy: the
// unweighted mean of per-class recall over classes that actually occur.
struct MetricsReport {
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  std::array<std::uint64_t, kNumClasses> support{};

  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  double accuracy = 0.0;
  double weighted_accuracy = 0.0;
};

inline MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("compute_metrics: empty confusion matrix");

  MetricsReport r;
  std::size_t classes_with_support = 0;
  double recall_sum_over_supported = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const std::uint64_t tp = cm.cells[i][i];
    const std::uint64_t row = cm.row_sum(i);
    const std::uint64_t col = cm.col_sum(i);
    r.support[i] = row;
    r.precision[i] = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    r.recall[i] = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    const double pr = r.precision[i] + r.recall[i];
    r.f1[i] = pr > 0.0 ? 2.0 * r.precision[i] * r.recall[i] / pr : 0.0;
    if (row > 0) {
      ++classes_with_support;
      recall_sum_over_supported += r.recall[i];
    }
    r.precision_weighted += static_cast<double>(row) * r.precision[i];
    r.recall_weighted += static_cast<double>(row) * r.recall[i];
    r.f1_weighted += static_cast<double>(row) * r.f1[i];
  }
  r.precision_weighted /= static_cast<double>(total);
  r.recall_weighted /= static_cast<double>(total);
  r.f1_weighted /= static_cast<double>(total);
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  r.weighted_accuracy =
      recall_sum_over_supported / static_cast<double>(classes_with_support);
  return r;
}

// Count and share of each score value per dimension across a corpus
// slice; the raw material for imbalance reports.
struct ScoreDistribution {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumDimensions> counts{};
  std::array<std::array<double, kNumClasses>, kNumDimensions> proportions{};
  std::uint64_t total = 0;
};

inline ScoreDistribution score_distribution(std::span<const ToxicityScores> scores) {
  ScoreDistribution d;
  d.total = scores.size();
  for (const ToxicityScores& s : scores) {
    s.check_valid();
    for (std::size_t dim = 0; dim < kNumDimensions; ++dim)
      ++d.counts[dim][static_cast<std::size_t>(s.at(dim))];
  }
  if (d.total > 0) {
    for (std::size_t dim = 0; dim < kNumDimensions; ++dim)
      for (std::size_t c = 0; c < kNumClasses; ++c)
        d.proportions[dim][c] =
            static_cast<double>(d.counts[dim][c]) / static_cast<double>(d.total);
  }
  return d;
}

}  // namespace toxpipe
