#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "toxpipe/confusion.hpp"
#include "toxpipe/scores.hpp"

namespace toxpipe {

using Logits = std::array<double, kNumClasses>;
using ClassWeights = std::array<double, kNumClasses>;
using Probabilities = std::array<double, kNumClasses>;

inline constexpr ClassWeights kUniformWeights{1.0, 1.0, 1.0, 1.0};

// Numerically stable softmax: shift by the max logit before exponentiating.
inline Probabilities softmax(const Logits& logits) {
  for (double l : logits)
    if (!std::isfinite(l)) throw std::invalid_argument("softmax: non-finite logit");
  double m = logits[0];
  for (double l : logits) m = std::max(m, l);
  Probabilities p{};
  double sum = 0.0;
  for (std::size_t j = 0; j < kNumClasses; ++j) {
    p[j] = std::exp(logits[j] - m);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

// Weighted cross-entropy for a single sample:
//   L = -w[label] * log(softmax(logits)[label])
// computed via log-sum-exp so large logits cannot overflow.
inline double weighted_ce_loss(const Logits& logits, int label,
                               const ClassWeights& weights) {
  if (!valid_score(label)) throw std::invalid_argument("weighted_ce_loss: bad label");
  for (double l : logits)
    if (!std::isfinite(l))
      throw std::invalid_argument("weighted_ce_loss: non-finite logit");
  for (double w : weights)
    if (!std::isfinite(w) || w < 0.0)
      throw std::invalid_argument("weighted_ce_loss: bad class weight");
  double m = logits[0];
  for (double l : logits) m = std::max(m, l);
  double lse = 0.0;
  for (double l : logits) lse += std::exp(l - m);
  lse = m + std::log(lse);
  const double log_p = logits[static_cast<std::size_t>(label)] - lse;
  return -weights[static_cast<std::size_t>(label)] * log_p;
}

// Gradient of weighted_ce_loss with respect to the logits:
//   dL/dl_j = w[label] * (softmax(logits)_j - [j == label])
inline Logits loss_gradient(const Logits& logits, int label,
                            const ClassWeights& weights) {
  if (!valid_score(label)) throw std::invalid_argument("loss_gradient: bad label");
  Probabilities p = softmax(logits);
  Logits g{};
  const double w = weights[static_cast<std::size_t>(label)];
  for (std::size_t j = 0; j < kNumClasses; ++j) {
    g[j] = w * (p[j] - (static_cast<int>(j) == label ? 1.0 : 0.0));
  }
  return g;
}

// Re-derives class weights from a confusion matrix. Per class i:
//   FN_i = row_sum(i) - cells[i][i]      (misses)
//   FP_i = col_sum(i) - cells[i][i]      (false alarms)
//   TE_i = FN_i + FP_i
//   w_i  = ln(1 + TE_i) / sum_k ln(1 + TE_k) * kNumClasses
// so the weights always sum to kNumClasses. A matrix with no errors at
// all yields uniform weights. `floor` clamps each weight from below
// after normalization; it intentionally breaks the sum invariant when it
// binds, trading scale for a guarantee that no class is ignored.
inline ClassWeights update_weights(const ConfusionMatrix& cm, double floor = 0.0) {
  if (!(floor >= 0.0))
    throw std::invalid_argument("update_weights: floor must be non-negative");
  std::array<double, kNumClasses> log_err{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const std::uint64_t fn = cm.row_sum(i) - cm.cells[i][i];
    const std::uint64_t fp = cm.col_sum(i) - cm.cells[i][i];
    log_err[i] = std::log1p(static_cast<double>(fn + fp));
    sum += log_err[i];
  }
  ClassWeights w = kUniformWeights;
  if (sum > 0.0) {
    for (std::size_t i = 0; i < kNumClasses; ++i)
      w[i] = log_err[i] / sum * static_cast<double>(kNumClasses);
  }
  for (double& v : w) v = std::max(v, floor);
  return w;
}

// Mean unweighted cross-entropy over a span of (logits, label) pairs;
// used for cross-epoch validation curves where comparability matters
// more than emphasis.
inline double mean_ce_loss(std::span<const std::pair<Logits, int>> batch) {
  if (batch.empty()) throw std::invalid_argument("mean_ce_loss: empty batch");
  double total = 0.0;
  for (const auto& [logits, label] : batch)
    total += weighted_ce_loss(logits, label, kUniformWeights);
  return total / static_cast<double>(batch.size());
}

}  // namespace toxpipe
