#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "toxpipe/common.hpp"

namespace toxpipe {

inline constexpr std::uint32_t kDefaultFeatureDim = 1u << 18;

// Identifies the featurization scheme inside serialized models; bump when
// the hashing or normalization below changes.
inline constexpr std::string_view kFeatureHashId = "fnv1a64/char3-5/v1";

// Sparse L2-normalized feature vector. Entries are sorted by index so
// iteration order, and therefore training arithmetic, is deterministic.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const { return entries.empty(); }

  double l2_norm() const {
    double sum = 0.0;
    for (const auto& [idx, w] : entries) sum += w * w;
    return std::sqrt(sum);
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

// Hashed character n-grams (n = 3..5) of the lowercased,
// whitespace-collapsed text, term-frequency weighted and L2-normalized.
// The hash is FNV-1a seeded per n-gram length, so the output is identical
// across runs and platforms. Empty (or all-whitespace) text maps to the
// zero vector.
inline FeatureVector featurize(std::string_view text,
                               std::uint32_t feature_dim = kDefaultFeatureDim) {
  if (!is_power_of_two(feature_dim))
    throw std::invalid_argument("featurize: feature_dim must be a power of two");

  std::string normalized = collapse_whitespace(lower_ascii(text));

  std::map<std::uint32_t, double> counts;
  const std::uint32_t mask = feature_dim - 1;
  for (std::size_t n = 3; n <= 5; ++n) {
    if (normalized.size() < n) break;
    for (std::size_t i = 0; i + n <= normalized.size(); ++i) {
      std::uint64_t h = fnv1a64(std::string_view(normalized).substr(i, n),
                                0xcbf29ce484222325ULL ^ (0x9e3779b9ULL * n));
      counts[static_cast<std::uint32_t>(h) & mask] += 1.0;
    }
  }

  FeatureVector fv;
  fv.entries.reserve(counts.size());
  double sq = 0.0;
  for (const auto& [idx, c] : counts) sq += c * c;
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (const auto& [idx, c] : counts) fv.entries.emplace_back(idx, c * inv);
  }
  return fv;
}

// Character-count cap applied before featurization during training and
// prediction; 0 means uncapped.
inline std::string_view cap_text(std::string_view text, std::uint32_t max_chars) {
  if (max_chars > 0 && text.size() > max_chars) return text.substr(0, max_chars);
  return text;
}

}  // namespace toxpipe
