#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace toxpipe {

// Number of severity classes per dimension (scores 0..3).
inline constexpr int kNumClasses = 4;

// The five canonical toxicity dimensions, in head order.
enum class Dimension : int {
  kRacialOrigin = 0,
  kGenderSex = 1,
  kReligion = 2,
  kAbility = 3,
  kViolence = 4,
};

inline constexpr std::size_t kNumDimensions = 5;

inline constexpr std::array<std::string_view, kNumDimensions>
    kDimensionNames = {"racial_origin", "gender_sex", "religion", "ability",
                       "violence"};

inline std::string_view dimension_name(Dimension d) {
  return kDimensionNames[static_cast<std::size_t>(d)];
}

inline bool valid_score(int s) { return s >= 0 && s < kNumClasses; }

// Canonical per-text severity vector: one 0..3 score per dimension.
struct ToxicityScores {
  std::array<int, kNumDimensions> values{0, 0, 0, 0, 0};

  int& operator[](Dimension d) { return values[static_cast<std::size_t>(d)]; }
  int operator[](Dimension d) const {
    return values[static_cast<std::size_t>(d)];
  }
  int& at(std::size_t i) { return values.at(i); }
  int at(std::size_t i) const { return values.at(i); }

  int total() const {
    int sum = 0;
    for (int v : values) sum += v;
    return sum;
  }

  int max_single() const {
    int m = 0;
    for (int v : values) m = v > m ? v : m;
    return m;
  }

  bool valid() const {
    for (int v : values)
      if (!valid_score(v)) return false;
    return true;
  }

  void check_valid() const {
    if (!valid())
      throw std::invalid_argument("ToxicityScores: score outside 0..3");
  }

  friend bool operator==(const ToxicityScores&,
                         const ToxicityScores&) = default;
};

}  // namespace toxpipe
