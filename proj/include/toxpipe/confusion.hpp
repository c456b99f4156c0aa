#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "toxpipe/scores.hpp"

namespace toxpipe {

// Square confusion matrix over the four score classes.
// Rows index the true class, columns the predicted class.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> cells{};

  void add(int true_class, int predicted_class, std::uint64_t count = 1) {
    if (!valid_score(true_class) || !valid_score(predicted_class))
      throw std::invalid_argument("ConfusionMatrix::add: class out of range");
    cells[static_cast<std::size_t>(true_class)]
         [static_cast<std::size_t>(predicted_class)] += count;
  }

  std::uint64_t at(std::size_t true_class, std::size_t predicted_class) const {
    return cells.at(true_class).at(predicted_class);
  }

  std::uint64_t row_sum(std::size_t true_class) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < kNumClasses; ++j) s += cells.at(true_class)[j];
    return s;
  }

  std::uint64_t col_sum(std::size_t predicted_class) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < kNumClasses; ++i) s += cells[i].at(predicted_class);
    return s;
  }

  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < kNumClasses; ++i) s += cells[i][i];
    return s;
  }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < kNumClasses; ++i) s += row_sum(i);
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

}  // namespace toxpipe
