#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <utility>
#include <vector>

#include "toxpipe/common.hpp"
#include "toxpipe/loss.hpp"

using toxpipe::ClassWeights;
using toxpipe::ConfusionMatrix;
using toxpipe::kNumClasses;
using toxpipe::kUniformWeights;
using toxpipe::Logits;
using toxpipe::loss_gradient;
using toxpipe::softmax;
using toxpipe::update_weights;
using toxpipe::weighted_ce_loss;

namespace {

// The published violence-head confusion matrix; the one whose derived
// weights are quoted to four decimals elsewhere in the suite.
ConfusionMatrix violence_matrix() {
  const std::uint64_t cells[4][4] = {{70466, 10865, 1881, 276},
                                     {4072, 21710, 3040, 491},
                                     {774, 2612, 10144, 849},
                                     {248, 616, 1042, 4212}};
  ConfusionMatrix cm;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) cm.cells[i][j] = cells[i][j];
  return cm;
}

}  // namespace

TEST_CASE("uniform weights and uniform logits give ln(4)") {
  const Logits zeros{0.0, 0.0, 0.0, 0.0};
  for (int label = 0; label < static_cast<int>(kNumClasses); ++label) {
    CHECK(weighted_ce_loss(zeros, label, kUniformWeights) ==
          Catch::Approx(std::log(4.0)).margin(1e-9));
  }
}

TEST_CASE("loss is linear in the weight of the true class") {
  const Logits logits{0.4, -1.2, 2.0, 0.1};
  const double base = weighted_ce_loss(logits, 2, kUniformWeights);
  for (double scale : {0.0, 0.5, 1.7, 3.0}) {
    ClassWeights w = kUniformWeights;
    w[2] = scale;
    w[0] = 9.0;  // weights of other classes must not matter
    CHECK(weighted_ce_loss(logits, 2, w) ==
          Catch::Approx(scale * base).margin(1e-12));
  }
}

TEST_CASE("loss is invariant under logit translation") {
  const Logits logits{0.3, 1.1, -0.7, 0.2};
  const ClassWeights w{1.2, 0.8, 1.5, 0.5};
  const double base = weighted_ce_loss(logits, 1, w);
  for (double shift : {-100.0, -1.0, 1.0, 250.0}) {
    Logits shifted = logits;
    for (double& l : shifted) l += shift;
    CHECK(weighted_ce_loss(shifted, 1, w) == Catch::Approx(base).margin(1e-9));
  }
}

TEST_CASE("extreme logits stay finite") {
  const Logits spiked{1000.0, 0.0, 0.0, 0.0};
  const double on_peak = weighted_ce_loss(spiked, 0, kUniformWeights);
  CHECK(std::isfinite(on_peak));
  CHECK(on_peak == Catch::Approx(0.0).margin(1e-9));
  const double off_peak = weighted_ce_loss(spiked, 1, kUniformWeights);
  CHECK(std::isfinite(off_peak));
  CHECK(off_peak == Catch::Approx(1000.0).margin(1e-6));

  const auto p = softmax(spiked);
  CHECK(p[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(std::isfinite(p[1]));
}

TEST_CASE("non-finite inputs and bad labels are rejected") {
  const Logits nan_logits{0.0, std::nan(""), 0.0, 0.0};
  CHECK_THROWS_AS(softmax(nan_logits), std::invalid_argument);
  CHECK_THROWS_AS(weighted_ce_loss(nan_logits, 0, kUniformWeights),
                  std::invalid_argument);
  const Logits fine{0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(weighted_ce_loss(fine, 4, kUniformWeights),
                  std::invalid_argument);
  CHECK_THROWS_AS(weighted_ce_loss(fine, -1, kUniformWeights),
                  std::invalid_argument);
  ClassWeights negative = kUniformWeights;
  negative[2] = -0.1;
  CHECK_THROWS_AS(weighted_ce_loss(fine, 0, negative), std::invalid_argument);
}

TEST_CASE("analytic gradient matches central finite differences") {
  toxpipe::Rng rng(20240818);
  const double eps = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 250; ++trial) {
    Logits logits;
    for (double& l : logits) l = (rng.next_double() - 0.5) * 12.0;
    ClassWeights w;
    for (double& v : w) v = 0.1 + rng.next_double() * 2.9;
    const int label = static_cast<int>(rng.next_below(kNumClasses));
    const Logits grad = loss_gradient(logits, label, w);
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      Logits hi = logits, lo = logits;
      hi[j] += eps;
      lo[j] -= eps;
      const double numeric = (weighted_ce_loss(hi, label, w) -
                              weighted_ce_loss(lo, label, w)) /
                             (2.0 * eps);
      const double scale = std::max({1.0, std::abs(grad[j]), std::abs(numeric)});
      REQUIRE(std::abs(grad[j] - numeric) / scale < 1e-5);
      ++checked;
    }
  }
  CHECK(checked >= 1000);
}

TEST_CASE("gradient components sum to zero") {
  toxpipe::Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    Logits logits;
    for (double& l : logits) l = (rng.next_double() - 0.5) * 20.0;
    ClassWeights w;
    for (double& v : w) v = rng.next_double() * 3.0;
    const auto g = loss_gradient(logits, static_cast<int>(rng.next_below(4)), w);
    CHECK(g[0] + g[1] + g[2] + g[3] == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("weights derived from the violence matrix match the frozen oracle") {
  const auto w = update_weights(violence_matrix());
  // Full-precision values computed independently and frozen.
  CHECK(w[0] == Catch::Approx(1.054637233541227).margin(1e-12));
  CHECK(w[1] == Catch::Approx(1.074033795029847).margin(1e-12));
  CHECK(w[2] == Catch::Approx(0.9928342938116924).margin(1e-12));
  CHECK(w[3] == Catch::Approx(0.8784946776172325).margin(1e-12));
  CHECK(w[0] + w[1] + w[2] + w[3] == Catch::Approx(4.0).margin(1e-9));
}

TEST_CASE("an error-free matrix yields uniform weights") {
  ConfusionMatrix cm;
  cm.add(0, 0, 500);
  cm.add(1, 1, 30);
  cm.add(2, 2, 7);
  cm.add(3, 3, 1);
  CHECK(update_weights(cm) == kUniformWeights);
}

TEST_CASE("an empty matrix yields uniform weights") {
  CHECK(update_weights(ConfusionMatrix{}) == kUniformWeights);
}

TEST_CASE("the floor clamps after normalization") {
  const auto base = update_weights(violence_matrix());
  const double floor = 1.05;
  const auto floored = update_weights(violence_matrix(), floor);
  double expected_sum = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    CHECK(floored[i] == Catch::Approx(std::max(base[i], floor)).margin(1e-12));
    expected_sum += std::max(base[i], floor);
  }
  // A binding floor deliberately breaks the sum-to-four invariant.
  CHECK(expected_sum > 4.0);
  CHECK_THROWS_AS(update_weights(violence_matrix(), -0.01),
                  std::invalid_argument);
}

TEST_CASE("weight invariants hold across random matrices") {
  toxpipe::Rng rng(4242);
  for (int trial = 0; trial < 100; ++trial) {
    ConfusionMatrix cm;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) cm.cells[i][j] = rng.next_below(5000);
    const auto w = update_weights(cm);
    double sum = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      sum += v;
    }
    bool any_error = false;
    for (std::size_t i = 0; i < kNumClasses; ++i)
      if (cm.row_sum(i) + cm.col_sum(i) > 2 * cm.cells[i][i]) any_error = true;
    if (any_error)
      CHECK(sum == Catch::Approx(4.0).margin(1e-9));
    else
      CHECK(w == kUniformWeights);

    // More total errors never means a smaller weight, with others fixed.
    std::array<std::uint64_t, kNumClasses> te{};
    for (std::size_t i = 0; i < kNumClasses; ++i)
      te[i] = cm.row_sum(i) + cm.col_sum(i) - 2 * cm.cells[i][i];
    for (std::size_t i = 0; i < kNumClasses; ++i)
      for (std::size_t j = 0; j < kNumClasses; ++j)
        if (te[i] > te[j]) CHECK(w[i] >= w[j]);
  }
}

TEST_CASE("mean_ce_loss averages the unweighted loss") {
  std::vector<std::pair<Logits, int>> batch;
  batch.push_back({{0.0, 0.0, 0.0, 0.0}, 0});
  batch.push_back({{2.0, -1.0, 0.5, 0.0}, 2});
  batch.push_back({{-3.0, 4.0, 1.0, 2.0}, 1});
  double expected = 0.0;
  for (const auto& [logits, label] : batch)
    expected += weighted_ce_loss(logits, label, kUniformWeights);
  expected /= 3.0;
  CHECK(toxpipe::mean_ce_loss(batch) == Catch::Approx(expected).margin(1e-12));
  CHECK_THROWS_AS(
      toxpipe::mean_ce_loss(std::span<const std::pair<Logits, int>>{}),
      std::invalid_argument);
}
