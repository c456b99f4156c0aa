#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "toxpipe/common.hpp"
#include "toxpipe/confusion.hpp"
#include "toxpipe/features.hpp"
#include "toxpipe/loss.hpp"
#include "toxpipe/metrics.hpp"
#include "toxpipe/scores.hpp"

namespace toxpipe {

// Consecutive epochs without a validation improvement before training stops.
inline constexpr std::uint32_t kEarlyStopPatience = 3;

enum class WeightUpdateSource { kTrainEpoch, kValidation };

inline std::string_view to_string(WeightUpdateSource s) {
  return s == WeightUpdateSource::kTrainEpoch ? "train_epoch" : "validation";
}

struct TrainConfig {
  std::uint32_t max_epochs = 20;
  double learning_rate = 0.1;
  std::uint32_t batch_size = 256;
  std::uint64_t seed = 0;
  WeightUpdateSource weight_update_source = WeightUpdateSource::kTrainEpoch;
  double weight_floor = 0.0;
  // Characters kept per text before featurization; 0 means uncapped.
  std::uint32_t max_text_length = 2048;
  std::uint32_t feature_dim = kDefaultFeatureDim;
  // Ablation switch: false freezes all heads at uniform class weights.
  bool dynamic_weights = true;

  void check_valid() const {
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!is_power_of_two(feature_dim))
      throw std::invalid_argument("TrainConfig: feature_dim must be a power of two");
    if (!(weight_floor >= 0.0))
      throw std::invalid_argument("TrainConfig: weight_floor must be non-negative");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Stable fingerprint of the knobs that shape a trained model; stored in the
// model header so a mismatched config is visible at load time.
inline std::string train_config_fingerprint(const TrainConfig& c) {
  std::ostringstream os;
  os << std::hexfloat;
  os << "max_epochs=" << c.max_epochs << ";learning_rate=" << c.learning_rate
     << ";batch_size=" << c.batch_size << ";seed=" << c.seed
     << ";weight_update_source=" << to_string(c.weight_update_source)
     << ";weight_floor=" << c.weight_floor << ";max_text_length=" << c.max_text_length
     << ";feature_dim=" << c.feature_dim
     << ";dynamic_weights=" << (c.dynamic_weights ? 1 : 0);
  return to_hex(fnv1a64(os.str()));
}

// One linear map feature_dim -> C logits. Weights are stored feature-major
// (entry index*C + class) so one sparse feature touches a contiguous block.
struct LinearHead {
  std::vector<double> weights;
  std::array<double, kNumClasses> bias{};
  ClassWeights class_weights = kUniformWeights;

  Logits logits_for(const FeatureVector& fv) const {
    Logits l = bias;
    for (const auto& [idx, w] : fv.entries) {
      const double* row = &weights[static_cast<std::size_t>(idx) * kNumClasses];
      for (std::size_t c = 0; c < kNumClasses; ++c) l[c] += w * row[c];
    }
    return l;
  }
};

struct MultiHeadModel {
  std::uint32_t feature_dim = kDefaultFeatureDim;
  std::uint32_t max_text_length = 2048;
  std::uint64_t seed = 0;
  std::uint32_t epochs_run = 0;
  std::string config_hash;
  std::string feature_hash_id{kFeatureHashId};
  // Head order follows Dimension: racial_origin, gender_sex, religion,
  // ability, violence.
  std::array<LinearHead, kNumDimensions> heads;
};

struct LabeledSample {
  std::string text;
  ToxicityScores labels;
};

// Highest logit wins; exact ties go to the lower (less severe) class.
inline int argmax_lowest_tie(const Logits& logits) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(kNumClasses); ++j)
    if (logits[static_cast<std::size_t>(j)] > logits[static_cast<std::size_t>(best)])
      best = j;
  return best;
}

inline ToxicityScores predict(const MultiHeadModel& model, std::string_view text) {
  const FeatureVector fv =
      featurize(cap_text(text, model.max_text_length), model.feature_dim);
  ToxicityScores out{};
  for (std::size_t h = 0; h < kNumDimensions; ++h)
    out.values[h] = argmax_lowest_tie(model.heads[h].logits_for(fv));
  return out;
}

inline std::array<ConfusionMatrix, kNumDimensions> accumulate_confusion(
    const MultiHeadModel& model, std::span<const LabeledSample> records) {
  std::array<ConfusionMatrix, kNumDimensions> cms{};
  for (const LabeledSample& r : records) {
    r.labels.check_valid();
    const ToxicityScores pred = predict(model, r.text);
    for (std::size_t h = 0; h < kNumDimensions; ++h) cms[h].add(r.labels.at(h), pred.at(h));
  }
  return cms;
}

// Per-epoch training trace. Losses are means over samples of the
// summed-over-heads per-sample loss. train_loss uses the class weights in
// effect during that epoch; valid_loss is unweighted so the curve stays
// comparable across epochs even as weights move.
struct EpochStats {
  std::uint32_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_mean_weighted_accuracy = 0.0;
  std::array<ClassWeights, kNumDimensions> weights_in_effect{};
};

struct TrainResult {
  MultiHeadModel model;
  std::vector<EpochStats> history;
  std::uint32_t best_epoch = 0;
};

namespace detail {

inline double mean_weighted_accuracy(
    const std::array<ConfusionMatrix, kNumDimensions>& cms) {
  double sum = 0.0;
  for (const ConfusionMatrix& cm : cms) sum += compute_metrics(cm).weighted_accuracy;
  return sum / static_cast<double>(kNumDimensions);
}

}  // namespace detail

// Mini-batch gradient descent on the sum of the five heads' weighted CE
// losses. Epoch 1 runs with uniform weights; at each epoch boundary every
// head's weights are recomputed from the confusion matrix accumulated over
// the configured source (that epoch's own training predictions, or the
// epoch-end validation pass). Each batch is forwarded entirely at the
// pre-batch parameters, then the averaged updates are applied in sample
// order, so runs are bit-identical given the same seed. Training stops
// early once validation mean weighted accuracy has not improved for
// kEarlyStopPatience consecutive epochs; the returned parameters are those
// of the last epoch run.
inline TrainResult train(std::span<const LabeledSample> train_set,
                         std::span<const LabeledSample> valid_set,
                         const TrainConfig& config) {
  config.check_valid();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (valid_set.empty()) throw std::invalid_argument("train: empty validation set");
  for (const LabeledSample& s : train_set) s.labels.check_valid();
  for (const LabeledSample& s : valid_set) s.labels.check_valid();

  TrainResult result;
  MultiHeadModel& model = result.model;
  model.feature_dim = config.feature_dim;
  model.max_text_length = config.max_text_length;
  model.seed = config.seed;
  model.config_hash = train_config_fingerprint(config);
  const std::size_t row_count =
      static_cast<std::size_t>(config.feature_dim) * kNumClasses;
  for (LinearHead& head : model.heads) head.weights.assign(row_count, 0.0);

  auto featurize_all = [&](std::span<const LabeledSample> set) {
    std::vector<FeatureVector> out;
    out.reserve(set.size());
    for (const LabeledSample& s : set)
      out.push_back(featurize(cap_text(s.text, config.max_text_length), config.feature_dim));
    return out;
  };
  const std::vector<FeatureVector> train_features = featurize_all(train_set);
  const std::vector<FeatureVector> valid_features = featurize_all(valid_set);

  Rng rng(config.seed);
  std::vector<std::uint32_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0u);

  double best_wa = -1.0;
  std::uint32_t best_epoch = 0;
  std::vector<std::array<Logits, kNumDimensions>> batch_grads;

  for (std::uint32_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t h = 0; h < kNumDimensions; ++h)
      stats.weights_in_effect[h] = model.heads[h].class_weights;

    rng.shuffle(order);
    std::array<ConfusionMatrix, kNumDimensions> epoch_cm{};
    double loss_sum = 0.0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch_grads.clear();
      for (std::size_t i = start; i < end; ++i) {
        const std::uint32_t sample = order[i];
        const FeatureVector& fv = train_features[sample];
        std::array<Logits, kNumDimensions> grads{};
        for (std::size_t h = 0; h < kNumDimensions; ++h) {
          const LinearHead& head = model.heads[h];
          const Logits logits = head.logits_for(fv);
          const int label = train_set[sample].labels.at(h);
          loss_sum += weighted_ce_loss(logits, label, head.class_weights);
          epoch_cm[h].add(label, argmax_lowest_tie(logits));
          grads[h] = loss_gradient(logits, label, head.class_weights);
        }
        batch_grads.push_back(grads);
      }

      const double step = config.learning_rate / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const FeatureVector& fv = train_features[order[i]];
        const auto& grads = batch_grads[i - start];
        for (std::size_t h = 0; h < kNumDimensions; ++h) {
          LinearHead& head = model.heads[h];
          for (const auto& [idx, w] : fv.entries) {
            double* row = &head.weights[static_cast<std::size_t>(idx) * kNumClasses];
            for (std::size_t c = 0; c < kNumClasses; ++c) row[c] -= step * grads[h][c] * w;
          }
          for (std::size_t c = 0; c < kNumClasses; ++c)
            head.bias[c] -= step * grads[h][c];
        }
      }
    }
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());

    std::array<ConfusionMatrix, kNumDimensions> valid_cm{};
    double valid_loss_sum = 0.0;
    for (std::size_t i = 0; i < valid_set.size(); ++i) {
      for (std::size_t h = 0; h < kNumDimensions; ++h) {
        const Logits logits = model.heads[h].logits_for(valid_features[i]);
        const int label = valid_set[i].labels.at(h);
        valid_loss_sum += weighted_ce_loss(logits, label, kUniformWeights);
        valid_cm[h].add(label, argmax_lowest_tie(logits));
      }
    }
    stats.valid_loss = valid_loss_sum / static_cast<double>(valid_set.size());
    stats.valid_mean_weighted_accuracy = detail::mean_weighted_accuracy(valid_cm);

    result.history.push_back(stats);
    model.epochs_run = epoch;

    if (stats.valid_mean_weighted_accuracy > best_wa) {
      best_wa = stats.valid_mean_weighted_accuracy;
      best_epoch = epoch;
    }

    if (config.dynamic_weights) {
      const auto& source = config.weight_update_source == WeightUpdateSource::kValidation
                               ? valid_cm
                               : epoch_cm;
      for (std::size_t h = 0; h < kNumDimensions; ++h)
        model.heads[h].class_weights = update_weights(source[h], config.weight_floor);
    }

    if (epoch - best_epoch >= kEarlyStopPatience) break;
  }

  result.best_epoch = best_epoch;
  return result;
}

// --- Model container ------------------------------------------------------
//
// Layout (all integers and doubles little-endian):
//   "TXPM" | u32 format_version | u32 feature_dim | u32 C | u32 n_heads |
//   n_heads length-prefixed head names | hash-id string | config-hash string |
//   u32 max_text_length | u64 seed | u32 epochs_run |
//   per head: feature_dim*C weight doubles (feature-major), C biases,
//             C class weights.

inline constexpr std::string_view kModelMagic = "TXPM";
inline constexpr std::uint32_t kModelFormatVersion = 1;
// Upper bound on accepted feature_dim at load: caps the decode allocation
// at 512 MiB per head.
inline constexpr std::uint32_t kMaxLoadableFeatureDim = 1u << 24;

namespace detail {

inline void put_uint(std::ostream& os, std::uint64_t v, int nbytes) {
  char buf[8];
  for (int i = 0; i < nbytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, nbytes);
}

inline void put_u32(std::ostream& os, std::uint32_t v) { put_uint(os, v, 4); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put_uint(os, v, 8); }

inline void put_f64(std::ostream& os, double d) {
  put_uint(os, std::bit_cast<std::uint64_t>(d), 8);
}

inline void put_str(std::ostream& os, std::string_view s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint64_t get_uint(std::istream& is, int nbytes) {
  char buf[8];
  if (!is.read(buf, nbytes)) throw std::runtime_error("model load: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < nbytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

inline std::uint32_t get_u32(std::istream& is) {
  return static_cast<std::uint32_t>(get_uint(is, 4));
}
inline std::uint64_t get_u64(std::istream& is) { return get_uint(is, 8); }

inline double get_f64(std::istream& is) {
  return std::bit_cast<double>(get_uint(is, 8));
}

inline std::string get_str(std::istream& is) {
  const std::uint32_t len = get_u32(is);
  if (len > (1u << 20)) throw std::runtime_error("model load: unreasonable string length");
  std::string s(len, '\0');
  if (len > 0 && !is.read(s.data(), len))
    throw std::runtime_error("model load: truncated file");
  return s;
}

}  // namespace detail

inline void save_model(std::ostream& os, const MultiHeadModel& model) {
  os.write(kModelMagic.data(), static_cast<std::streamsize>(kModelMagic.size()));
  detail::put_u32(os, kModelFormatVersion);
  detail::put_u32(os, model.feature_dim);
  detail::put_u32(os, kNumClasses);
  detail::put_u32(os, kNumDimensions);
  for (std::string_view name : kDimensionNames) detail::put_str(os, name);
  detail::put_str(os, model.feature_hash_id);
  detail::put_str(os, model.config_hash);
  detail::put_u32(os, model.max_text_length);
  detail::put_u64(os, model.seed);
  detail::put_u32(os, model.epochs_run);
  const std::size_t row_count =
      static_cast<std::size_t>(model.feature_dim) * kNumClasses;
  for (const LinearHead& head : model.heads) {
    if (head.weights.size() != row_count)
      throw std::invalid_argument("save_model: head weight size does not match feature_dim");
    for (double w : head.weights) detail::put_f64(os, w);
    for (double b : head.bias) detail::put_f64(os, b);
    for (double w : head.class_weights) detail::put_f64(os, w);
  }
  if (!os) throw std::runtime_error("save_model: write failed");
}

inline void save_model(const std::string& path, const MultiHeadModel& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_model: cannot open " + path);
  save_model(os, model);
  os.flush();
  if (!os) throw std::runtime_error("save_model: write failed: " + path);
}

// `expected_feature_dim` 0 accepts whatever the file declares; any other
// value must match exactly.
inline MultiHeadModel load_model(std::istream& is,
                                 std::uint32_t expected_feature_dim = 0) {
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != kModelMagic)
    throw std::runtime_error("model load: bad magic, not a model file");
  const std::uint32_t version = detail::get_u32(is);
  if (version != kModelFormatVersion)
    throw std::runtime_error("model load: unsupported format version " +
                             std::to_string(version));
  MultiHeadModel model;
  model.feature_dim = detail::get_u32(is);
  if (!is_power_of_two(model.feature_dim) || model.feature_dim > kMaxLoadableFeatureDim)
    throw std::runtime_error("model load: invalid feature_dim");
  if (expected_feature_dim != 0 && model.feature_dim != expected_feature_dim)
    throw std::runtime_error("model load: feature_dim mismatch");
  if (detail::get_u32(is) != kNumClasses)
    throw std::runtime_error("model load: class count mismatch");
  if (detail::get_u32(is) != kNumDimensions)
    throw std::runtime_error("model load: head count mismatch");
  for (std::string_view name : kDimensionNames) {
    if (detail::get_str(is) != name)
      throw std::runtime_error("model load: head order mismatch");
  }
  model.feature_hash_id = detail::get_str(is);
  if (model.feature_hash_id != kFeatureHashId)
    throw std::runtime_error("model load: incompatible feature hash id '" +
                             model.feature_hash_id + "'");
  model.config_hash = detail::get_str(is);
  model.max_text_length = detail::get_u32(is);
  model.seed = detail::get_u64(is);
  model.epochs_run = detail::get_u32(is);
  const std::size_t row_count =
      static_cast<std::size_t>(model.feature_dim) * kNumClasses;
  for (LinearHead& head : model.heads) {
    head.weights.resize(row_count);
    for (double& w : head.weights) w = detail::get_f64(is);
    for (double& b : head.bias) b = detail::get_f64(is);
    for (double& w : head.class_weights) w = detail::get_f64(is);
  }
  return model;
}

inline MultiHeadModel load_model(const std::string& path,
                                 std::uint32_t expected_feature_dim = 0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_model: cannot open " + path);
  return load_model(is, expected_feature_dim);
}

}  // namespace toxpipe
