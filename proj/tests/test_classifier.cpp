#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "support/synth.hpp"
#include "toxpipe/classifier.hpp"

using toxpipe::argmax_lowest_tie;
using toxpipe::kNumClasses;
using toxpipe::kNumDimensions;
using toxpipe::kUniformWeights;
using toxpipe::LabeledSample;
using toxpipe::load_model;
using toxpipe::Logits;
using toxpipe::MultiHeadModel;
using toxpipe::save_model;
using toxpipe::train;
using toxpipe::TrainConfig;

namespace {

// A small, quickly separable corpus plus a held-out slice.
struct SmallData {
  std::vector<LabeledSample> train_set;
  std::vector<LabeledSample> valid_set;
};

SmallData small_data(double noise, std::uint64_t seed, std::size_t n_train = 1200,
                     std::size_t n_valid = 300) {
  toxsynth::SynthOptions opt;
  opt.count = n_train + n_valid;
  opt.neighbor_noise = noise;
  opt.seed = seed;
  auto samples = toxsynth::make_samples(opt);
  SmallData d;
  d.train_set.assign(samples.begin(), samples.begin() + n_train);
  d.valid_set.assign(samples.begin() + n_train, samples.end());
  return d;
}

TrainConfig small_config() {
  TrainConfig c;
  c.max_epochs = 8;
  c.learning_rate = 0.5;
  c.batch_size = 32;
  c.feature_dim = 1u << 12;
  c.seed = 11;
  return c;
}

std::string serialize(const MultiHeadModel& model) {
  std::ostringstream os(std::ios::binary);
  save_model(os, model);
  return os.str();
}

MultiHeadModel deserialize(const std::string& bytes,
                           std::uint32_t expected_dim = 0) {
  std::istringstream is(bytes, std::ios::binary);
  return load_model(is, expected_dim);
}

}  // namespace

TEST_CASE("argmax breaks exact ties toward the lower class") {
  CHECK(argmax_lowest_tie({1.0, 1.0, 0.0, 0.0}) == 0);
  CHECK(argmax_lowest_tie({0.0, 2.0, 2.0, 0.0}) == 1);
  CHECK(argmax_lowest_tie({0.0, 0.0, 0.0, 0.0}) == 0);
  CHECK(argmax_lowest_tie({0.0, 0.0, 0.0, 5.0}) == 3);
  CHECK(argmax_lowest_tie({-1.0, -0.5, -2.0, -0.5}) == 1);
}

TEST_CASE("training is bit-identical for a fixed seed") {
  const auto data = small_data(0.1, 3, 400, 100);
  TrainConfig config = small_config();
  config.max_epochs = 3;

  const auto a = train(data.train_set, data.valid_set, config);
  const auto b = train(data.train_set, data.valid_set, config);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.history[e].valid_loss == b.history[e].valid_loss);
  }
  for (std::size_t h = 0; h < kNumDimensions; ++h) {
    CHECK(a.model.heads[h].weights == b.model.heads[h].weights);
    CHECK(a.model.heads[h].bias == b.model.heads[h].bias);
    CHECK(a.model.heads[h].class_weights == b.model.heads[h].class_weights);
  }

  config.seed = 12;
  const auto c = train(data.train_set, data.valid_set, config);
  CHECK(c.model.heads[0].weights != a.model.heads[0].weights);
  CHECK(c.model.config_hash != a.model.config_hash);
}

TEST_CASE("training stops after the patience window without improvement") {
  const auto data = small_data(0.0, 5, 200, 60);
  TrainConfig config = small_config();
  config.max_epochs = 20;
  // A learning rate this small cannot move the zero-initialized model, so
  // validation accuracy never improves after the first epoch.
  config.learning_rate = 1e-12;

  const auto r = train(data.train_set, data.valid_set, config);
  CHECK(r.best_epoch == 1);
  CHECK(r.model.epochs_run == 1 + toxpipe::kEarlyStopPatience);
  CHECK(r.history.size() == r.model.epochs_run);
}

TEST_CASE("a separable corpus trains to high accuracy") {
  const auto data = small_data(0.0, 7);
  TrainConfig config = small_config();
  // Rare classes appear a handful of times per epoch, so they need a hot
  // step size and a few extra passes to pull ahead of the majority logit.
  config.learning_rate = 5.0;
  config.max_epochs = 12;
  const auto r = train(data.train_set, data.valid_set, config);

  REQUIRE(r.history.size() >= 2);
  CHECK(r.history[1].valid_loss < r.history[0].valid_loss);

  const auto cms = accumulate_confusion(r.model, data.valid_set);
  for (std::size_t h = 0; h < kNumDimensions; ++h) {
    const auto m = toxpipe::compute_metrics(cms[h]);
    INFO("head " << toxpipe::kDimensionNames[h]);
    CHECK(m.accuracy >= 0.95);
  }
}

TEST_CASE("predictions depend only on the capped prefix of the text") {
  const auto data = small_data(0.0, 9, 300, 80);
  TrainConfig config = small_config();
  config.max_epochs = 2;
  config.max_text_length = 24;
  const auto r = train(data.train_set, data.valid_set, config);
  CHECK(r.model.max_text_length == 24);

  const std::string prefix = "meadow harbor lantern ab";
  REQUIRE(prefix.size() == 24);
  const auto with_tail = predict(r.model, prefix + " completely different tail");
  const auto bare = predict(r.model, prefix);
  CHECK(with_tail.values == bare.values);
}

TEST_CASE("dynamic weights move while the ablation stays uniform") {
  const auto data = small_data(0.25, 13);
  TrainConfig config = small_config();
  config.max_epochs = 3;

  const auto dynamic = train(data.train_set, data.valid_set, config);
  // Epoch 1 always starts uniform; later epochs must reflect an update.
  for (std::size_t h = 0; h < kNumDimensions; ++h)
    CHECK(dynamic.history[0].weights_in_effect[h] == kUniformWeights);
  REQUIRE(dynamic.history.size() >= 2);
  bool any_moved = false;
  for (std::size_t h = 0; h < kNumDimensions; ++h)
    if (dynamic.history[1].weights_in_effect[h] != kUniformWeights) any_moved = true;
  CHECK(any_moved);

  config.dynamic_weights = false;
  const auto uniform = train(data.train_set, data.valid_set, config);
  for (const auto& stats : uniform.history)
    for (std::size_t h = 0; h < kNumDimensions; ++h)
      CHECK(stats.weights_in_effect[h] == kUniformWeights);
  for (std::size_t h = 0; h < kNumDimensions; ++h)
    CHECK(uniform.model.heads[h].class_weights == kUniformWeights);
}

TEST_CASE("a model round trips through its binary form") {
  const auto data = small_data(0.0, 17, 300, 80);
  TrainConfig config = small_config();
  config.max_epochs = 2;
  const auto r = train(data.train_set, data.valid_set, config);

  const std::string bytes = serialize(r.model);
  const MultiHeadModel loaded = deserialize(bytes);

  CHECK(loaded.feature_dim == r.model.feature_dim);
  CHECK(loaded.max_text_length == r.model.max_text_length);
  CHECK(loaded.seed == r.model.seed);
  CHECK(loaded.epochs_run == r.model.epochs_run);
  CHECK(loaded.config_hash == r.model.config_hash);
  CHECK(loaded.feature_hash_id == r.model.feature_hash_id);
  for (std::size_t h = 0; h < kNumDimensions; ++h) {
    CHECK(loaded.heads[h].weights == r.model.heads[h].weights);
    CHECK(loaded.heads[h].bias == r.model.heads[h].bias);
    CHECK(loaded.heads[h].class_weights == r.model.heads[h].class_weights);
  }
  for (const auto& s : data.valid_set)
    CHECK(predict(loaded, s.text).values == predict(r.model, s.text).values);

  // Serialization is deterministic, so re-saving reproduces the bytes.
  CHECK(serialize(loaded) == bytes);
}

TEST_CASE("the loader rejects damaged or mismatched files") {
  const auto data = small_data(0.0, 19, 120, 40);
  TrainConfig config = small_config();
  config.max_epochs = 1;
  config.feature_dim = 1u << 8;
  const auto r = train(data.train_set, data.valid_set, config);
  const std::string bytes = serialize(r.model);

  SECTION("bad magic") {
    std::string t = bytes;
    t[0] = 'X';
    CHECK_THROWS_WITH(deserialize(t), Catch::Matchers::ContainsSubstring("magic"));
  }
  SECTION("unsupported version") {
    std::string t = bytes;
    t[4] = 9;
    CHECK_THROWS_WITH(deserialize(t),
                      Catch::Matchers::ContainsSubstring("version"));
  }
  SECTION("non-power-of-two feature_dim") {
    std::string t = bytes;
    t[8] = 3;  // feature_dim field, little-endian low byte
    CHECK_THROWS_WITH(deserialize(t),
                      Catch::Matchers::ContainsSubstring("feature_dim"));
  }
  SECTION("feature_dim differs from the caller's expectation") {
    CHECK_THROWS_WITH(deserialize(bytes, 1u << 9),
                      Catch::Matchers::ContainsSubstring("mismatch"));
    CHECK_NOTHROW(deserialize(bytes, 1u << 8));
  }
  SECTION("tampered head name") {
    std::string t = bytes;
    const auto pos = t.find("violence");
    REQUIRE(pos != std::string::npos);
    t[pos] = 'V';  // names are compared exactly
    CHECK_THROWS_WITH(deserialize(t),
                      Catch::Matchers::ContainsSubstring("head order"));
  }
  SECTION("foreign featurization scheme") {
    std::string t = bytes;
    const auto pos = t.find("fnv1a64");
    REQUIRE(pos != std::string::npos);
    t[pos] = 'x';
    CHECK_THROWS_WITH(deserialize(t),
                      Catch::Matchers::ContainsSubstring("feature hash"));
  }
  SECTION("truncated file") {
    CHECK_THROWS_WITH(deserialize(bytes.substr(0, bytes.size() / 2)),
                      Catch::Matchers::ContainsSubstring("truncated"));
    CHECK_THROWS_WITH(deserialize(bytes.substr(0, 3)),
                      Catch::Matchers::ContainsSubstring("magic"));
  }
}

TEST_CASE("config fingerprints react to every knob") {
  TrainConfig base;
  const std::string baseline = train_config_fingerprint(base);
  CHECK(train_config_fingerprint(TrainConfig{}) == baseline);

  TrainConfig t = base;
  t.max_epochs = 21;
  CHECK(train_config_fingerprint(t) != baseline);
  t = base;
  t.learning_rate = 0.11;
  CHECK(train_config_fingerprint(t) != baseline);
  t = base;
  t.batch_size = 128;
  CHECK(train_config_fingerprint(t) != baseline);
  t = base;
  t.seed = 1;
  CHECK(train_config_fingerprint(t) != baseline);
  t = base;
  t.weight_update_source = toxpipe::WeightUpdateSource::kValidation;
  CHECK(train_config_fingerprint(t) != baseline);
  t = base;
  t.weight_floor = 0.2;
  CHECK(train_config_fingerprint(t) != baseline);
  t = base;
  t.max_text_length = 512;
  CHECK(train_config_fingerprint(t) != baseline);
  t = base;
  t.feature_dim = 1u << 16;
  CHECK(train_config_fingerprint(t) != baseline);
  t = base;
  t.dynamic_weights = false;
  CHECK(train_config_fingerprint(t) != baseline);
}

TEST_CASE("invalid configs and empty sets are rejected") {
  const auto data = small_data(0.0, 23, 40, 10);
  TrainConfig config = small_config();

  CHECK_THROWS_AS(train({}, data.valid_set, config), std::invalid_argument);
  CHECK_THROWS_AS(train(data.train_set, {}, config), std::invalid_argument);

  config.learning_rate = 0.0;
  CHECK_THROWS_AS(config.check_valid(), std::invalid_argument);
  config = small_config();
  config.feature_dim = 1000;
  CHECK_THROWS_AS(config.check_valid(), std::invalid_argument);
  config = small_config();
  config.max_epochs = 0;
  CHECK_THROWS_AS(config.check_valid(), std::invalid_argument);

  LabeledSample bad;
  bad.text = "text";
  bad.labels.values = {0, 0, 0, 0, 4};
  const std::vector<LabeledSample> bad_set{bad};
  CHECK_THROWS_AS(train(bad_set, data.valid_set, small_config()),
                  std::invalid_argument);
}
