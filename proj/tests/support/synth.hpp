#pragma once

// Deterministic synthetic corpora for classifier and pipeline tests. Each
// record's text carries one signal token per dimension that encodes the
// label, so a linear model over character n-grams can learn the mapping.
// Class frequencies imitate the heavy imbalance of a real toxicity corpus
// (the overwhelming majority of texts score 0 everywhere).

#include <array>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "toxpipe/classifier.hpp"
#include "toxpipe/common.hpp"
#include "toxpipe/corpus.hpp"
#include "toxpipe/scores.hpp"

namespace toxsynth {

// Rounded training-set class proportions per dimension.
inline constexpr std::array<std::array<double, 4>, 5> kClassProportions = {{
    {0.934, 0.021, 0.028, 0.017},  // racial_origin
    {0.927, 0.046, 0.025, 0.002},  // gender_sex
    {0.878, 0.054, 0.054, 0.014},  // religion
    {0.979, 0.016, 0.004, 0.001},  // ability
    {0.638, 0.210, 0.107, 0.046},  // violence
}};

inline std::string signal_token(std::size_t dim, int cls) {
  std::string t = "sig";
  t += static_cast<char>('a' + dim);
  t += static_cast<char>('0' + cls);
  t += "qz";
  return t;
}

inline int draw_class(std::size_t dim, toxpipe::Rng& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  for (int c = 0; c < 4; ++c) {
    acc += kClassProportions[dim][c];
    if (u < acc) return c;
  }
  return 0;
}

struct SynthOptions {
  std::size_t count = 10000;
  // Probability that a nonzero class's signal token is swapped for the
  // next lower class's token. 0 gives a cleanly separable corpus.
  double neighbor_noise = 0.0;
  std::uint64_t seed = 0;
};

inline std::vector<toxpipe::LabeledSample> make_samples(const SynthOptions& options) {
  static const std::array<std::string, 16> kFiller = {
      "meadow", "harbor", "lantern", "orchard", "violin", "compass", "araucaria",
      "pergola", "quum",   "sonata", "brook",   "almanac", "gazette", "parlor",
      "carriage", "steamer"};
  toxpipe::Rng rng(options.seed);
  std::vector<toxpipe::LabeledSample> samples;
  samples.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    toxpipe::LabeledSample sample;
    std::string text;
    const std::size_t words = 4 + rng.next_below(4);
    for (std::size_t w = 0; w < words; ++w) {
      text += kFiller[rng.next_below(kFiller.size())];
      text += ' ';
    }
    for (std::size_t d = 0; d < toxpipe::kNumDimensions; ++d) {
      const int cls = draw_class(d, rng);
      sample.labels.at(d) = cls;
      int token_cls = cls;
      if (cls > 0 && options.neighbor_noise > 0.0 &&
          rng.next_double() < options.neighbor_noise)
        token_cls = cls - 1;
      text += signal_token(d, token_cls);
      text += ' ';
    }
    if (!text.empty()) text.pop_back();
    sample.text = std::move(text);
    samples.push_back(std::move(sample));
  }
  return samples;
}

inline std::vector<toxpipe::CorpusRecord> make_corpus(const SynthOptions& options,
                                                      const std::string& id_prefix) {
  const auto samples = make_samples(options);
  std::vector<toxpipe::CorpusRecord> records;
  records.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    toxpipe::CorpusRecord r;
    std::ostringstream id;
    id << id_prefix << std::setw(6) << std::setfill('0') << i;
    r.id = id.str();
    r.text = samples[i].text;
    r.source = "synthetic";
    r.language = "en";
    r.scores = samples[i].labels;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace toxsynth
