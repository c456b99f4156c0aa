#pragma once

#include <zlib.h>

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "toxpipe/common.hpp"
#include "toxpipe/scores.hpp"
#include "toxpipe/triage.hpp"

namespace toxpipe {

using Json = nlohmann::ordered_json;

// Who or what produced a record's scores or treatment, and with which
// template. `timestamp` is whatever the caller supplies; pipelines that
// need byte-identical reruns leave it empty.
struct Provenance {
  std::string annotator;
  std::string template_version;
  std::string timestamp;
  std::optional<std::vector<std::string>> edits;
  std::optional<bool> not_toxic;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct CorpusRecord {
  std::string id;
  std::string text;
  std::string source;
  std::string language;
  std::optional<ToxicityScores> scores;
  std::optional<TriageTier> tier;
  std::optional<std::string> treatment_output;
  std::optional<Provenance> provenance;

  void check_valid() const {
    if (id.empty()) throw std::invalid_argument("CorpusRecord: empty id");
    if (text.empty()) throw std::invalid_argument("CorpusRecord: empty text");
    if (scores) scores->check_valid();
  }

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

class CorpusFormatError : public std::runtime_error {
 public:
  CorpusFormatError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// --- JSON mapping -----------------------------------------------------------
// One record per line. Keys are emitted in a fixed order (id, text, source,
// language, scores, tier, treatment_output, provenance) and absent optionals
// are omitted, so writing is a normalizing operation.

inline Json to_json(const ToxicityScores& scores) {
  Json j = Json::object();
  for (std::size_t d = 0; d < kNumDimensions; ++d)
    j[std::string(kDimensionNames[d])] = scores.at(d);
  return j;
}

inline Json to_json(const Provenance& p) {
  Json j = Json::object();
  j["annotator"] = p.annotator;
  j["template_version"] = p.template_version;
  j["timestamp"] = p.timestamp;
  if (p.edits) j["edits"] = *p.edits;
  if (p.not_toxic) j["not_toxic"] = *p.not_toxic;
  return j;
}

inline Json to_json(const CorpusRecord& r) {
  Json j = Json::object();
  j["id"] = r.id;
  j["text"] = r.text;
  j["source"] = r.source;
  j["language"] = r.language;
  if (r.scores) j["scores"] = to_json(*r.scores);
  if (r.tier) j["tier"] = std::string(to_string(*r.tier));
  if (r.treatment_output) j["treatment_output"] = *r.treatment_output;
  if (r.provenance) j["provenance"] = to_json(*r.provenance);
  return j;
}

namespace detail {

inline std::string require_string(const Json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw CorpusFormatError(line, std::string("missing or non-string field '") + key + "'");
  return it->get<std::string>();
}

inline std::string optional_string(const Json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) return {};
  if (!it->is_string())
    throw CorpusFormatError(line, std::string("non-string field '") + key + "'");
  return it->get<std::string>();
}

inline ToxicityScores scores_from_json(const Json& j, std::size_t line) {
  if (!j.is_object()) throw CorpusFormatError(line, "'scores' must be an object");
  ToxicityScores s{};
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const std::string key(kDimensionNames[d]);
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer())
      throw CorpusFormatError(line, "scores: missing or non-integer '" + key + "'");
    const auto v = it->get<std::int64_t>();
    if (v < 0 || v > static_cast<std::int64_t>(kNumClasses - 1))
      throw CorpusFormatError(line, "scores: '" + key + "' out of range 0..3");
    s.values[d] = static_cast<int>(v);
  }
  return s;
}

inline Provenance provenance_from_json(const Json& j, std::size_t line) {
  if (!j.is_object()) throw CorpusFormatError(line, "'provenance' must be an object");
  Provenance p;
  p.annotator = optional_string(j, "annotator", line);
  p.template_version = optional_string(j, "template_version", line);
  p.timestamp = optional_string(j, "timestamp", line);
  if (auto it = j.find("edits"); it != j.end()) {
    if (!it->is_array()) throw CorpusFormatError(line, "provenance: 'edits' must be an array");
    std::vector<std::string> edits;
    for (const Json& e : *it) {
      if (!e.is_string())
        throw CorpusFormatError(line, "provenance: 'edits' entries must be strings");
      edits.push_back(e.get<std::string>());
    }
    p.edits = std::move(edits);
  }
  if (auto it = j.find("not_toxic"); it != j.end()) {
    if (!it->is_boolean())
      throw CorpusFormatError(line, "provenance: 'not_toxic' must be a boolean");
    p.not_toxic = it->get<bool>();
  }
  return p;
}

}  // namespace detail

// Unknown top-level keys are ignored so newer writers stay readable.
inline CorpusRecord record_from_json(const Json& j, std::size_t line = 0) {
  if (!j.is_object()) throw CorpusFormatError(line, "record must be a JSON object");
  CorpusRecord r;
  r.id = detail::require_string(j, "id", line);
  r.text = detail::require_string(j, "text", line);
  r.source = detail::optional_string(j, "source", line);
  r.language = detail::optional_string(j, "language", line);
  if (auto it = j.find("scores"); it != j.end())
    r.scores = detail::scores_from_json(*it, line);
  if (auto it = j.find("tier"); it != j.end()) {
    if (!it->is_string()) throw CorpusFormatError(line, "'tier' must be a string");
    auto tier = tier_from_string(it->get<std::string>());
    if (!tier) throw CorpusFormatError(line, "unknown tier '" + it->get<std::string>() + "'");
    r.tier = *tier;
  }
  if (auto it = j.find("treatment_output"); it != j.end()) {
    if (!it->is_string())
      throw CorpusFormatError(line, "'treatment_output' must be a string");
    r.treatment_output = it->get<std::string>();
  }
  if (auto it = j.find("provenance"); it != j.end())
    r.provenance = detail::provenance_from_json(*it, line);
  if (r.id.empty()) throw CorpusFormatError(line, "empty id");
  if (r.text.empty()) throw CorpusFormatError(line, "empty text");
  return r;
}

inline CorpusRecord parse_record_line(const std::string& text_line, std::size_t line) {
  const Json j = Json::parse(text_line, nullptr, false);
  if (j.is_discarded()) throw CorpusFormatError(line, "invalid JSON");
  return record_from_json(j, line);
}

// --- Line-oriented I/O, gzip-transparent by extension -----------------------

namespace detail {

inline bool has_gz_extension(std::string_view path) {
  return path.size() >= 3 && path.substr(path.size() - 3) == ".gz";
}

class LineSource {
 public:
  virtual ~LineSource() = default;
  virtual bool next(std::string& out) = 0;
};

class PlainLineSource final : public LineSource {
 public:
  explicit PlainLineSource(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open " + path);
  }

  bool next(std::string& out) override {
    if (!std::getline(in_, out)) return false;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

 private:
  std::ifstream in_;
};

class GzLineSource final : public LineSource {
 public:
  explicit GzLineSource(const std::string& path) : path_(path) {
    file_ = gzopen(path.c_str(), "rb");
    if (!file_) throw std::runtime_error("cannot open " + path);
  }

  ~GzLineSource() override {
    if (file_) gzclose(file_);
  }

  GzLineSource(const GzLineSource&) = delete;
  GzLineSource& operator=(const GzLineSource&) = delete;

  bool next(std::string& out) override {
    out.clear();
    while (true) {
      if (pos_ < buffer_.size()) {
        const std::size_t nl = buffer_.find('\n', pos_);
        if (nl != std::string::npos) {
          out.append(buffer_, pos_, nl - pos_);
          pos_ = nl + 1;
          if (!out.empty() && out.back() == '\r') out.pop_back();
          return true;
        }
        out.append(buffer_, pos_, buffer_.size() - pos_);
        buffer_.clear();
        pos_ = 0;
      }
      if (eof_) {
        if (out.empty()) return false;
        if (out.back() == '\r') out.pop_back();
        return true;
      }
      char chunk[1 << 16];
      const int n = gzread(file_, chunk, sizeof(chunk));
      if (n < 0) {
        int errnum = 0;
        const char* msg = gzerror(file_, &errnum);
        throw std::runtime_error("gzip read error in " + path_ + ": " +
                                 (msg ? msg : "unknown"));
      }
      if (n == 0) {
        eof_ = true;
      } else {
        buffer_.append(chunk, static_cast<std::size_t>(n));
      }
    }
  }

 private:
  std::string path_;
  gzFile file_ = nullptr;
  std::string buffer_;
  std::size_t pos_ = 0;
  bool eof_ = false;
};

class LineSink {
 public:
  virtual ~LineSink() = default;
  virtual void write(std::string_view line) = 0;
  virtual void close() = 0;
};

class PlainLineSink final : public LineSink {
 public:
  explicit PlainLineSink(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
  }

  void write(std::string_view line) override {
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.put('\n');
    if (!out_) throw std::runtime_error("write failed: " + path_);
  }

  void close() override {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_);
    out_.close();
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class GzLineSink final : public LineSink {
 public:
  explicit GzLineSink(const std::string& path) : path_(path) {
    // Fixed compression level keeps outputs byte-stable across runs.
    file_ = gzopen(path.c_str(), "wb6");
    if (!file_) throw std::runtime_error("cannot open " + path + " for writing");
  }

  ~GzLineSink() override {
    if (file_) gzclose(file_);
  }

  GzLineSink(const GzLineSink&) = delete;
  GzLineSink& operator=(const GzLineSink&) = delete;

  void write(std::string_view line) override {
    if (!file_) throw std::runtime_error("write after close: " + path_);
    if (!line.empty() &&
        gzwrite(file_, line.data(), static_cast<unsigned>(line.size())) !=
            static_cast<int>(line.size()))
      throw std::runtime_error("gzip write failed: " + path_);
    if (gzwrite(file_, "\n", 1) != 1)
      throw std::runtime_error("gzip write failed: " + path_);
  }

  void close() override {
    if (!file_) return;
    const int rc = gzclose(file_);
    file_ = nullptr;
    if (rc != Z_OK) throw std::runtime_error("gzip close failed: " + path_);
  }

 private:
  std::string path_;
  gzFile file_ = nullptr;
};

inline std::unique_ptr<LineSource> open_line_source(const std::string& path) {
  if (has_gz_extension(path)) return std::make_unique<GzLineSource>(path);
  return std::make_unique<PlainLineSource>(path);
}

inline std::unique_ptr<LineSink> open_line_sink(const std::string& path) {
  if (has_gz_extension(path)) return std::make_unique<GzLineSink>(path);
  return std::make_unique<PlainLineSink>(path);
}

}  // namespace detail

struct ReadDiagnostic {
  std::size_t line = 0;
  std::string message;
};

// Streams records one line at a time with bounded memory. Blank lines are
// skipped silently. In strict mode a malformed line throws
// CorpusFormatError; in lenient mode it is skipped and recorded as a
// diagnostic. Id uniqueness is not enforced here (that would require
// unbounded state); the materializing read_corpus wrapper checks it.
class CorpusReader {
 public:
  explicit CorpusReader(const std::string& path, bool strict = true)
      : source_(detail::open_line_source(path)), strict_(strict) {}

  std::optional<CorpusRecord> next() {
    std::string line;
    while (source_->next(line)) {
      ++line_number_;
      if (trim(line).empty()) continue;
      try {
        return parse_record_line(line, line_number_);
      } catch (const CorpusFormatError& e) {
        if (strict_) throw;
        diagnostics_.push_back({line_number_, e.what()});
      }
    }
    return std::nullopt;
  }

  const std::vector<ReadDiagnostic>& diagnostics() const { return diagnostics_; }
  std::size_t lines_read() const { return line_number_; }

 private:
  std::unique_ptr<detail::LineSource> source_;
  bool strict_;
  std::size_t line_number_ = 0;
  std::vector<ReadDiagnostic> diagnostics_;
};

inline std::vector<CorpusRecord> read_corpus(
    const std::string& path, bool strict = true,
    std::vector<ReadDiagnostic>* diagnostics_out = nullptr) {
  CorpusReader reader(path, strict);
  std::vector<CorpusRecord> records;
  std::unordered_set<std::string> ids;
  while (auto record = reader.next()) {
    if (!ids.insert(record->id).second) {
      if (strict)
        throw CorpusFormatError(reader.lines_read(), "duplicate id '" + record->id + "'");
      continue;
    }
    records.push_back(std::move(*record));
  }
  if (diagnostics_out) *diagnostics_out = reader.diagnostics();
  return records;
}

class CorpusWriter {
 public:
  explicit CorpusWriter(const std::string& path)
      : sink_(detail::open_line_sink(path)) {}

  void write(const CorpusRecord& record) {
    record.check_valid();
    sink_->write(to_json(record).dump());
  }

  void close() { sink_->close(); }

 private:
  std::unique_ptr<detail::LineSink> sink_;
};

inline void write_corpus(std::span<const CorpusRecord> records,
                         const std::string& path) {
  std::unordered_set<std::string> ids;
  for (const CorpusRecord& r : records)
    if (!ids.insert(r.id).second)
      throw std::invalid_argument("write_corpus: duplicate id '" + r.id + "'");
  CorpusWriter writer(path);
  for (const CorpusRecord& r : records) writer.write(r);
  writer.close();
}

// --- Balancing ---------------------------------------------------------------

struct BalanceReport {
  std::uint64_t zero_sum_before = 0;
  std::uint64_t zero_sum_after = 0;
  std::uint64_t toxic_count = 0;
  std::uint64_t dropped = 0;
  std::uint64_t seed = 0;

  // The degenerate no-toxic-records case keeps every zero-sum record.
  bool capped() const { return zero_sum_after < zero_sum_before; }
};

// Caps zero-sum (all scores 0) records at the count of records with any
// toxicity, by uniform subsampling without replacement under the seeded
// generator. Toxic records are never dropped and the relative order of
// survivors is preserved. With no toxic records at all, everything is
// kept; callers should surface that as a warning.
inline std::pair<std::vector<CorpusRecord>, BalanceReport> balance(
    std::span<const CorpusRecord> records, std::uint64_t seed) {
  std::vector<std::size_t> zero_sum_positions;
  BalanceReport report;
  report.seed = seed;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].scores)
      throw std::invalid_argument("balance: record '" + records[i].id + "' has no scores");
    records[i].scores->check_valid();
    if (records[i].scores->total() == 0)
      zero_sum_positions.push_back(i);
    else
      ++report.toxic_count;
  }
  report.zero_sum_before = zero_sum_positions.size();

  std::vector<bool> keep(records.size(), true);
  if (report.toxic_count > 0 && report.zero_sum_before > report.toxic_count) {
    Rng rng(seed);
    rng.shuffle(zero_sum_positions);
    for (std::size_t i = static_cast<std::size_t>(report.toxic_count);
         i < zero_sum_positions.size(); ++i)
      keep[zero_sum_positions[i]] = false;
    report.zero_sum_after = report.toxic_count;
  } else {
    report.zero_sum_after = report.zero_sum_before;
  }
  report.dropped = report.zero_sum_before - report.zero_sum_after;

  std::vector<CorpusRecord> kept;
  kept.reserve(records.size() - static_cast<std::size_t>(report.dropped));
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) kept.push_back(records[i]);
  return {std::move(kept), report};
}

// --- Splitting ---------------------------------------------------------------

enum class SplitBucket { kTrain, kValidation, kTest };

struct SplitFractions {
  double train = 0.83;
  double validation = 0.17;
  double test = 0.0;

  // Fractions are ratios: they must be non-negative with a positive sum,
  // and are normalized to sum to 1 so every record lands in a bucket.
  void check_valid() const {
    if (!(train >= 0.0) || !(validation >= 0.0) || !(test >= 0.0))
      throw std::invalid_argument("SplitFractions: fractions must be non-negative");
    if (!(train + validation + test > 0.0))
      throw std::invalid_argument("SplitFractions: fractions must not all be zero");
    if (train + validation + test > 1.0 + 1e-9)
      throw std::invalid_argument("SplitFractions: fractions must sum to at most 1");
  }
};

// Pure function of (id, seed): hashing the id rather than shuffling indices
// keeps old records in their buckets when a corpus grows or is reordered.
inline SplitBucket assign_split(std::string_view id, const SplitFractions& fractions,
                                std::uint64_t seed) {
  fractions.check_valid();
  const double sum = fractions.train + fractions.validation + fractions.test;
  const std::uint64_t h = mix64(fnv1a64(id) ^ mix64(seed));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (u < fractions.train / sum) return SplitBucket::kTrain;
  if (u < (fractions.train + fractions.validation) / sum) return SplitBucket::kValidation;
  return SplitBucket::kTest;
}

struct SplitResult {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> validation;
  std::vector<CorpusRecord> test;
};

inline SplitResult split(std::span<const CorpusRecord> records,
                         const SplitFractions& fractions, std::uint64_t seed) {
  fractions.check_valid();
  SplitResult result;
  for (const CorpusRecord& r : records) {
    switch (assign_split(r.id, fractions, seed)) {
      case SplitBucket::kTrain: result.train.push_back(r); break;
      case SplitBucket::kValidation: result.validation.push_back(r); break;
      case SplitBucket::kTest: result.test.push_back(r); break;
    }
  }
  return result;
}

}  // namespace toxpipe
