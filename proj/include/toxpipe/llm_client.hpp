#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "toxpipe/annotation.hpp"
#include "toxpipe/common.hpp"
#include "toxpipe/prompts.hpp"
#include "toxpipe/scores.hpp"

namespace toxpipe {

struct EndpointConfig {
  std::string base_url;
  std::string model;
  // Name of the environment variable holding the bearer token; the secret
  // itself never appears in config or logs.
  std::string auth_env;
  int max_in_flight = 4;
  int timeout_ms = 30000;
  int retry_budget = 2;
  std::string language = "en";
  double temperature = 0.0;
  // Base of the exponential backoff between retries; 0 disables sleeping.
  int backoff_base_ms = 100;

  void check_valid() const {
    if (base_url.empty()) throw std::invalid_argument("EndpointConfig: empty base_url");
    if (max_in_flight < 1)
      throw std::invalid_argument("EndpointConfig: max_in_flight must be >= 1");
    if (retry_budget < 0)
      throw std::invalid_argument("EndpointConfig: retry_budget must be >= 0");
    if (timeout_ms <= 0) throw std::invalid_argument("EndpointConfig: timeout_ms must be > 0");
    if (backoff_base_ms < 0)
      throw std::invalid_argument("EndpointConfig: backoff_base_ms must be >= 0");
  }
};

struct ChatRequest {
  std::string system;
  std::string user;
  std::string model;
  double temperature = 0.0;
};

enum class TransportErrorKind { kRetryable, kAuth, kFatal };

struct TransportResult {
  bool ok = false;
  std::string content;
  TransportErrorKind error_kind = TransportErrorKind::kFatal;
  std::string error;
  int http_status = 0;

  static TransportResult success(std::string text) {
    TransportResult r;
    r.ok = true;
    r.content = std::move(text);
    return r;
  }

  static TransportResult failure(TransportErrorKind kind, std::string message,
                                 int status = 0) {
    TransportResult r;
    r.error_kind = kind;
    r.error = std::move(message);
    r.http_status = status;
    return r;
  }
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult send(const ChatRequest& request) = 0;
};

class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TreatmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- Treatment response parsing ---------------------------------------------

struct WarningResult {
  // Full warning statement; for a not-toxic verdict this retains the
  // model's "None. <reasoning>" statement verbatim.
  std::string warning_text;
  bool not_toxic = false;
};

struct RewriteResult {
  std::string rewritten_text;
  std::vector<std::string> edits;
  bool not_toxic = false;
};

using WarningParseResult = std::variant<WarningResult, ParseFailure>;
using RewriteParseResult = std::variant<RewriteResult, ParseFailure>;

namespace detail {

struct LabeledBlock {
  std::string label;  // lowercased, whitespace-collapsed
  std::size_t header_begin = 0;
  std::size_t content_begin = 0;
  std::size_t content_end = 0;
};

// Finds every `## <label> ##[:]` header in the response; each block's
// content runs to the next header. Labels must fit on one line.
inline std::vector<LabeledBlock> scan_labeled_blocks(std::string_view text) {
  std::vector<LabeledBlock> blocks;
  std::size_t pos = 0;
  while (pos + 1 < text.size()) {
    const std::size_t open = text.find("##", pos);
    if (open == std::string_view::npos) break;
    const std::size_t label_begin = open + 2;
    const std::size_t close = text.find("##", label_begin);
    if (close == std::string_view::npos) break;
    const std::string_view raw_label = text.substr(label_begin, close - label_begin);
    if (raw_label.size() > 120 ||
        raw_label.find('\n') != std::string_view::npos ||
        trim(raw_label).empty()) {
      pos = open + 2;
      continue;
    }
    std::size_t content = close + 2;
    while (content < text.size() && (text[content] == ' ' || text[content] == '\t'))
      ++content;
    if (content < text.size() && text[content] == ':') ++content;
    if (content < text.size() && text[content] == ' ') ++content;
    LabeledBlock block;
    block.label = collapse_whitespace(lower_ascii(trim(raw_label)));
    block.header_begin = open;
    block.content_begin = content;
    block.content_end = text.size();
    if (!blocks.empty()) blocks.back().content_end = open;
    blocks.push_back(block);
    pos = content;
  }
  return blocks;
}

inline const LabeledBlock* find_block(const std::vector<LabeledBlock>& blocks,
                                      std::string_view label) {
  for (const LabeledBlock& b : blocks)
    if (b.label == label) return &b;
  return nullptr;
}

inline bool is_bullet_line(std::string_view line, std::size_t* prefix_len) {
  if (line.empty()) return false;
  if (line[0] == '-' || line[0] == '*') {
    *prefix_len = 1;
    return true;
  }
  constexpr std::string_view kDot = "\xE2\x80\xA2";  // U+2022
  if (line.substr(0, kDot.size()) == kDot) {
    *prefix_len = kDot.size();
    return true;
  }
  std::size_t i = 0;
  while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
    *prefix_len = i + 1;
    return true;
  }
  return false;
}

// Bulleted lines start new entries; indented continuations join the
// previous entry; pure prose with no bullets at all becomes one entry.
inline std::vector<std::string> parse_edit_list(std::string_view span) {
  std::vector<std::string> edits;
  std::vector<std::string> prose;
  std::size_t start = 0;
  while (start <= span.size()) {
    const std::size_t eol = std::min(span.find('\n', start), span.size());
    const std::string_view line = trim(span.substr(start, eol - start));
    start = eol + 1;
    if (line.empty()) continue;
    std::size_t prefix = 0;
    if (is_bullet_line(line, &prefix)) {
      edits.emplace_back(trim(line.substr(prefix)));
    } else if (!edits.empty()) {
      edits.back() += " ";
      edits.back() += std::string(line);
    } else {
      prose.emplace_back(line);
    }
  }
  if (edits.empty() && !prose.empty()) {
    std::string joined;
    for (const std::string& p : prose) {
      if (!joined.empty()) joined += " ";
      joined += p;
    }
    edits.push_back(std::move(joined));
  }
  return edits;
}

inline bool starts_with_none(std::string_view content) {
  const std::string head = lower_ascii(trim(content).substr(0, 5));
  return head == "none." || head == "none";
}

}  // namespace detail

inline WarningParseResult parse_warning_response(std::string_view response) {
  const auto blocks = detail::scan_labeled_blocks(response);
  const auto* block = detail::find_block(blocks, "content warning");
  if (!block)
    return ParseFailure{ParseFailureKind::kMalformedBlock,
                        "missing '## CONTENT WARNING ##' header", std::nullopt};
  WarningResult result;
  result.warning_text =
      std::string(trim(response.substr(block->content_begin,
                                       block->content_end - block->content_begin)));
  if (result.warning_text.empty())
    return ParseFailure{ParseFailureKind::kMalformedBlock, "empty content warning",
                        block->content_begin};
  result.not_toxic = detail::starts_with_none(result.warning_text);
  return result;
}

// `original_text` is needed to recognize the not-toxic verdict (the model
// returns the text unchanged) and to reject inconsistent responses that
// change the text while claiming no edits.
inline RewriteParseResult parse_rewrite_response(std::string_view response,
                                                 std::string_view original_text) {
  const auto blocks = detail::scan_labeled_blocks(response);
  const auto* annotation = detail::find_block(blocks, "annotation");
  if (!annotation)
    return ParseFailure{ParseFailureKind::kMalformedBlock,
                        "missing '## ANNOTATION ##' header", std::nullopt};
  RewriteResult result;
  result.rewritten_text = std::string(
      trim(response.substr(annotation->content_begin,
                           annotation->content_end - annotation->content_begin)));
  if (result.rewritten_text.empty())
    return ParseFailure{ParseFailureKind::kMalformedBlock, "empty annotation",
                        annotation->content_begin};
  result.not_toxic = result.rewritten_text == trim(original_text);

  const auto* edits = detail::find_block(blocks, "edits made");
  if (edits) {
    result.edits = detail::parse_edit_list(response.substr(
        edits->content_begin, edits->content_end - edits->content_begin));
  } else if (!result.not_toxic) {
    return ParseFailure{ParseFailureKind::kMalformedBlock,
                        "missing '## EDITS MADE ##' header", std::nullopt};
  }
  if (!result.not_toxic && result.edits.empty())
    return ParseFailure{ParseFailureKind::kMalformedBlock,
                        "text was changed but no edits were listed", std::nullopt};
  return result;
}

// --- Scripted mock transport --------------------------------------------------
//
// Deterministic stand-in for a chat-completion endpoint. The prompt kind is
// recognized from the system text; the response is a pure function of the
// user text, driven by embedded markers:
//   tox_<dim>_<d>       score digit d for a wire dimension (racial, gender,
//                       religious, ability, origin, violence); max wins
//   refuse_me           always refuse to annotate
//   refuse_once         refuse on the first attempt only
//   malform_me          reply with a non-integer score
//   malform_once        malformed on the first attempt only
//   flaky_once          one retryable transport error, then normal service
//   fail_transport      every attempt fails with a retryable error
//   inconsistent_rewrite changed rewrite text with an empty edits list
//   verdict_benign      treatment prompts answer "not toxic"
// The *_once markers are the only stateful behavior.
class ScriptedMockTransport : public Transport {
 public:
  struct Options {
    bool fail_auth = false;
    int latency_ms = 0;
  };

  ScriptedMockTransport() = default;
  explicit ScriptedMockTransport(Options options) : options_(options) {}

  TransportResult send(const ChatRequest& request) override {
    const int now_in_flight = ++in_flight_;
    int seen = max_in_flight_seen_.load();
    while (now_in_flight > seen &&
           !max_in_flight_seen_.compare_exchange_weak(seen, now_in_flight)) {
    }
    struct Guard {
      std::atomic<int>& counter;
      ~Guard() { --counter; }
    } guard{in_flight_};

    if (options_.latency_ms > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(options_.latency_ms));
    ++calls_;

    if (options_.fail_auth)
      return TransportResult::failure(TransportErrorKind::kAuth,
                                      "scripted auth rejection", 401);

    const std::string user = lower_ascii(request.user);
    if (user.find("fail_transport") != std::string::npos)
      return TransportResult::failure(TransportErrorKind::kRetryable,
                                      "scripted transport failure", 503);
    if (user.find("flaky_once") != std::string::npos && first_attempt(request.user))
      return TransportResult::failure(TransportErrorKind::kRetryable,
                                      "scripted transient failure", 503);

    switch (classify(request.system)) {
      case TemplateKind::kAnnotation: return annotation_response(request.user, user);
      case TemplateKind::kContentWarning: return warning_response(request.user, user);
      case TemplateKind::kRewrite: return rewrite_response(request.user, user);
    }
    return TransportResult::failure(TransportErrorKind::kFatal,
                                    "scripted transport: unrecognized prompt");
  }

  int max_in_flight_observed() const { return max_in_flight_seen_.load(); }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  static TemplateKind classify(std::string_view system) {
    if (system.find("Always respond in this format exactly") != std::string_view::npos)
      return TemplateKind::kAnnotation;
    if (system.find("## CONTENT WARNING ##") != std::string_view::npos)
      return TemplateKind::kContentWarning;
    return TemplateKind::kRewrite;
  }

  // True exactly once per distinct user text.
  bool first_attempt(std::string_view user) {
    const std::uint64_t key = fnv1a64(user);
    std::lock_guard lock(mutex_);
    return seen_texts_.insert(key).second;
  }

  static std::array<int, kNumWireDimensions> scores_from_markers(
      const std::string& lowered_user) {
    static constexpr std::array<std::string_view, kNumWireDimensions> kMarkers = {
        "tox_racial_",  "tox_gender_", "tox_religious_",
        "tox_ability_", "tox_origin_", "tox_violence_",
    };
    std::array<int, kNumWireDimensions> scores{};
    for (std::size_t d = 0; d < kNumWireDimensions; ++d) {
      std::size_t pos = 0;
      while ((pos = lowered_user.find(kMarkers[d], pos)) != std::string::npos) {
        pos += kMarkers[d].size();
        if (pos < lowered_user.size() && lowered_user[pos] >= '0' &&
            lowered_user[pos] <= '3')
          scores[d] = std::max(scores[d], lowered_user[pos] - '0');
      }
    }
    return scores;
  }

  TransportResult annotation_response(const std::string& user,
                                      const std::string& lowered_user) {
    if (lowered_user.find("refuse_me") != std::string::npos ||
        (lowered_user.find("refuse_once") != std::string::npos && first_attempt(user)))
      return TransportResult::success("I can't assist with that request.");
    if (lowered_user.find("malform_me") != std::string::npos ||
        (lowered_user.find("malform_once") != std::string::npos && first_attempt(user)))
      return TransportResult::success(
          "## Racial Discrimination Score ## : unsure\n\n"
          "## Racial Discrimination Reasoning ## : Scripted malformed response.\n");

    const auto scores = scores_from_markers(lowered_user);
    std::string out;
    for (std::size_t d = 0; d < kNumWireDimensions; ++d) {
      const std::string header(kWireDimensionHeaders[d]);
      out += "## " + header + " Score ## : " + std::to_string(scores[d]) + "\n\n";
      out += "## " + header + " Reasoning ## : ";
      if (scores[d] > 0)
        out += "Scripted reasoning: marker-driven score " + std::to_string(scores[d]) +
               " for " + header + ".";
      else
        out += "Scripted reasoning: no " + header + " content found.";
      out += "\n\n";
    }
    return TransportResult::success(std::move(out));
  }

  TransportResult warning_response(const std::string& user,
                                   const std::string& lowered_user) const {
    (void)user;
    if (lowered_user.find("verdict_benign") != std::string::npos)
      return TransportResult::success(
          "## CONTENT WARNING ##: None. The text does not appear to contain any "
          "discriminatory, violent, or otherwise problematic content.");
    return TransportResult::success(
        "## CONTENT WARNING ##: This text contains potentially sensitive material "
        "(scripted digest " + to_hex(fnv1a64(lowered_user)).substr(0, 8) +
        "); reader discretion is advised.");
  }

  TransportResult rewrite_response(const std::string& user,
                                   const std::string& lowered_user) const {
    if (lowered_user.find("inconsistent_rewrite") != std::string::npos)
      return TransportResult::success("## ANNOTATION ##: " + user +
                                      " (entirely rewritten)\n## EDITS MADE ##:\n");
    if (lowered_user.find("verdict_benign") != std::string::npos)
      return TransportResult::success(
          "## ANNOTATION ##: " + user +
          "\n## EDITS MADE ##: The text does not appear to contain toxic material, "
          "so it is returned unchanged.");

    // Soften every tox_<dim>_<d> marker and report one edit per dimension.
    std::string rewritten = user;
    std::array<bool, kNumWireDimensions> touched{};
    static constexpr std::array<std::string_view, kNumWireDimensions> kMarkers = {
        "tox_racial_",  "tox_gender_", "tox_religious_",
        "tox_ability_", "tox_origin_", "tox_violence_",
    };
    for (std::size_t d = 0; d < kNumWireDimensions; ++d) {
      std::size_t pos = 0;
      while ((pos = rewritten.find(kMarkers[d], pos)) != std::string::npos) {
        std::size_t len = kMarkers[d].size();
        if (pos + len < rewritten.size() && rewritten[pos + len] >= '0' &&
            rewritten[pos + len] <= '9')
          ++len;
        rewritten.replace(pos, len, "[restated]");
        touched[d] = true;
        pos += 10;
      }
    }
    bool any = false;
    std::string edits;
    for (std::size_t d = 0; d < kNumWireDimensions; ++d) {
      if (!touched[d]) continue;
      any = true;
      edits += "- Softened " + std::string(kWireDimensionHeaders[d]) +
               " phrasing (scripted).\n";
    }
    if (!any)
      return TransportResult::success(
          "## ANNOTATION ##: " + user +
          "\n## EDITS MADE ##: No toxic material found; text returned unchanged.");
    return TransportResult::success("## ANNOTATION ##: " + rewritten +
                                    "\n## EDITS MADE ##:\n" + edits);
  }

  Options options_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_seen_{0};
  std::atomic<std::uint64_t> calls_{0};
  std::mutex mutex_;
  std::set<std::uint64_t> seen_texts_;
};

// --- Batch annotation ---------------------------------------------------------

struct AnnotateItem {
  std::string id;
  std::string text;
  std::string language;  // empty falls back to EndpointConfig.language
};

struct TransportFailure {
  std::string message;
  int http_status = 0;
};

using AnnotateResult = std::variant<RawAnnotation, ParseFailure, TransportFailure>;

struct AnnotationOutcome {
  std::string id;
  AnnotateResult result;
  int attempts = 1;
  std::string template_version;
  std::string language;
};

struct RunManifest {
  std::uint64_t requested = 0;
  std::uint64_t succeeded = 0;
  std::uint64_t refusals = 0;
  std::uint64_t malformed_blocks = 0;
  std::uint64_t missing_dimensions = 0;
  std::uint64_t out_of_range_scores = 0;
  std::uint64_t transport_failures = 0;
  // Extra attempts beyond the first, summed over all records.
  std::uint64_t retries = 0;
  std::uint64_t language_fallbacks = 0;
  std::vector<std::string> template_versions;

  std::uint64_t failed() const { return requested - succeeded; }

  double failure_rate() const {
    return requested == 0
               ? 0.0
               : static_cast<double>(failed()) / static_cast<double>(requested);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["requested"] = requested;
    j["succeeded"] = succeeded;
    j["refusals"] = refusals;
    j["malformed_blocks"] = malformed_blocks;
    j["missing_dimensions"] = missing_dimensions;
    j["out_of_range_scores"] = out_of_range_scores;
    j["transport_failures"] = transport_failures;
    j["retries"] = retries;
    j["language_fallbacks"] = language_fallbacks;
    j["template_versions"] = template_versions;
    return j;
  }
};

namespace detail {

inline void backoff_sleep(const EndpointConfig& endpoint, int attempt, Rng& jitter) {
  if (endpoint.backoff_base_ms == 0) return;
  const std::uint64_t base = static_cast<std::uint64_t>(endpoint.backoff_base_ms);
  std::uint64_t ms = base << std::min(attempt - 1, 10);
  ms = std::min<std::uint64_t>(ms, 10000) + jitter.next_below(base + 1);
  std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

inline AnnotationOutcome annotate_one(const AnnotateItem& item,
                                      const EndpointConfig& endpoint,
                                      const TemplateRegistry& templates,
                                      Transport& transport, bool* fell_back) {
  const std::string language = item.language.empty() ? endpoint.language : item.language;
  const RenderedPrompt prompt =
      render_annotation_prompt(templates, item.text, language, fell_back);
  const ChatRequest request{prompt.system, prompt.user, endpoint.model,
                            endpoint.temperature};
  Rng jitter(fnv1a64(item.id));
  AnnotationOutcome outcome;
  outcome.id = item.id;
  outcome.template_version = prompt.template_version;
  outcome.language = prompt.language;

  int attempt = 0;
  while (true) {
    ++attempt;
    outcome.attempts = attempt;
    const TransportResult sent = transport.send(request);
    if (!sent.ok) {
      if (sent.error_kind == TransportErrorKind::kAuth)
        throw AuthError("authentication rejected: " + sent.error);
      if (sent.error_kind == TransportErrorKind::kRetryable &&
          attempt <= endpoint.retry_budget) {
        backoff_sleep(endpoint, attempt, jitter);
        continue;
      }
      outcome.result = TransportFailure{sent.error, sent.http_status};
      return outcome;
    }
    ParseResult parsed = parse_annotation(sent.content);
    if (std::holds_alternative<RawAnnotation>(parsed)) {
      outcome.result = std::get<RawAnnotation>(std::move(parsed));
      return outcome;
    }
    ParseFailure failure = std::get<ParseFailure>(std::move(parsed));
    if (retryable(failure.kind) && attempt <= endpoint.retry_budget) {
      backoff_sleep(endpoint, attempt, jitter);
      continue;
    }
    outcome.result = std::move(failure);
    return outcome;
  }
}

}  // namespace detail

// Annotates every item through the transport with at most max_in_flight
// requests live at once. Refusals, malformed blocks, and retryable
// transport errors are retried up to the budget; outcomes stream to the
// sink in completion order. Every input id is emitted exactly once. An
// auth rejection aborts the whole run.
inline RunManifest annotate_batch(
    std::span<const AnnotateItem> items, const EndpointConfig& endpoint,
    const TemplateRegistry& templates, Transport& transport,
    const std::function<void(const AnnotationOutcome&)>& sink) {
  endpoint.check_valid();
  RunManifest manifest;
  manifest.requested = items.size();
  if (items.empty()) return manifest;

  std::mutex emit_mutex;
  std::set<std::string> versions;
  std::atomic<std::size_t> next_index{0};
  std::atomic<bool> abort{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto record_outcome = [&](const AnnotationOutcome& outcome, bool fell_back) {
    std::lock_guard<std::mutex> lock(emit_mutex);
    manifest.retries += static_cast<std::uint64_t>(outcome.attempts - 1);
    if (fell_back) ++manifest.language_fallbacks;
    versions.insert(outcome.template_version);
    if (std::holds_alternative<RawAnnotation>(outcome.result)) {
      ++manifest.succeeded;
    } else if (std::holds_alternative<TransportFailure>(outcome.result)) {
      ++manifest.transport_failures;
    } else {
      switch (std::get<ParseFailure>(outcome.result).kind) {
        case ParseFailureKind::kRefusal: ++manifest.refusals; break;
        case ParseFailureKind::kMalformedBlock: ++manifest.malformed_blocks; break;
        case ParseFailureKind::kMissingDimension: ++manifest.missing_dimensions; break;
        case ParseFailureKind::kOutOfRangeScore: ++manifest.out_of_range_scores; break;
      }
    }
    if (sink) sink(outcome);
  };

  auto worker = [&] {
    while (!abort.load(std::memory_order_relaxed)) {
      const std::size_t i = next_index.fetch_add(1);
      if (i >= items.size()) break;
      try {
        bool fell_back = false;
        AnnotationOutcome outcome =
            detail::annotate_one(items[i], endpoint, templates, transport, &fell_back);
        record_outcome(outcome, fell_back);
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
        abort.store(true);
        break;
      }
    }
  };

  const std::size_t worker_count =
      std::min(static_cast<std::size_t>(endpoint.max_in_flight), items.size());
  std::vector<std::thread> pool;
  pool.reserve(worker_count);
  for (std::size_t i = 0; i < worker_count; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  manifest.template_versions.assign(versions.begin(), versions.end());
  return manifest;
}

// --- Single-record treatments --------------------------------------------------

struct WarningOutcome {
  WarningResult result;
  std::string template_version;
  std::string language;
  int attempts = 1;
};

struct RewriteOutcome {
  RewriteResult result;
  std::string template_version;
  std::string language;
  int attempts = 1;
};

namespace detail {

template <typename Parse>
auto treat_one(const AnnotateItem& item, const RenderedPrompt& prompt,
               const EndpointConfig& endpoint, Transport& transport, Parse parse) {
  const ChatRequest request{prompt.system, prompt.user, endpoint.model,
                            endpoint.temperature};
  Rng jitter(fnv1a64(item.id));
  int attempt = 0;
  std::string last_error;
  while (attempt <= endpoint.retry_budget) {
    ++attempt;
    const TransportResult sent = transport.send(request);
    if (!sent.ok) {
      if (sent.error_kind == TransportErrorKind::kAuth)
        throw AuthError("authentication rejected: " + sent.error);
      last_error = sent.error;
      if (sent.error_kind == TransportErrorKind::kRetryable &&
          attempt <= endpoint.retry_budget) {
        backoff_sleep(endpoint, attempt, jitter);
        continue;
      }
      break;
    }
    auto parsed = parse(sent.content);
    if (parsed.index() == 0) return std::make_pair(std::get<0>(std::move(parsed)), attempt);
    const ParseFailure& failure = std::get<ParseFailure>(parsed);
    last_error = failure.detail;
    if (attempt <= endpoint.retry_budget) {
      backoff_sleep(endpoint, attempt, jitter);
      continue;
    }
  }
  throw TreatmentError("record '" + item.id + "': response unusable after " +
                       std::to_string(attempt) + " attempt(s): " + last_error);
}

}  // namespace detail

// Asks the endpoint for a content warning (intended for MildToxicity
// records; the tier check belongs to the caller). A "None." verdict is
// returned as the not-toxic variant, warning text retained.
inline WarningOutcome content_warning(const AnnotateItem& item,
                                      const std::optional<ToxicityScores>& scores,
                                      const TemplateRegistry& templates,
                                      Transport& transport,
                                      const EndpointConfig& endpoint) {
  endpoint.check_valid();
  const std::string language = item.language.empty() ? endpoint.language : item.language;
  const RenderedPrompt prompt =
      render_content_warning_prompt(templates, item.text, scores, language);
  auto [result, attempts] = detail::treat_one(
      item, prompt, endpoint, transport,
      [](std::string_view response) { return parse_warning_response(response); });
  return {std::move(result), prompt.template_version, prompt.language, attempts};
}

// Asks the endpoint to rewrite a ToxicContent record. A not-toxic verdict
// returns the original text, with the model's rationale as the sole edits
// entry when no list was given.
inline RewriteOutcome rewrite(const AnnotateItem& item,
                              const TemplateRegistry& templates, Transport& transport,
                              const EndpointConfig& endpoint) {
  endpoint.check_valid();
  const std::string language = item.language.empty() ? endpoint.language : item.language;
  const RenderedPrompt prompt = render_rewrite_prompt(templates, item.text, language);
  auto [result, attempts] = detail::treat_one(
      item, prompt, endpoint, transport, [&](std::string_view response) {
        return parse_rewrite_response(response, item.text);
      });
  return {std::move(result), prompt.template_version, prompt.language, attempts};
}

}  // namespace toxpipe
