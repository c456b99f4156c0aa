#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "toxpipe/common.hpp"
#include "toxpipe/scores.hpp"

namespace toxpipe {

// The six dimensions of the annotation wire protocol, in prompt order.
// Racial and origin are merged into the canonical racial_origin dimension
// after parsing.
enum class WireDimension : int {
  kRacial = 0,
  kGenderSex = 1,
  kReligious = 2,
  kAbility = 3,
  kOrigin = 4,
  kViolence = 5,
};

inline constexpr std::size_t kNumWireDimensions = 6;

inline constexpr std::array<std::string_view, kNumWireDimensions>
    kWireDimensionHeaders = {
        "Racial Discrimination",
        "Gender/Sex-Based Discrimination",
        "Religious Discrimination",
        "Ability-Based Discrimination",
        "Origin-Based Discrimination",
        "Aggressive or Violent",
};

inline std::string_view wire_dimension_header(WireDimension d) {
  return kWireDimensionHeaders[static_cast<std::size_t>(d)];
}

// One parsed annotator response: six 0..3 scores plus the free-text
// reasoning per dimension (empty when the block was absent).
struct RawAnnotation {
  std::array<int, kNumWireDimensions> scores{0, 0, 0, 0, 0, 0};
  std::array<std::string, kNumWireDimensions> reasoning{};

  int score(WireDimension d) const {
    return scores[static_cast<std::size_t>(d)];
  }
  int& score(WireDimension d) { return scores[static_cast<std::size_t>(d)]; }
  const std::string& reason(WireDimension d) const {
    return reasoning[static_cast<std::size_t>(d)];
  }
  std::string& reason(WireDimension d) {
    return reasoning[static_cast<std::size_t>(d)];
  }

  bool valid() const {
    for (int s : scores)
      if (!valid_score(s)) return false;
    return true;
  }

  friend bool operator==(const RawAnnotation&, const RawAnnotation&) = default;
};

enum class ParseFailureKind {
  kRefusal,          // no score blocks at all (or an explicit refusal)
  kMalformedBlock,   // a score token is not an integer
  kMissingDimension, // fewer than six dimensions parsed
  kOutOfRangeScore,  // an integer score outside 0..3
};

inline std::string_view to_string(ParseFailureKind k) {
  switch (k) {
    case ParseFailureKind::kRefusal: return "refusal";
    case ParseFailureKind::kMalformedBlock: return "malformed_block";
    case ParseFailureKind::kMissingDimension: return "missing_dimension";
    case ParseFailureKind::kOutOfRangeScore: return "out_of_range_score";
  }
  return "unknown";
}

// Refusals and malformed blocks are annotator behavior and worth retrying;
// the other kinds indicate a broken fixture or a protocol drift.
inline bool retryable(ParseFailureKind k) {
  return k == ParseFailureKind::kRefusal ||
         k == ParseFailureKind::kMalformedBlock;
}

struct ParseFailure {
  ParseFailureKind kind;
  std::string detail;
  std::optional<std::size_t> offset;  // character index of the offending block
};

using ParseResult = std::variant<RawAnnotation, ParseFailure>;

// Refusal markers are consulted only when zero score blocks parse, so texts
// that merely quote these phrases are never misclassified as refusals.
struct ParserOptions {
  std::vector<std::string> refusal_markers = {"i can't", "i cannot"};
  bool na_line_is_refusal = true;  // a line that is exactly "N/A"
};

namespace detail {

// Normalizes a block label for lookup: ASCII lowercase, whitespace collapsed.
inline std::string normalize_label(std::string_view s) {
  return lower_ascii(collapse_whitespace(s));
}

enum class BlockKind { kScore, kReasoning };

struct Block {
  WireDimension dim;
  BlockKind kind;
  std::size_t header_start;  // offset of the leading "##"
  std::size_t value_start;   // offset just past the ":"
  std::size_t value_end;     // start of the next recognized header (or end)
};

// Scans for "## <label> ## :" headers and classifies each label against the
// six known dimensions. Unrecognized ## blocks are left as plain text so
// reasoning that quotes hash marks survives.
inline std::vector<Block> scan_blocks(std::string_view text) {
  struct LabelEntry {
    std::string label;
    WireDimension dim;
    BlockKind kind;
  };
  static const std::vector<LabelEntry> kLabels = [] {
    std::vector<LabelEntry> entries;
    for (std::size_t i = 0; i < kNumWireDimensions; ++i) {
      auto dim = static_cast<WireDimension>(i);
      std::string base = normalize_label(kWireDimensionHeaders[i]);
      entries.push_back({base + " score", dim, BlockKind::kScore});
      entries.push_back({base + " reasoning", dim, BlockKind::kReasoning});
    }
    return entries;
  }();

  std::vector<Block> blocks;
  std::size_t pos = 0;
  while (pos + 1 < text.size()) {
    std::size_t open = text.find("##", pos);
    if (open == std::string_view::npos || open + 2 >= text.size()) break;
    std::size_t label_start = open + 2;
    std::size_t close = text.find("##", label_start);
    if (close == std::string_view::npos) break;
    std::string_view label = text.substr(label_start, close - label_start);
    if (label.find('\n') != std::string_view::npos || label.size() > 120) {
      pos = open + 2;
      continue;
    }
    // Require the colon that introduces the value.
    std::size_t after = close + 2;
    while (after < text.size() && is_ascii_space(text[after])) ++after;
    if (after >= text.size() || text[after] != ':') {
      pos = open + 2;
      continue;
    }
    std::string normalized = normalize_label(label);
    const LabelEntry* match = nullptr;
    for (const auto& e : kLabels) {
      if (e.label == normalized) {
        match = &e;
        break;
      }
    }
    if (match == nullptr) {
      pos = open + 2;
      continue;
    }
    blocks.push_back(Block{match->dim, match->kind, open, after + 1, 0});
    pos = after + 1;
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].value_end =
        (i + 1 < blocks.size()) ? blocks[i + 1].header_start : text.size();
  }
  return blocks;
}

inline std::optional<long long> parse_int_strict(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool negative = false;
  if (s[0] == '+' || s[0] == '-') {
    negative = s[0] == '-';
    i = 1;
    if (i == s.size()) return std::nullopt;
  }
  long long value = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
    if (value < 1000000) value = value * 10 + (s[i] - '0');  // saturate
  }
  return negative ? -value : value;
}

inline std::optional<std::string> find_refusal_marker(
    std::string_view text, const ParserOptions& options) {
  std::string lowered = lower_ascii(text);
  for (const auto& marker : options.refusal_markers) {
    if (lowered.find(lower_ascii(marker)) != std::string::npos) return marker;
  }
  if (options.na_line_is_refusal) {
    std::size_t start = 0;
    while (start <= lowered.size()) {
      std::size_t end = lowered.find('\n', start);
      std::string_view line(lowered.data() + start,
                            (end == std::string::npos ? lowered.size() : end) -
                                start);
      if (trim(line) == "n/a") return "N/A";
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Parses one annotator response in the six-block wire format. Tolerant to
// whitespace drift around the ## markers and colons, to header casing, and
// to block reordering; intolerant to missing dimensions. When a dimension
// appears more than once, the first occurrence wins.
inline ParseResult parse_annotation(std::string_view response_text,
                                    const ParserOptions& options = {}) {
  auto blocks = detail::scan_blocks(response_text);

  bool any_score_block = false;
  for (const auto& b : blocks) {
    if (b.kind == detail::BlockKind::kScore) {
      any_score_block = true;
      break;
    }
  }
  if (!any_score_block) {
    auto marker = detail::find_refusal_marker(response_text, options);
    std::string detail = marker ? "refusal marker found: \"" + *marker + "\""
                                : "no score blocks found";
    return ParseFailure{ParseFailureKind::kRefusal, detail, std::nullopt};
  }

  RawAnnotation raw;
  std::array<bool, kNumWireDimensions> have_score{};
  std::array<bool, kNumWireDimensions> have_reasoning{};

  for (const auto& b : blocks) {
    std::string_view value(response_text.data() + b.value_start,
                           b.value_end - b.value_start);
    std::size_t idx = static_cast<std::size_t>(b.dim);
    if (b.kind == detail::BlockKind::kScore) {
      if (have_score[idx]) continue;
      // The score sits on the header line; trailing commentary is ignored.
      std::string_view first_line = value;
      if (auto nl = value.find('\n'); nl != std::string_view::npos)
        first_line = value.substr(0, nl);
      auto parsed = detail::parse_int_strict(first_line);
      if (!parsed) {
        return ParseFailure{
            ParseFailureKind::kMalformedBlock,
            "score for \"" +
                std::string(wire_dimension_header(b.dim)) +
                "\" is not an integer: \"" + std::string(trim(first_line)) +
                "\"",
            b.header_start};
      }
      if (*parsed < 0 || *parsed >= kNumClasses) {
        return ParseFailure{
            ParseFailureKind::kOutOfRangeScore,
            "score " + std::to_string(*parsed) + " for \"" +
                std::string(wire_dimension_header(b.dim)) +
                "\" is outside 0..3",
            b.header_start};
      }
      raw.scores[idx] = static_cast<int>(*parsed);
      have_score[idx] = true;
    } else {
      if (have_reasoning[idx]) continue;
      // Raw span, trimmed only of the surrounding block separators.
      raw.reasoning[idx] = std::string(trim(value));
      have_reasoning[idx] = true;
    }
  }

  std::string missing;
  for (std::size_t i = 0; i < kNumWireDimensions; ++i) {
    if (!have_score[i]) {
      if (!missing.empty()) missing += ", ";
      missing += kWireDimensionHeaders[i];
    }
  }
  if (!missing.empty()) {
    return ParseFailure{ParseFailureKind::kMissingDimension,
                        "missing score blocks: " + missing, std::nullopt};
  }
  return raw;
}

// Folds the six wire dimensions into the five canonical ones. Racial and
// origin merge by max so a 3 on either axis survives.
inline ToxicityScores merge_to_canonical(const RawAnnotation& raw) {
  ToxicityScores scores;
  scores[Dimension::kRacialOrigin] =
      std::max(raw.score(WireDimension::kRacial),
               raw.score(WireDimension::kOrigin));
  scores[Dimension::kGenderSex] = raw.score(WireDimension::kGenderSex);
  scores[Dimension::kReligion] = raw.score(WireDimension::kReligious);
  scores[Dimension::kAbility] = raw.score(WireDimension::kAbility);
  scores[Dimension::kViolence] = raw.score(WireDimension::kViolence);
  return scores;
}

// Renders an annotation back into the canonical wire format. parse_annotation
// of the result reproduces the input exactly (modulo surrounding whitespace
// of reasoning spans, which the parser trims).
inline std::string render_response(const RawAnnotation& raw) {
  std::string out;
  for (std::size_t i = 0; i < kNumWireDimensions; ++i) {
    std::string_view name = kWireDimensionHeaders[i];
    if (!out.empty()) out += "\n\n";
    out += "## ";
    out += name;
    out += " Score ## : ";
    out += std::to_string(raw.scores[i]);
    if (!raw.reasoning[i].empty()) {
      out += "\n\n## ";
      out += name;
      out += " Reasoning ## : ";
      out += raw.reasoning[i];
    }
  }
  out += "\n";
  return out;
}

}  // namespace toxpipe
