#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "toxpipe/scores.hpp"

namespace toxpipe {

enum class TriageTier : int {
  kNoToxicity = 0,
  kMildToxicity = 1,
  kToxicContent = 2,
};

enum class Treatment : int {
  kPassThrough = 0,
  kContentWarning = 1,
  kRewrite = 2,
};

inline std::string_view to_string(TriageTier t) {
  switch (t) {
    case TriageTier::kNoToxicity: return "no_toxicity";
    case TriageTier::kMildToxicity: return "mild_toxicity";
    case TriageTier::kToxicContent: return "toxic_content";
  }
  return "unknown";
}

inline std::optional<TriageTier> tier_from_string(std::string_view s) {
  if (s == "no_toxicity") return TriageTier::kNoToxicity;
  if (s == "mild_toxicity") return TriageTier::kMildToxicity;
  if (s == "toxic_content") return TriageTier::kToxicContent;
  return std::nullopt;
}

inline std::string_view to_string(Treatment t) {
  switch (t) {
    case Treatment::kPassThrough: return "pass_through";
    case Treatment::kContentWarning: return "content_warning";
    case Treatment::kRewrite: return "rewrite";
  }
  return "unknown";
}

inline std::optional<Treatment> treatment_from_string(std::string_view s) {
  if (s == "pass_through") return Treatment::kPassThrough;
  if (s == "content_warning") return Treatment::kContentWarning;
  if (s == "rewrite") return Treatment::kRewrite;
  return std::nullopt;
}

// Triage thresholds. Defaults implement the published policy: totals 0..3
// with no single score above 2 pass, totals 4..6 (or a lone 3) get a
// warning, totals 7+ are rewritten. Deployments may tighten or loosen.
struct TriagePolicy {
  int no_tox_max_total = 3;
  int no_tox_max_single = 2;
  int mild_min_total = 4;
  int mild_max_total = 6;
  int toxic_min_total = 7;

  void check_valid() const {
    if (!(no_tox_max_total < mild_min_total && mild_min_total <= mild_max_total &&
          mild_max_total < toxic_min_total))
      throw std::invalid_argument(
          "TriagePolicy: thresholds must satisfy no_tox_max_total < "
          "mild_min_total <= mild_max_total < toxic_min_total");
    if (toxic_min_total != mild_max_total + 1)
      throw std::invalid_argument(
          "TriagePolicy: toxic_min_total must be mild_max_total + 1");
  }

  friend bool operator==(const TriagePolicy&, const TriagePolicy&) = default;
};

// Total function from score vectors to tiers. A single score above
// no_tox_max_single escalates an otherwise-low total to mild (with the
// default 0..3 scale and no_tox_max_total 3, that is exactly the lone-3
// case).
inline TriageTier triage(const ToxicityScores& scores,
                         const TriagePolicy& policy = {}) {
  scores.check_valid();
  policy.check_valid();
  int total = scores.total();
  if (total >= policy.toxic_min_total) return TriageTier::kToxicContent;
  if (total >= policy.mild_min_total) return TriageTier::kMildToxicity;
  if (total > policy.no_tox_max_total) return TriageTier::kMildToxicity;
  if (scores.max_single() > policy.no_tox_max_single)
    return TriageTier::kMildToxicity;
  return TriageTier::kNoToxicity;
}

inline Treatment treatment_for(TriageTier tier) {
  switch (tier) {
    case TriageTier::kNoToxicity: return Treatment::kPassThrough;
    case TriageTier::kMildToxicity: return Treatment::kContentWarning;
    case TriageTier::kToxicContent: return Treatment::kRewrite;
  }
  throw std::invalid_argument("treatment_for: unknown tier");
}

}  // namespace toxpipe
