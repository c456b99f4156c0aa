#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "toxpipe/common.hpp"
#include "toxpipe/scores.hpp"

namespace toxpipe {

enum class TemplateKind { kAnnotation, kContentWarning, kRewrite };

inline std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kAnnotation: return "annotation";
    case TemplateKind::kContentWarning: return "content_warning";
    case TemplateKind::kRewrite: return "rewrite";
  }
  throw std::invalid_argument("to_string: bad TemplateKind");
}

// Human-readable names of the five canonical dimensions, as used when
// telling the treatment model which vectors a text was flagged for.
inline constexpr std::array<std::string_view, kNumDimensions> kDimensionLabels = {
    "Racial/Origin-Based Discrimination",
    "Gender/Sex-based Discrimination",
    "Religious Discrimination",
    "Ability-based Discrimination",
    "Aggressive or Violent",
};

namespace builtin {

inline constexpr std::string_view kAnnotationSystemEn =
    R"PROMPT(You are an expert artificial intelligence annotator for toxicity and harmfulness. You are provided the following categories of toxicity:

Racial Discrimination: promotes or suggests racial superiority/inferiority; perpetuates harmful racial stereotypes; or promotes racially motivated insults, attacks, or crimes. Racial discrimination is distinct from discrimination based on someone’s country of origin, religion, or language.

Gender/Sex-based Discrimination: implies one sex or gender is inferior to another; incites or encourages abuse or violence against someone because of their sex, gender, or sexual orientation; is demeaning, objectifying, or threatening based on gender or sex (especially women); suggests being gay or queer is wrong or inferior.

Religious Discrimination: promotes beliefs of religious superiority or inferiority; upholds stereotypes or biases about specific religions; incites or encourages abuse or violence against followers of a religion.

Ability-based Discrimination: disparages someone’s abilities or disabilities; attributes abilities or disabilities with intent to insult; upholds stereotypes and biases related to abilities or disabilities; incites or encourages abuse or violence motivated by someone’s abilities.

Origin-based Discrimination: upholds or promotes stereotypes related to nationality, place of origin, or immigration status (especially immigrant or refugee status); incites or encourages abuse or violence motivated by someone’s origin.

Aggressive or Violent: uncritically describes or promotes abusive, aggressive, or violent behavior, particularly against marginalized groups.

Annotation problem: Given a piece of text, provide a score between 0 and 3 for each of the proposed categories based on the severity of each. The text should be labeled based on implicit biases potentially present within it, and not based on the amount of vulgar language used.

Rate each text with a score from 0-3, using this scale exactly:

0 - text mentions stereotypes about a particular group of people or acts of violence, but does so in an objective way; text does not promote biases against any group or acts of violence.

1 - text implies biased beliefs against a group of people or implicitly makes suggestions of violent acts, but does not do so explicitly.

2 - text clearly expresses biased beliefs against a group of people, but does not do so in an overly aggressive manner, nor does it actively promote the spread of such beliefs.

3 -  text overtly promotes hatred towards or disenfranchisement of a group of people or promotes the superiority of one group of people over another; text calls for violence against an individual or group of people; text persuasively describes stereotypes or biases against a group of people or characteristics associated with a particular group (especially groups according to race, sex, gender, origin, ability, or religion).

Always respond in this format exactly:

## Racial Discrimination Score ## :  A score from 0 to 3

## Racial Discrimination Reasoning ## : What does this text contain that makes it racially discriminatory? Provide specific examples and detailed reasoning.

## Gender/Sex-Based Discrimination Score ## :  A score from 0 to 3

## Gender/Sex-Based Discrimination Reasoning ## : What does this text contain that makes it discriminatory based on gender or sex? Provide specific examples and detailed reasoning

## Religious Discrimination Score ## :  A score from 0 to 3

## Religious Discrimination Reasoning ## : What does this text contain that makes it religiously discriminatory? Provide specific examples and detailed reasoning.

## Ability-Based Discrimination Score ##:  A score from 0 to 3

## Ability-Based Discrimination Reasoning ##: What does this text contain that makes it discriminatory based on ability? Provide specific examples and detailed reasoning.

## Origin-Based Discrimination Score ##:  A score from 0 to 3

## Origin-Based Discrimination Reasoning ##: What does this text contain that makes it discriminatory based on origin? Provide specific examples and detailed reasoning.

## Aggressive or Violent Score ##:  A score from 0 to 3

## Aggressive or Violent Reasoning ##: What does this text contain that creates aggressive or violent themes? Provide specific examples and detailed reasoning.)PROMPT";

inline constexpr std::string_view kContentWarningSystemEn =
    R"PROMPT(You are an expert artificial intelligence annotator for toxicity and harmfulness. You are provided the following categories of toxicity:

Racial/Origin-Based Discrimination: promotes or suggests racial superiority/inferiority; perpetuates harmful racial stereotypes; or promotes racially motivated insults, attacks, or crimes; upholds or promotes stereotypes related to nationality, place of origin, or immigration status (especially immigrant or refugee status); incites or encourages abuse or violence motivated by someone’s origin.

Gender/Sex-based Discrimination: implies one sex or gender is inferior to another; incites or encourages abuse or violence against someone because of their sex, gender, or sexual orientation; is demeaning, objectifying, or threatening based on gender or sex (especially women); suggests being gay or queer is wrong or inferior.

Religious Discrimination: promotes beliefs of religious superiority or inferiority; upholds stereotypes or biases about specific religions; incites or encourages abuse or violence against followers of a religion.

Ability-based Discrimination: disparages someone’s abilities or disabilities; attributes abilities or disabilities with intent to insult; upholds stereotypes and biases related to abilities or disabilities; incites or encourages abuse or violence motivated by someone’s abilities.

Aggressive or Violent: uncritically describes or promotes abusive, aggressive, or violent behavior, particularly against marginalized groups.

You will be provided with a potentially problematic piece of text, as well as the vector(s) for which it is problematic. Please provide, in the following format, a content warning about the text, ensuring to justify (using legal, ethical, philosophical, or cultural arguments) for why this content could be triggering. Or, alternatively, if it is not triggering, state the reasoning as to why:

## CONTENT WARNING ##:)PROMPT";

inline constexpr std::string_view kRewriteSystemEn =
    R"PROMPT(You are an expert artificial intelligence annotator for toxicity and harmfulness. You are provided the following categories of toxicity:

Racial/Origin-Based Discrimination: promotes or suggests racial superiority/inferiority; perpetuates harmful racial stereotypes; or promotes racially motivated insults, attacks, or crimes; upholds or promotes stereotypes related to nationality, place of origin, or immigration status (especially immigrant or refugee status); incites or encourages abuse or violence motivated by someone’s origin.

Gender/Sex-based Discrimination: implies one sex or gender is inferior to another; incites or encourages abuse or violence against someone because of their sex, gender, or sexual orientation; is demeaning, objectifying, or threatening based on gender or sex (especially women); suggests being gay or queer is wrong or inferior.

Religious Discrimination: promotes beliefs of religious superiority or inferiority; upholds stereotypes or biases about specific religions; incites or encourages abuse or violence against followers of a religion.

Ability-based Discrimination: disparages someone’s abilities or disabilities; attributes abilities or disabilities with intent to insult; upholds stereotypes and biases related to abilities or disabilities; incites or encourages abuse or violence motivated by someone’s abilities.

Aggressive or Violent: uncritically describes or promotes abusive, aggressive, or violent behavior, particularly against marginalized groups.

You will be provided with a potentially problematic piece of text. Your goal will be to re-write the text to mask the problematic nature, while remaining as true to the original style, tone, content, and word choice as possible. Do not make any changes to the tone, structure, style, or content that is not directly related to the re-writing of toxic material.

Format all outputs like this exactly:

## ANNOTATION ##: The annotated text.
## EDITS MADE ##: A bulleted list of edits made.)PROMPT";

}  // namespace builtin

struct PromptTemplate {
  std::string system;
  std::string version;
};

struct RenderedPrompt {
  std::string system;
  std::string user;
  std::string template_version;
  std::string language;
};

class UnknownLanguageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Holds the built-in English templates plus any per-language overrides
// loaded from a directory of `<kind>.<language>.txt` files. A file whose
// first line is `#version: <tag>` carries that tag; otherwise the filename
// is the version. A missing language falls back to English and reports the
// fallback so the caller can warn.
class TemplateRegistry {
 public:
  TemplateRegistry() {
    set(TemplateKind::kAnnotation, "en",
        {std::string(builtin::kAnnotationSystemEn), "annotation.en@builtin-v1"});
    set(TemplateKind::kContentWarning, "en",
        {std::string(builtin::kContentWarningSystemEn), "content_warning.en@builtin-v1"});
    set(TemplateKind::kRewrite, "en",
        {std::string(builtin::kRewriteSystemEn), "rewrite.en@builtin-v1"});
  }

  explicit TemplateRegistry(const std::string& directory) : TemplateRegistry() {
    load_directory(directory);
  }

  void set(TemplateKind kind, const std::string& language, PromptTemplate t) {
    templates_[key(kind, language)] = std::move(t);
  }

  void load_directory(const std::string& directory) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory))
      throw std::runtime_error("template directory not found: " + directory);
    for (const fs::directory_entry& entry : fs::directory_iterator(directory)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      auto parsed = parse_template_filename(name);
      if (!parsed) continue;
      std::ifstream in(entry.path());
      if (!in) throw std::runtime_error("cannot read template file: " + name);
      std::stringstream buffer;
      buffer << in.rdbuf();
      std::string body = buffer.str();
      std::string version = name;
      constexpr std::string_view kVersionPrefix = "#version:";
      if (body.rfind(kVersionPrefix, 0) == 0) {
        const std::size_t eol = body.find('\n');
        version = std::string(
            trim(std::string_view(body).substr(kVersionPrefix.size(),
                                               eol - kVersionPrefix.size())));
        body = eol == std::string::npos ? std::string() : body.substr(eol + 1);
      }
      while (!body.empty() && (body.back() == '\n' || body.back() == '\r'))
        body.pop_back();
      set(parsed->first, parsed->second, {std::move(body), std::move(version)});
    }
  }

  // `fell_back` (optional) reports whether the English template was
  // substituted for a missing language.
  const PromptTemplate& get(TemplateKind kind, const std::string& language,
                            bool* fell_back = nullptr) const {
    const std::string lang = language.empty() ? "en" : lower_ascii(language);
    if (auto it = templates_.find(key(kind, lang)); it != templates_.end()) {
      if (fell_back) *fell_back = false;
      return it->second;
    }
    if (auto it = templates_.find(key(kind, "en")); it != templates_.end()) {
      if (fell_back) *fell_back = true;
      return it->second;
    }
    throw UnknownLanguageError("no template for kind '" +
                               std::string(to_string(kind)) + "', language '" +
                               lang + "'");
  }

 private:
  static std::string key(TemplateKind kind, const std::string& language) {
    return std::string(to_string(kind)) + "." + language;
  }

  static std::optional<std::pair<TemplateKind, std::string>> parse_template_filename(
      const std::string& name) {
    constexpr std::string_view kSuffix = ".txt";
    if (name.size() <= kSuffix.size() ||
        name.substr(name.size() - kSuffix.size()) != kSuffix)
      return std::nullopt;
    const std::string stem = name.substr(0, name.size() - kSuffix.size());
    const std::size_t dot = stem.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= stem.size())
      return std::nullopt;
    const std::string kind_str = stem.substr(0, dot);
    const std::string lang = lower_ascii(stem.substr(dot + 1));
    for (TemplateKind kind : {TemplateKind::kAnnotation, TemplateKind::kContentWarning,
                              TemplateKind::kRewrite}) {
      if (kind_str == to_string(kind)) return std::make_pair(kind, lang);
    }
    return std::nullopt;
  }

  std::map<std::string, PromptTemplate> templates_;
};

inline RenderedPrompt render_annotation_prompt(const TemplateRegistry& registry,
                                               std::string_view text,
                                               const std::string& language,
                                               bool* fell_back = nullptr) {
  if (trim(text).empty())
    throw std::invalid_argument("render_annotation_prompt: empty text");
  const PromptTemplate& t = registry.get(TemplateKind::kAnnotation, language, fell_back);
  return {t.system, std::string(text), t.version,
          language.empty() ? "en" : lower_ascii(language)};
}

// The content-warning prompt also names the vectors the text was flagged
// for; dimensions scored 0 are omitted, and without scores the text goes
// alone.
inline RenderedPrompt render_content_warning_prompt(
    const TemplateRegistry& registry, std::string_view text,
    const std::optional<ToxicityScores>& scores, const std::string& language,
    bool* fell_back = nullptr) {
  if (trim(text).empty())
    throw std::invalid_argument("render_content_warning_prompt: empty text");
  const PromptTemplate& t =
      registry.get(TemplateKind::kContentWarning, language, fell_back);
  std::string user;
  if (scores) {
    scores->check_valid();
    std::string vectors;
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      if (scores->at(d) == 0) continue;
      if (!vectors.empty()) vectors += ", ";
      vectors += std::string(kDimensionLabels[d]) + " (score " +
                 std::to_string(scores->at(d)) + ")";
    }
    if (!vectors.empty()) {
      user = "Text: " + std::string(text) + "\n\nProblematic vector(s): " + vectors;
    }
  }
  if (user.empty()) user = std::string(text);
  return {t.system, std::move(user), t.version,
          language.empty() ? "en" : lower_ascii(language)};
}

inline RenderedPrompt render_rewrite_prompt(const TemplateRegistry& registry,
                                            std::string_view text,
                                            const std::string& language,
                                            bool* fell_back = nullptr) {
  if (trim(text).empty())
    throw std::invalid_argument("render_rewrite_prompt: empty text");
  const PromptTemplate& t = registry.get(TemplateKind::kRewrite, language, fell_back);
  return {t.system, std::string(text), t.version,
          language.empty() ? "en" : lower_ascii(language)};
}

}  // namespace toxpipe
