/* Copyright 2026 The slmmux Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slmmux/core.hpp"

namespace slmmux {

enum class ExtractionStrategy {
  kBareAnswer,      // the whole text is a single answer token
  kBoxed,           // last \boxed{...} / \fbox{...}
  kAnswerPhrase,    // "the answer is ...", "answer: ..."
  kHashMarker,      // GSM8K-style "#### 42"
  kTrailingNumber,  // last number anywhere in the text
  kChoiceLetter,    // "(C)", "option C", "answer: C"
};

struct ExtractionRule {
  TaskKind task_kind;
  std::vector<ExtractionStrategy> patterns;

  static const ExtractionRule& for_kind(TaskKind kind);
};

/// Canonical form of the last answer-bearing span found by the first
/// strategy (in rule order) that matches anything; nullopt when none does.
/// Total on arbitrary bytes.
std::optional<CanonicalAnswer> extract_final_answer(std::string_view raw_text,
                                                    TaskKind task_kind);
std::optional<CanonicalAnswer> extract_with(std::string_view raw_text,
                                            const ExtractionRule& rule);

bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b,
                   TaskKind task_kind);
/// An absent answer never equals anything, itself included.
bool answers_equal(const std::optional<CanonicalAnswer>& a,
                   const std::optional<CanonicalAnswer>& b, TaskKind task_kind);

/// Integers, a/b fractions, \frac{a}{b}, finite decimals and percentages.
/// Decimals with more than 12 significant digits stay decimal-kind.
/// Throws ParseError on anything else.
CanonicalAnswer normalize_numeric(std::string_view text);
std::optional<CanonicalAnswer> try_normalize_numeric(std::string_view text);

/// TeX/ASCII cleanup into the comparison form used for expressions:
/// spacing macros and whitespace dropped, braces to parentheses, explicit
/// multiplication removed, lowercased. No algebra: "x+1" != "1+x".
std::string normalize_expression(std::string_view text);

/// Numeric when the span parses as a number, otherwise an expression.
/// nullopt for spans that are empty after cleanup.
std::optional<CanonicalAnswer> canonicalize_span(std::string_view span);

/// Modal answer of a multiset, grouping by answers_equal. Frequency ties go
/// to the smallest rendering; a group is represented by its smallest
/// member rendering so the result never depends on input order.
struct ModalVote {
  std::optional<CanonicalAnswer> answer;
  int votes = 0;
};
ModalVote modal_vote(std::span<const std::optional<CanonicalAnswer>> answers,
                     TaskKind task_kind = TaskKind::kFreeMath);

}  // namespace slmmux
