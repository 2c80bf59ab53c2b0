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

#include "slmmux/core.hpp"

#include <openssl/sha.h>

#include <array>
#include <cctype>

#include "slmmux/answer_canon.hpp"

namespace slmmux {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kFreeMath:
      return "free-math";
    case TaskKind::kMultipleChoice:
      return "multiple-choice";
  }
  return "free-math";
}

TaskKind task_kind_from_string(std::string_view text) {
  if (text == "free-math" || text == "math") return TaskKind::kFreeMath;
  if (text == "multiple-choice" || text == "mc") {
    return TaskKind::kMultipleChoice;
  }
  throw ParseError("unknown task kind: " + std::string(text));
}

std::string_view to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::kRational:
      return "rational";
    case AnswerKind::kDecimal:
      return "decimal";
    case AnswerKind::kExpression:
      return "expression";
    case AnswerKind::kChoice:
      return "choice";
  }
  return "expression";
}

std::string_view to_string(TieBreak tie_break) {
  switch (tie_break) {
    case TieBreak::kNone:
      return "none";
    case TieBreak::kValidationAccuracy:
      return "validation_accuracy";
    case TieBreak::kDisplayOrder:
      return "display_order";
  }
  return "none";
}

std::string render_rational(const Rational& value) {
  const BigInt num = boost::multiprecision::numerator(value);
  const BigInt den = boost::multiprecision::denominator(value);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

CanonicalAnswer CanonicalAnswer::rational(Rational value) {
  // cpp_rational is always normalized: lowest terms, positive denominator.
  std::string text = render_rational(value);
  return CanonicalAnswer(AnswerKind::kRational, std::move(text),
                         std::move(value));
}

CanonicalAnswer CanonicalAnswer::decimal(std::string text, Rational exact) {
  return CanonicalAnswer(AnswerKind::kDecimal, std::move(text),
                         std::move(exact));
}

CanonicalAnswer CanonicalAnswer::expression(std::string normalized) {
  return CanonicalAnswer(AnswerKind::kExpression, std::move(normalized), 0);
}

CanonicalAnswer CanonicalAnswer::choice(char letter) {
  const auto upper = static_cast<char>(
      std::toupper(static_cast<unsigned char>(letter)));
  if (upper < 'A' || upper > 'Z') {
    throw ParseError(std::string("choice must be a letter, got '") + letter +
                     "'");
  }
  return CanonicalAnswer(AnswerKind::kChoice, std::string(1, upper), 0);
}

bool operator==(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  if (a.is_numeric() && b.is_numeric()) return a.value_ == b.value_;
  if (a.kind_ != b.kind_) return false;
  return a.text_ == b.text_;
}

nlohmann::json CanonicalAnswer::to_json() const {
  return {{"kind", std::string(to_string(kind_))}, {"value", text_}};
}

CanonicalAnswer CanonicalAnswer::from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const auto text = j.at("value").get<std::string>();
  if (kind == "rational" || kind == "decimal") return normalize_numeric(text);
  if (kind == "choice") {
    if (text.size() != 1) throw ParseError("bad choice payload: " + text);
    return choice(text[0]);
  }
  if (kind == "expression") return expression(text);
  throw ParseError("unknown answer kind: " + kind);
}

SampleSet SampleSet::prefix(int n) const {
  if (n < 1 || n > k) {
    throw DomainError("prefix length " + std::to_string(n) +
                      " outside [1, " + std::to_string(k) + "]");
  }
  SampleSet out = *this;
  out.raw_texts.resize(n);
  out.answers.resize(n);
  out.k = n;
  return out;
}

nlohmann::json SampleSet::to_json() const {
  nlohmann::json answers_json = nlohmann::json::array();
  for (const auto& a : answers) {
    answers_json.push_back(a ? a->to_json() : nlohmann::json(nullptr));
  }
  return {{"model_id", model_id},
          {"query_id", query_id},
          {"raw_texts", raw_texts},
          {"answers", std::move(answers_json)},
          {"temperature", temperature},
          {"k", k},
          {"prompt_tokens", prompt_tokens},
          {"completion_tokens", completion_tokens}};
}

nlohmann::json ModelVerdict::to_json() const {
  return {{"model_id", model_id},
          {"modal_answer",
           modal_answer ? modal_answer->to_json() : nlohmann::json(nullptr)},
          {"votes", confidence.votes},
          {"k", confidence.k},
          {"confidence", confidence.value()}};
}

nlohmann::json MuxDecision::to_json() const {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : per_model) verdicts.push_back(v.to_json());
  return {{"selected_model", selected_model},
          {"selected_answer", selected_answer.to_json()},
          {"per_model", std::move(verdicts)},
          {"tie_break_used", std::string(to_string(tie_break_used))}};
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(),
         digest.data());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(digest.size() * 2);
  for (unsigned char byte : digest) {
    out.push_back(kHex[byte >> 4]);
    out.push_back(kHex[byte & 0xF]);
  }
  return out;
}

std::string fingerprint(const nlohmann::json& config) {
  return sha256_hex(config.dump());
}

}  // namespace slmmux
