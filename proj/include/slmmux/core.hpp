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

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "json.hpp"

namespace slmmux {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Error hierarchy. The CLI maps each family onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ParseError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class DatasetError : public Error {
 public:
  using Error::Error;
};
class DomainError : public Error {
 public:
  using Error::Error;
};
class NoAnswerError : public Error {
 public:
  using Error::Error;
};

enum class TaskKind { kFreeMath, kMultipleChoice };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view text);

enum class AnswerKind { kRational, kDecimal, kExpression, kChoice };

std::string_view to_string(AnswerKind kind);

/// A normalized final answer. Construct through the named factories (or
/// answer_canon's parsers) so the stored payload is always canonical:
/// rationals in lowest terms with a positive denominator, expressions
/// lowercased and whitespace-free, choices a single uppercase letter.
///
/// operator== implements answers_equal: numeric kinds compare by exact value
/// (so rational 1/2 equals decimal "0.5"), every other pairing compares the
/// normalized text of like kinds.
class CanonicalAnswer {
 public:
  static CanonicalAnswer rational(Rational value);
  /// `exact` is the decimal's exact value; `text` its normalized rendering.
  static CanonicalAnswer decimal(std::string text, Rational exact);
  static CanonicalAnswer expression(std::string normalized);
  static CanonicalAnswer choice(char letter);

  AnswerKind kind() const { return kind_; }
  bool is_numeric() const {
    return kind_ == AnswerKind::kRational || kind_ == AnswerKind::kDecimal;
  }
  /// Exact value; only meaningful when is_numeric().
  const Rational& value() const { return value_; }
  /// Rendering used for display, persistence and the lexicographic tie rule.
  const std::string& render() const { return text_; }

  friend bool operator==(const CanonicalAnswer& a, const CanonicalAnswer& b);

  nlohmann::json to_json() const;
  static CanonicalAnswer from_json(const nlohmann::json& j);

 private:
  CanonicalAnswer(AnswerKind kind, std::string text, Rational value)
      : kind_(kind), text_(std::move(text)), value_(std::move(value)) {}

  AnswerKind kind_ = AnswerKind::kRational;
  std::string text_;
  Rational value_;
};

std::string render_rational(const Rational& value);

struct Query {
  std::string id;
  std::string text;
  TaskKind task_kind = TaskKind::kFreeMath;
  std::optional<CanonicalAnswer> gold_answer;
  std::optional<std::string> subject;
};

struct ModelProfile {
  std::string model_id;
  std::string endpoint;
  double validation_accuracy = 0.0;
  int display_order = 0;
};

/// The k generations of one model for one query, in sample_index order.
struct SampleSet {
  std::string model_id;
  std::string query_id;
  std::vector<std::string> raw_texts;
  std::vector<std::optional<CanonicalAnswer>> answers;
  double temperature = 0.0;
  int k = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  /// Leading `n` samples; the sweeps rely on prefixes being stable.
  SampleSet prefix(int n) const;
  nlohmann::json to_json() const;
};

/// Agreement of a model with itself: votes for the modal answer out of k.
/// Ordered exactly by cross-multiplication, so 2/3 and 4/6 compare equal.
struct Confidence {
  int votes = 0;
  int k = 1;

  double value() const { return static_cast<double>(votes) / k; }
  friend std::strong_ordering operator<=>(const Confidence& a,
                                          const Confidence& b) {
    return static_cast<std::int64_t>(a.votes) * b.k <=>
           static_cast<std::int64_t>(b.votes) * a.k;
  }
  friend bool operator==(const Confidence& a, const Confidence& b) {
    return (a <=> b) == std::strong_ordering::equal;
  }
};

enum class TieBreak { kNone, kValidationAccuracy, kDisplayOrder };

std::string_view to_string(TieBreak tie_break);

struct ModelVerdict {
  std::string model_id;
  std::optional<CanonicalAnswer> modal_answer;
  Confidence confidence;

  nlohmann::json to_json() const;
};

struct MuxDecision {
  std::string selected_model;
  CanonicalAnswer selected_answer;
  std::vector<ModelVerdict> per_model;
  TieBreak tie_break_used = TieBreak::kNone;

  nlohmann::json to_json() const;
};

std::string sha256_hex(std::string_view data);

/// Content hash of a fully resolved configuration. nlohmann::json keeps
/// object keys sorted, so field order in the source file never matters.
std::string fingerprint(const nlohmann::json& config);

}  // namespace slmmux
