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

#include "slmmux/answer_canon.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <tuple>

namespace slmmux {
namespace {

constexpr std::size_t kMaxBareLength = 64;
constexpr std::size_t kMaxPhraseLength = 120;
constexpr int kMaxExactSignificantDigits = 12;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
char lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Index one past the brace matching s[open]; npos when unbalanced.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') {
      ++depth;
    } else if (s[i] == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string::npos;
}

// \macro{body} -> body, for wrappers that carry no meaning of their own.
void unwrap_macro(std::string& s, std::string_view macro) {
  std::size_t pos = 0;
  while ((pos = s.find(macro, pos)) != std::string::npos) {
    std::size_t open = pos + macro.size();
    while (open < s.size() && s[open] == ' ') ++open;
    if (open >= s.size() || s[open] != '{') {
      pos += macro.size();
      continue;
    }
    const std::size_t close = match_brace(s, open);
    if (close == std::string::npos) {
      s.erase(pos, open + 1 - pos);
      continue;
    }
    std::string body = s.substr(open + 1, close - open - 2);
    s.replace(pos, close - pos, body);
  }
}

// Shared TeX cleanup for both numeric and expression parsing.
std::string strip_tex_noise(std::string_view text) {
  std::string s(trim(text));
  for (std::string_view macro : {"\\text", "\\textbf", "\\mathrm", "\\mathbf",
                                 "\\mbox", "\\operatorname", "\\boxed"}) {
    unwrap_macro(s, macro);
  }
  static constexpr std::array<std::pair<std::string_view, std::string_view>,
                              17>
      kReplacements{{{"\\displaystyle", ""},
                     {"\\left", ""},
                     {"\\right", ""},
                     {"\\qquad", ""},
                     {"\\quad", ""},
                     {"\\,", ""},
                     {"\\;", ""},
                     {"\\:", ""},
                     {"\\!", ""},
                     {"\\ ", ""},
                     {"~", ""},
                     {"$", ""},
                     {"\\dfrac", "\\frac"},
                     {"\\tfrac", "\\frac"},
                     {"\\%", "%"},
                     {"^{\\circ}", ""},
                     {"^\\circ", ""}}};
  for (const auto& [from, to] : kReplacements) replace_all(s, from, to);
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (!is_space(c)) out.push_back(c);
  }
  while (!out.empty() && (out.back() == '.' || out.back() == ',')) {
    out.pop_back();
  }
  return out;
}

struct Digits {
  std::string integer;
  std::string fraction;
  bool has_point = false;
};

// Digits with optional comma grouping (exactly three digits per group) and
// an optional decimal point. Consumes the whole view or fails.
std::optional<Digits> parse_unsigned_decimal(std::string_view s) {
  Digits d;
  std::size_t i = 0;
  while (i < s.size() && (is_digit(s[i]) || s[i] == ',')) {
    if (s[i] == ',') {
      if (d.integer.empty() || i + 3 >= s.size() || !is_digit(s[i + 1]) ||
          !is_digit(s[i + 2]) || !is_digit(s[i + 3]) ||
          (i + 4 < s.size() && is_digit(s[i + 4]))) {
        return std::nullopt;
      }
    } else {
      d.integer.push_back(s[i]);
    }
    ++i;
  }
  if (i < s.size() && s[i] == '.') {
    d.has_point = true;
    ++i;
    while (i < s.size() && is_digit(s[i])) d.fraction.push_back(s[i++]);
  }
  if (i != s.size()) return std::nullopt;
  if (d.integer.empty() && d.fraction.empty()) return std::nullopt;
  return d;
}

// cpp_int reads a leading 0 as an octal prefix.
BigInt decimal_integer(const std::string& digits) {
  const auto nz = digits.find_first_not_of('0');
  return nz == std::string::npos ? BigInt(0) : BigInt(digits.substr(nz));
}

std::optional<BigInt> parse_signed_integer(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  auto d = parse_unsigned_decimal(s);
  if (!d || d->has_point || d->integer.empty()) return std::nullopt;
  BigInt v = decimal_integer(d->integer);
  return negative ? BigInt(-v) : v;
}

BigInt pow10(std::size_t n) {
  BigInt p = 1;
  for (std::size_t i = 0; i < n; ++i) p *= 10;
  return p;
}

std::optional<CanonicalAnswer> parse_cleaned_numeric(std::string s) {
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    s = s.substr(1, s.size() - 2);
  }
  bool negative = false;
  std::string_view v(s);
  if (!v.empty() && (v.front() == '-' || v.front() == '+')) {
    negative = v.front() == '-';
    v.remove_prefix(1);
  }
  bool percent = false;
  if (!v.empty() && v.back() == '%') {
    percent = true;
    v.remove_suffix(1);
  }
  if (v.empty()) return std::nullopt;

  const auto finish = [&](Rational value) {
    if (negative) value = -value;
    if (percent) value /= 100;
    return CanonicalAnswer::rational(std::move(value));
  };

  if (v.starts_with("\\frac")) {
    std::string_view rest = v.substr(5);
    if (rest.empty() || rest.front() != '{') return std::nullopt;
    const std::size_t mid = match_brace(rest, 0);
    if (mid == std::string::npos || mid >= rest.size() || rest[mid] != '{') {
      return std::nullopt;
    }
    const std::size_t end = match_brace(rest, mid);
    if (end != rest.size()) return std::nullopt;
    auto num = parse_signed_integer(rest.substr(1, mid - 2));
    auto den = parse_signed_integer(rest.substr(mid + 1, end - mid - 2));
    if (!num || !den || *den == 0) return std::nullopt;
    return finish(Rational(*num, *den));
  }

  if (const auto slash = v.find('/'); slash != std::string_view::npos) {
    auto num = parse_signed_integer(v.substr(0, slash));
    auto den = parse_signed_integer(v.substr(slash + 1));
    if (!num || !den || *den == 0) return std::nullopt;
    return finish(Rational(*num, *den));
  }

  auto d = parse_unsigned_decimal(v);
  if (!d) return std::nullopt;
  std::string fraction = d->fraction;
  while (!fraction.empty() && fraction.back() == '0') fraction.pop_back();
  std::string integer = d->integer;
  const auto nz = integer.find_first_not_of('0');
  integer = nz == std::string::npos ? "" : integer.substr(nz);

  const BigInt scaled = decimal_integer(integer + fraction);
  Rational exact(scaled, pow10(fraction.size()));

  std::string significant = integer + fraction;
  const auto first = significant.find_first_not_of('0');
  const std::size_t sig_digits =
      first == std::string::npos ? 0 : significant.size() - first;
  if (percent || !d->has_point ||
      sig_digits <= static_cast<std::size_t>(kMaxExactSignificantDigits)) {
    return finish(std::move(exact));
  }
  std::string text = (negative && exact != 0 ? "-" : "") +
                     (integer.empty() ? std::string("0") : integer);
  if (!fraction.empty()) text += "." + fraction;
  if (negative) exact = -exact;
  return CanonicalAnswer::decimal(std::move(text), std::move(exact));
}

// "(t)" -> "t" for an atomic t (a digit run or a single letter) unless the
// parenthesis is a call or an implicit product (preceded by a letter/digit).
std::string drop_atomic_parens(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') {
      std::size_t j = i + 1;
      while (j < s.size() && is_digit(s[j])) ++j;
      bool atomic = j > i + 1;
      if (!atomic && j < s.size() && is_alpha(s[j])) {
        ++j;
        atomic = true;
      }
      const bool guarded =
          !out.empty() && (is_alpha(out.back()) || is_digit(out.back()));
      if (atomic && j < s.size() && s[j] == ')' && !guarded) {
        out.append(s, i + 1, j - i - 1);
        i = j;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

std::optional<CanonicalAnswer> parse_choice_span(std::string_view span) {
  std::string s = strip_tex_noise(span);
  while (!s.empty() && (s.back() == '.' || s.back() == ')' || s.back() == ']')) {
    s.pop_back();
  }
  while (!s.empty() && (s.front() == '(' || s.front() == '[')) s.erase(0, 1);
  if (s.size() == 1 && is_alpha(s[0])) return CanonicalAnswer::choice(s[0]);
  // "(C) text of the option" style commitments.
  if (s.size() >= 2 && is_upper(s[0]) && (s[1] == ')' || s[1] == ':')) {
    return CanonicalAnswer::choice(s[0]);
  }
  return std::nullopt;
}

std::optional<CanonicalAnswer> canonicalize_for(std::string_view span,
                                                TaskKind kind) {
  if (kind == TaskKind::kMultipleChoice) return parse_choice_span(span);
  return canonicalize_span(span);
}

// Contents of every balanced \boxed{...} / \fbox{...}, last first.
std::optional<CanonicalAnswer> extract_boxed(std::string_view text,
                                             TaskKind kind) {
  std::vector<std::pair<std::size_t, std::string_view>> found;
  for (std::string_view macro : {"\\boxed", "\\fbox"}) {
    std::size_t pos = 0;
    while ((pos = text.find(macro, pos)) != std::string_view::npos) {
      std::size_t open = pos + macro.size();
      pos = open;
      while (open < text.size() && text[open] == ' ') ++open;
      if (open < text.size() && text[open] == '{') {
        const std::size_t close = match_brace(text, open);
        if (close == std::string_view::npos) continue;
        found.emplace_back(open, text.substr(open + 1, close - open - 2));
      } else if (open > pos) {
        std::size_t end = open;
        while (end < text.size() && !is_space(text[end]) && text[end] != '$') {
          ++end;
        }
        if (end > open) found.emplace_back(open, text.substr(open, end - open));
      }
    }
  }
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [at, body] : found) {
    if (auto answer = canonicalize_for(body, kind)) return answer;
  }
  return std::nullopt;
}

// Span after the last "answer is" / "answer:" up to the end of the sentence.
std::optional<CanonicalAnswer> extract_answer_phrase(std::string_view text,
                                                     TaskKind kind) {
  const std::string low = to_lower(text);
  std::size_t pos = low.size();
  while (pos > 0) {
    const std::size_t hit = low.rfind("answer", pos - 1);
    if (hit == std::string::npos) break;
    pos = hit;
    std::size_t i = hit + 6;
    while (i < low.size() && low[i] == ' ') ++i;
    bool anchored = false;
    if (low.compare(i, 2, "is") == 0 &&
        (i + 2 >= low.size() || !is_alpha(low[i + 2]))) {
      i += 2;
      anchored = true;
    }
    while (i < low.size() && low[i] == ' ') ++i;
    if (i < low.size() && low[i] == ':') {
      ++i;
      anchored = true;
    }
    if (!anchored) continue;
    std::size_t end = i;
    while (end < text.size() && end - i < kMaxPhraseLength) {
      const char c = text[end];
      if (c == '\n') break;
      if (c == '.' && (end + 1 >= text.size() || is_space(text[end + 1]))) {
        break;
      }
      ++end;
    }
    std::string_view span = trim(text.substr(i, end - i));
    if (span.empty()) continue;
    if (auto answer = canonicalize_for(span, kind)) return answer;
    const std::size_t sp = span.find_first_of(" \t");
    if (sp != std::string_view::npos) {
      if (auto head = try_normalize_numeric(span.substr(0, sp))) return head;
    }
  }
  return std::nullopt;
}

std::optional<CanonicalAnswer> extract_hash_marker(std::string_view text,
                                                   TaskKind kind) {
  const std::size_t hit = text.rfind("####");
  if (hit == std::string_view::npos) return std::nullopt;
  std::size_t end = text.find('\n', hit);
  if (end == std::string_view::npos) end = text.size();
  return canonicalize_for(text.substr(hit + 4, end - hit - 4), kind);
}

std::optional<CanonicalAnswer> extract_trailing_number(std::string_view text) {
  std::optional<std::string_view> last;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool starts_number =
        is_digit(text[i]) ||
        (text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1]));
    if (!starts_number) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    if (begin > 0 && text[begin - 1] == '-' &&
        (begin < 2 || !std::isalnum(static_cast<unsigned char>(text[begin - 2])))) {
      --begin;
    }
    std::size_t end = i;
    while (end < text.size()) {
      const char c = text[end];
      if (is_digit(c)) {
        ++end;
      } else if ((c == '.' || c == ',' || c == '/') && end + 1 < text.size() &&
                 is_digit(text[end + 1])) {
        ++end;
      } else {
        break;
      }
    }
    if (end < text.size() && text[end] == '%') ++end;
    last = text.substr(begin, end - begin);
    i = end;
  }
  if (!last) return std::nullopt;
  if (auto parsed = try_normalize_numeric(*last)) return parsed;
  // Malformed grouping like "1,00": keep the digits after the last comma.
  const std::size_t comma = last->rfind(',');
  if (comma == std::string_view::npos) return std::nullopt;
  return try_normalize_numeric(last->substr(comma + 1));
}

std::optional<CanonicalAnswer> extract_choice_letter(std::string_view text) {
  const std::string low = to_lower(text);
  std::size_t best_pos = 0;
  std::optional<char> best;
  const auto consider = [&](std::size_t pos, char letter) {
    if (!best || pos >= best_pos) {
      best_pos = pos;
      best = letter;
    }
  };
  const auto boundary = [&](std::size_t i) {
    return i >= text.size() || !is_alpha(text[i]);
  };

  // "(C)" with an uppercase letter anywhere.
  for (std::size_t i = 0; i + 2 < text.size(); ++i) {
    if (text[i] == '(' && is_upper(text[i + 1]) && text[i + 2] == ')') {
      consider(i, text[i + 1]);
    }
  }
  // Keyword forms: "option C", "choice (c)", "answer: C", "answer is (C)".
  for (std::string_view keyword : {"option", "choice", "answer"}) {
    std::size_t pos = 0;
    while ((pos = low.find(keyword, pos)) != std::string::npos) {
      std::size_t i = pos + keyword.size();
      pos = i;
      while (i < low.size() && low[i] == ' ') ++i;
      if (low.compare(i, 2, "is") == 0 && (i + 2 >= low.size() || !is_alpha(low[i + 2]))) {
        i += 2;
        while (i < low.size() && low[i] == ' ') ++i;
      }
      if (i < low.size() && low[i] == ':') ++i;
      while (i < low.size() && low[i] == ' ') ++i;
      if (i < text.size() && text[i] == '(') {
        if (i + 2 < text.size() && is_alpha(text[i + 1]) && text[i + 2] == ')') {
          consider(i, text[i + 1]);
        }
      } else if (i < text.size() && is_upper(text[i]) && boundary(i + 1)) {
        consider(i, text[i]);
      }
    }
  }
  if (!best) return std::nullopt;
  return CanonicalAnswer::choice(*best);
}

std::optional<CanonicalAnswer> extract_bare(std::string_view text,
                                            TaskKind kind) {
  const std::string_view t = trim(text);
  if (t.empty() || t.size() > kMaxBareLength) return std::nullopt;
  if (std::any_of(t.begin(), t.end(), is_space)) return std::nullopt;
  if (kind == TaskKind::kFreeMath) {
    // A lone word ("nothing", "unsure.") is prose, not a variable.
    std::string_view word = t;
    while (!word.empty() && (word.back() == '.' || word.back() == '!' || word.back() == '?')) {
      word.remove_suffix(1);
    }
    if (word.size() >= 3 && std::all_of(word.begin(), word.end(), is_alpha)) {
      return std::nullopt;
    }
  }
  return canonicalize_for(t, kind);
}

}  // namespace

const ExtractionRule& ExtractionRule::for_kind(TaskKind kind) {
  static const ExtractionRule kFreeMath{
      TaskKind::kFreeMath,
      {ExtractionStrategy::kBareAnswer, ExtractionStrategy::kBoxed,
       ExtractionStrategy::kAnswerPhrase, ExtractionStrategy::kHashMarker,
       ExtractionStrategy::kTrailingNumber}};
  static const ExtractionRule kMultipleChoice{
      TaskKind::kMultipleChoice,
      {ExtractionStrategy::kBareAnswer, ExtractionStrategy::kBoxed,
       ExtractionStrategy::kChoiceLetter}};
  return kind == TaskKind::kMultipleChoice ? kMultipleChoice : kFreeMath;
}

std::optional<CanonicalAnswer> extract_with(std::string_view raw_text,
                                            const ExtractionRule& rule) {
  for (ExtractionStrategy strategy : rule.patterns) {
    std::optional<CanonicalAnswer> found;
    switch (strategy) {
      case ExtractionStrategy::kBareAnswer:
        found = extract_bare(raw_text, rule.task_kind);
        break;
      case ExtractionStrategy::kBoxed:
        found = extract_boxed(raw_text, rule.task_kind);
        break;
      case ExtractionStrategy::kAnswerPhrase:
        found = extract_answer_phrase(raw_text, rule.task_kind);
        break;
      case ExtractionStrategy::kHashMarker:
        found = extract_hash_marker(raw_text, rule.task_kind);
        break;
      case ExtractionStrategy::kTrailingNumber:
        found = extract_trailing_number(raw_text);
        break;
      case ExtractionStrategy::kChoiceLetter:
        found = extract_choice_letter(raw_text);
        break;
    }
    if (found) return found;
  }
  return std::nullopt;
}

std::optional<CanonicalAnswer> extract_final_answer(std::string_view raw_text,
                                                    TaskKind task_kind) {
  return extract_with(raw_text, ExtractionRule::for_kind(task_kind));
}

bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b,
                   TaskKind /*task_kind*/) {
  return a == b;
}

bool answers_equal(const std::optional<CanonicalAnswer>& a,
                   const std::optional<CanonicalAnswer>& b,
                   TaskKind task_kind) {
  return a && b && answers_equal(*a, *b, task_kind);
}

std::optional<CanonicalAnswer> try_normalize_numeric(std::string_view text) {
  std::string cleaned = strip_tex_noise(text);
  if (cleaned.empty() || cleaned.size() > 4096) return std::nullopt;
  return parse_cleaned_numeric(std::move(cleaned));
}

CanonicalAnswer normalize_numeric(std::string_view text) {
  if (auto parsed = try_normalize_numeric(text)) return *std::move(parsed);
  throw ParseError("not a number: '" + std::string(text) + "'");
}

std::string normalize_expression(std::string_view text) {
  std::string s = strip_tex_noise(text);

  // \frac{a}{b} -> (a)/(b), innermost first so nesting resolves.
  for (std::size_t pos; (pos = s.rfind("\\frac")) != std::string::npos;) {
    const std::size_t open = pos + 5;
    const std::size_t mid =
        open < s.size() && s[open] == '{' ? match_brace(s, open)
                                          : std::string::npos;
    const std::size_t end = mid != std::string::npos && mid < s.size() &&
                                    s[mid] == '{'
                                ? match_brace(s, mid)
                                : std::string::npos;
    if (end == std::string::npos) {
      s.erase(pos, 5);
      continue;
    }
    const std::string num = s.substr(open + 1, mid - open - 2);
    const std::string den = s.substr(mid + 1, end - mid - 2);
    s.replace(pos, end - pos, "(" + num + ")/(" + den + ")");
  }
  replace_all(s, "\\cdot", "");
  replace_all(s, "\\times", "");
  replace_all(s, "*", "");

  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\\') continue;  // \sqrt -> sqrt, \pi -> pi
    if (c == '{') {
      out.push_back('(');
    } else if (c == '}') {
      out.push_back(')');
    } else {
      out.push_back(lower(c));
    }
  }

  // sqrt3 -> sqrt(3), sqrtx -> sqrt(x)
  std::string with_calls;
  with_calls.reserve(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.compare(i, 4, "sqrt") == 0 && i + 4 < out.size() &&
        out[i + 4] != '(') {
      with_calls += "sqrt(";
      std::size_t j = i + 4;
      if (is_digit(out[j])) {
        while (j < out.size() && is_digit(out[j])) with_calls.push_back(out[j++]);
      } else {
        with_calls.push_back(out[j++]);
      }
      with_calls.push_back(')');
      i = j - 1;
      continue;
    }
    with_calls.push_back(out[i]);
  }
  return drop_atomic_parens(with_calls);
}

std::optional<CanonicalAnswer> canonicalize_span(std::string_view span) {
  if (auto numeric = try_normalize_numeric(span)) return numeric;
  std::string expr = normalize_expression(span);
  if (expr.empty()) return std::nullopt;
  if (auto numeric = try_normalize_numeric(expr)) return numeric;
  return CanonicalAnswer::expression(std::move(expr));
}

ModalVote modal_vote(std::span<const std::optional<CanonicalAnswer>> answers,
                     TaskKind task_kind) {
  struct Group {
    CanonicalAnswer representative;
    int votes;
  };
  const auto render_key = [](const CanonicalAnswer& a) {
    return std::make_tuple(std::cref(a.render()), a.kind());
  };
  std::vector<Group> groups;
  for (const auto& answer : answers) {
    if (!answer) continue;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return answers_equal(g.representative, *answer, task_kind);
    });
    if (it == groups.end()) {
      groups.push_back({*answer, 1});
      continue;
    }
    ++it->votes;
    if (render_key(*answer) < render_key(it->representative)) {
      it->representative = *answer;
    }
  }
  ModalVote best;
  for (const auto& g : groups) {
    if (!best.answer || g.votes > best.votes ||
        (g.votes == best.votes &&
         render_key(g.representative) < render_key(*best.answer))) {
      best.answer = g.representative;
      best.votes = g.votes;
    }
  }
  return best;
}

}  // namespace slmmux
