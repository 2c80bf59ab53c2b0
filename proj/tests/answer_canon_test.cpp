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

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "test_support.hpp"

namespace slmmux {
namespace {

using testing::fixture;

std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
      out.push_back('\n');
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

TEST(ExtractTest, WorkedExamples) {
  auto a = extract_final_answer("... so the answer is \\boxed{42}.", TaskKind::kFreeMath);
  ASSERT_TRUE(a);
  EXPECT_EQ(*a, CanonicalAnswer::rational(42));
  EXPECT_EQ(a->kind(), AnswerKind::kRational);

  a = extract_final_answer("The correct option is (C).", TaskKind::kMultipleChoice);
  ASSERT_TRUE(a);
  EXPECT_EQ(*a, CanonicalAnswer::choice('C'));

  // Boxed beats the trailing number.
  a = extract_final_answer("x = 0.5 therefore \\boxed{1/2}", TaskKind::kFreeMath);
  ASSERT_TRUE(a);
  EXPECT_EQ(*a, CanonicalAnswer::rational(Rational(1, 2)));
}

TEST(ExtractTest, Corpus) {
  std::ifstream in(fixture("answer_corpus.tsv"));
  ASSERT_TRUE(in);
  std::string line;
  int cases = 0;
  while (std::getline(in, line)) {
    if (line.starts_with("#")) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    ASSERT_NE(t2, std::string::npos) << line;
    const std::string raw = unescape(line.substr(0, t1));
    const auto kind = task_kind_from_string(line.substr(t1 + 1, t2 - t1 - 1));
    const std::string expected = line.substr(t2 + 1);
    const auto got = extract_final_answer(raw, kind);
    if (expected == "none") {
      EXPECT_FALSE(got) << raw << " -> " << got->render();
    } else {
      ASSERT_TRUE(got) << raw;
      EXPECT_EQ(got->render(), expected) << raw;
    }
    ++cases;
  }
  EXPECT_GE(cases, 20);
}

TEST(NormalizeNumericTest, WorkedExamples) {
  EXPECT_EQ(normalize_numeric("42"), CanonicalAnswer::rational(42));
  EXPECT_EQ(normalize_numeric("6/4").render(), "3/2");
  // 12.5 / 100 evaluated with rationals: 125/1000 = 1/8.
  EXPECT_EQ(normalize_numeric("12.5%").value(), Rational(125, 1000));
  EXPECT_EQ(normalize_numeric("12.5%").render(), "1/8");
}

TEST(NormalizeNumericTest, Rejects) {
  EXPECT_THROW(normalize_numeric("forty-two"), ParseError);
  EXPECT_THROW(normalize_numeric("1/0"), ParseError);
  EXPECT_THROW(normalize_numeric(""), ParseError);
  EXPECT_FALSE(try_normalize_numeric("x+1"));
}

TEST(NormalizeNumericTest, LongDecimalsStayDecimal) {
  const auto d = normalize_numeric("0.1234567890123456");
  EXPECT_EQ(d.kind(), AnswerKind::kDecimal);
  EXPECT_EQ(d.value(), Rational(1234567890123456LL, 10000000000000000LL));
  EXPECT_EQ(normalize_numeric("0.123456789012").kind(), AnswerKind::kRational);
}

TEST(AnswersEqualTest, WorkedExamples) {
  EXPECT_TRUE(answers_equal(CanonicalAnswer::rational(Rational(1, 2)),
                            normalize_numeric("0.5"), TaskKind::kFreeMath));
  EXPECT_TRUE(answers_equal(CanonicalAnswer::choice('C'), CanonicalAnswer::choice('c'),
                            TaskKind::kMultipleChoice));
  // Independent canonicalization: drop backslashes, spaces and '*',
  // braces to parentheses, lowercase.
  const auto oracle = [](std::string s) {
    std::string out;
    for (char c : s) {
      if (c == '\\' || c == ' ' || c == '*') continue;
      if (c == '{') c = '(';
      if (c == '}') c = ')';
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
  };
  ASSERT_EQ(oracle("2\\sqrt{3}"), oracle("2*sqrt(3)"));
  const auto a = canonicalize_span("2\\sqrt{3}");
  const auto b = canonicalize_span("2*sqrt(3)");
  ASSERT_TRUE(a && b);
  EXPECT_TRUE(answers_equal(*a, *b, TaskKind::kFreeMath));
  EXPECT_EQ(a->render(), oracle("2*sqrt(3)"));
}

TEST(AnswersEqualTest, NoAlgebra) {
  const auto a = canonicalize_span("x+1");
  const auto b = canonicalize_span("1+x");
  ASSERT_TRUE(a && b);
  EXPECT_FALSE(answers_equal(*a, *b, TaskKind::kFreeMath));
}

TEST(AnswersEqualTest, AbsentNeverEqual) {
  const std::optional<CanonicalAnswer> none;
  EXPECT_FALSE(answers_equal(none, none, TaskKind::kFreeMath));
  EXPECT_FALSE(answers_equal(none, std::optional(CanonicalAnswer::rational(1)),
                             TaskKind::kFreeMath));
}

TEST(NormalizeExpressionTest, TexCleanup) {
  EXPECT_EQ(normalize_expression("\\frac{a}{b}"), normalize_expression("(a)/(b)"));
  EXPECT_EQ(normalize_expression("2 \\cdot x"), "2x");
  EXPECT_EQ(normalize_expression("\\sqrt3"), normalize_expression("\\sqrt{3}"));
  EXPECT_EQ(normalize_expression("X\\,+\\;Y"), "x+y");
}

TEST(ModalVoteTest, TiesGoToSmallestRendering) {
  std::vector<std::optional<CanonicalAnswer>> v = {
      CanonicalAnswer::rational(7), CanonicalAnswer::rational(3),
      CanonicalAnswer::rational(12)};
  auto r = modal_vote(v);
  EXPECT_EQ(r.votes, 1);
  EXPECT_EQ(r.answer->render(), "12");  // "12" < "3" < "7" as strings
  v.push_back(CanonicalAnswer::rational(7));
  r = modal_vote(v);
  EXPECT_EQ(r.votes, 2);
  EXPECT_EQ(r.answer->render(), "7");
}

TEST(ModalVoteTest, EquivalentFormsPool) {
  std::vector<std::optional<CanonicalAnswer>> v = {
      normalize_numeric("0.5"), CanonicalAnswer::rational(Rational(1, 2)),
      CanonicalAnswer::rational(1), std::nullopt};
  const auto r = modal_vote(v);
  EXPECT_EQ(r.votes, 2);
  EXPECT_EQ(r.answer->value(), Rational(1, 2));
}

// Properties over random inputs.

std::vector<CanonicalAnswer> answer_pool() {
  std::vector<CanonicalAnswer> pool;
  for (const char* s : {"1/2", "0.5", "2/4", "50%", "3", "3.0", "-3", "0.333",
                        "1/3", "0", "-0.0"}) {
    pool.push_back(normalize_numeric(s));
  }
  for (const char* s : {"2\\sqrt{3}", "2*sqrt(3)", "x+1", "1+x", "X + 1"}) {
    pool.push_back(*canonicalize_span(s));
  }
  for (char c : {'A', 'b', 'B', 'D'}) pool.push_back(CanonicalAnswer::choice(c));
  pool.push_back(normalize_numeric("0.1234567890123456"));
  pool.push_back(normalize_numeric("0.12345678901234560"));
  return pool;
}

TEST(AnswerPropertyTest, EqualityIsAnEquivalence) {
  const auto pool = answer_pool();
  for (const auto& a : pool) {
    EXPECT_TRUE(answers_equal(a, a, TaskKind::kFreeMath));
    for (const auto& b : pool) {
      EXPECT_EQ(answers_equal(a, b, TaskKind::kFreeMath),
                answers_equal(b, a, TaskKind::kFreeMath));
      for (const auto& c : pool) {
        if (answers_equal(a, b, TaskKind::kFreeMath) &&
            answers_equal(b, c, TaskKind::kFreeMath)) {
          EXPECT_TRUE(answers_equal(a, c, TaskKind::kFreeMath))
              << a.render() << " " << b.render() << " " << c.render();
        }
      }
    }
  }
}

TEST(AnswerPropertyTest, ExtractionIsIdempotentOnRenderings) {
  for (const auto& a : answer_pool()) {
    const auto kind = a.kind() == AnswerKind::kChoice ? TaskKind::kMultipleChoice
                                                      : TaskKind::kFreeMath;
    const auto again = extract_final_answer(a.render(), kind);
    ASSERT_TRUE(again) << a.render();
    EXPECT_EQ(*again, a) << a.render();
  }
}

TEST(AnswerPropertyTest, TotalAndDeterministicOnRandomBytes) {
  std::mt19937_64 rng(11);
  const std::string alphabet =
      "0123456789abcxyzABCD ()[]{}\\$.,/-+*%:#=\n\t\xc3\xa9\xff\x80" "boxedanswer";
  for (int trial = 0; trial < 5000; ++trial) {
    std::string s;
    const int len = static_cast<int>(rng() % 60);
    for (int i = 0; i < len; ++i) {
      if (rng() % 10 == 0) {
        static const char* chunks[] = {"\\boxed{", "the answer is ", "####",
                                       "option ", "\\frac{", "}", "(C)"};
        s += chunks[rng() % 7];
      } else {
        s.push_back(alphabet[rng() % alphabet.size()]);
      }
    }
    for (auto kind : {TaskKind::kFreeMath, TaskKind::kMultipleChoice}) {
      std::optional<CanonicalAnswer> first, second;
      ASSERT_NO_THROW(first = extract_final_answer(s, kind)) << s;
      ASSERT_NO_THROW(second = extract_final_answer(s, kind)) << s;
      ASSERT_EQ(first.has_value(), second.has_value());
      if (first) {
        EXPECT_EQ(first->render(), second->render());
        EXPECT_EQ(first->kind(), second->kind());
      }
    }
  }
}

TEST(ExtractionRuleTest, EveryKindHasAStrategy) {
  for (auto kind : {TaskKind::kFreeMath, TaskKind::kMultipleChoice}) {
    EXPECT_FALSE(ExtractionRule::for_kind(kind).patterns.empty());
  }
}

}  // namespace
}  // namespace slmmux
