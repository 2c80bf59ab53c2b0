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


#include "slmmux/analysis.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace slmmux {
namespace {

using testing::reference_majority;

TEST(MajorityTest, ThreeAtSixTenthsIsExact) {
  // Enumerate the 8 outcomes of three trials directly.
  Rational by_hand = 0;
  const Rational p(3, 5);
  for (int mask = 0; mask < 8; ++mask) {
    Rational prob = 1;
    int hits = 0;
    for (int t = 0; t < 3; ++t) {
      const bool hit = mask & (1 << t);
      hits += hit;
      prob *= hit ? p : Rational(1) - p;
    }
    if (hits >= 2) by_hand += prob;
  }
  EXPECT_EQ(by_hand, Rational(648, 1000));
  EXPECT_EQ(majority_success_prob(3, p), by_hand);
  EXPECT_EQ(majority_success_prob(3, 0.6), 0.648);
}

TEST(MajorityTest, MatchesDynamicProgrammingOracle) {
  for (int n = 1; n <= 30; ++n) {
    for (const Rational& p : {Rational(0), Rational(1, 7), Rational(1, 2),
                              Rational(13, 20), Rational(999, 1000), Rational(1)}) {
      EXPECT_EQ(majority_success_prob(n, p), reference_majority(n, p)) << n;
    }
  }
}

TEST(MajorityTest, BasicIdentities) {
  for (double p = 0.0; p <= 1.0; p += 0.05) {
    EXPECT_NEAR(majority_success_prob(1, p), p, 1e-15);
  }
  for (int n = 1; n <= 99; n += 2) {
    EXPECT_EQ(majority_success_prob(n, Rational(1, 2)), Rational(1, 2));
    EXPECT_EQ(majority_success_prob(n, 0.0), 0.0);
    EXPECT_EQ(majority_success_prob(n, 1.0), 1.0);
  }
}

TEST(MajorityTest, EvenNCountsHalfSplits) {
  // N = 2: P(X >= 1) = 1 - (1-p)^2.
  EXPECT_EQ(majority_success_prob(2, Rational(1, 2)), Rational(3, 4));
}

TEST(MajorityTest, DomainErrors) {
  EXPECT_THROW(majority_success_prob(0, 0.5), DomainError);
  EXPECT_THROW(majority_success_prob(3, 1.5), DomainError);
  EXPECT_THROW(majority_success_prob(3, Rational(-1, 2)), DomainError);
}

TEST(MajorityTest, FloatingPathAgreesWithExactForLargeN) {
  // Irrational-looking p skips the exact detour.
  for (int n : {65, 99, 151, 401}) {
    for (double p : {0.3141592653589793, 0.5000001, 0.77}) {
      const double f = majority_success_prob_floating(n, p);
      const auto exact = detail::short_decimal(p);
      if (exact) {
        EXPECT_NEAR(f, static_cast<double>(majority_success_prob(n, *exact)), 1e-12);
      }
      EXPECT_GE(f, 0.0);
      EXPECT_LE(f, 1.0);
    }
  }
  EXPECT_NEAR(majority_success_prob_floating(3, 0.6), 0.648, 1e-15);
}

TEST(MajorityTest, NondecreasingInP) {
  for (int n : {2, 3, 8, 21}) {
    double prev = -1;
    for (int i = 0; i <= 200; ++i) {
      const double a = majority_success_prob(n, i / 200.0);
      EXPECT_GE(a, prev);
      prev = a;
    }
  }
}

TEST(QuestionTypeTest, Partition) {
  EXPECT_EQ(classify_question_type(1.0), QuestionType::kType1);
  EXPECT_EQ(classify_question_type(0.7), QuestionType::kType2);
  EXPECT_EQ(classify_question_type(0.5), QuestionType::kType3);
  EXPECT_EQ(classify_question_type(Rational(1, 2)), QuestionType::kType3);
  EXPECT_EQ(classify_question_type(Rational(51, 100)), QuestionType::kType2);
  EXPECT_EQ(classify_question_type(0.0), QuestionType::kType3);
  EXPECT_THROW(classify_question_type(1.1), DomainError);
}

TEST(PredictTest, WorkedExamples) {
  const AbilityVector<double> ab{0.9, 0.3};
  EXPECT_DOUBLE_EQ(ab.p_max(), 0.9);
  EXPECT_DOUBLE_EQ(ab.p_bar(), 0.6);
  // A(3, 0.9) = 0.729 + 3 * 0.81 * 0.1 = 0.972
  EXPECT_NEAR(predict_mux(3, ab), 0.972, 1e-12);
  EXPECT_NEAR(predict_agent_forest(3, ab), 0.648, 1e-12);

  const AbilityVector<Rational> exact{Rational(9, 10), Rational(3, 10)};
  EXPECT_EQ(predict_mux(3, exact), Rational(972, 1000));
  EXPECT_EQ(predict_agent_forest(3, exact), Rational(648, 1000));

  const AbilityVector<double> single{0.42};
  EXPECT_EQ(predict_mux(5, single), majority_success_prob(5, 0.42));
  const AbilityVector<double> same{0.66, 0.66, 0.66};
  EXPECT_EQ(predict_mux(5, same), predict_agent_forest(5, same));
  const AbilityVector<double> perfect{1.0, 1.0};
  EXPECT_EQ(predict_agent_forest(7, perfect), 1.0);
  EXPECT_THROW(AbilityVector<double>({0.5, 1.2}), DomainError);
}

TEST(CurveTest, GridIsInclusiveAndClean) {
  const auto c = majority_curve(3, 0.0, 1.0, 0.01);
  ASSERT_EQ(c.size(), 101u);
  EXPECT_EQ(c[7].first, 0.07);
  EXPECT_EQ(c.back().first, 1.0);
  EXPECT_EQ(c[60].second, 0.648);
  EXPECT_THROW(majority_curve(3, 0.0, 1.0, 0.0), DomainError);
}

}  // namespace
}  // namespace slmmux
