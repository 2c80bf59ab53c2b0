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

// Closed-form accuracy of majority voting over N independent samples and
// the resulting predictions for confidence-based selection versus voting
// over a pooled set of models.
//
// Everything is templated on the scalar. Floating scalars sum the binomial
// tail in log space, smallest term first; Rational is exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/eigen.hpp>

#include "slmmux/core.hpp"

namespace slmmux {

/// Largest N for which the floating overload detours through exact
/// arithmetic when p is a short decimal.
inline constexpr int kExactMajorityMaxN = 64;

/// ceil(N/2): the number of correct votes that counts as a majority. For
/// even N an exact half split counts as success.
inline int majority_threshold(int n) { return (n + 1) / 2; }

namespace detail {

inline void check_majority_args(int n, bool p_in_range) {
  if (n < 1) throw DomainError("N must be >= 1, got " + std::to_string(n));
  if (!p_in_range) throw DomainError("p must lie in [0, 1]");
}

// p as a/10^d for d <= 6 when that round-trips exactly.
template <std::floating_point T>
std::optional<Rational> short_decimal(T p) {
  std::int64_t scale = 1;
  for (int digits = 0; digits <= 6; ++digits, scale *= 10) {
    const T scaled = std::round(p * static_cast<T>(scale));
    if (scaled / static_cast<T>(scale) == p) {
      return Rational(static_cast<std::int64_t>(scaled), scale);
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// A(N, p) = P(X >= ceil(N/2)), X ~ Binomial(N, p), exactly.
inline Rational majority_success_prob(int n, const Rational& p) {
  detail::check_majority_args(n, p >= 0 && p <= 1);
  const BigInt a = boost::multiprecision::numerator(p);
  const BigInt b = boost::multiprecision::denominator(p);
  const BigInt c = b - a;
  // sum_k C(n,k) a^k c^(n-k), over b^n.
  std::vector<BigInt> pow_a(n + 1), pow_c(n + 1);
  pow_a[0] = pow_c[0] = 1;
  for (int i = 1; i <= n; ++i) {
    pow_a[i] = pow_a[i - 1] * a;
    pow_c[i] = pow_c[i - 1] * c;
  }
  BigInt choose = 1;  // C(n, k), walked upward from k = 0
  BigInt total = 0;
  const int t = majority_threshold(n);
  for (int k = 0; k <= n; ++k) {
    if (k > 0) choose = choose * (n - k + 1) / k;
    if (k >= t) total += choose * pow_a[k] * pow_c[n - k];
  }
  return Rational(total, BigInt(boost::multiprecision::pow(b, n)));
}

/// Floating A(N, p) without the exact detour.
template <std::floating_point T>
T majority_success_prob_floating(int n, T p) {
  detail::check_majority_args(n, p >= T(0) && p <= T(1));
  const int t = majority_threshold(n);
  if (p == T(0)) return T(0);
  if (p == T(1)) return T(1);
  const T log_p = std::log(p);
  const T log_q = std::log1p(-p);
  const T log_n_fact = std::lgamma(static_cast<T>(n) + 1);
  std::vector<T> terms;
  terms.reserve(static_cast<std::size_t>(n - t + 1));
  for (int k = t; k <= n; ++k) {
    const T log_choose = log_n_fact - std::lgamma(static_cast<T>(k) + 1) -
                         std::lgamma(static_cast<T>(n - k) + 1);
    terms.push_back(std::exp(log_choose + k * log_p + (n - k) * log_q));
  }
  std::sort(terms.begin(), terms.end());
  T sum = 0;
  for (T term : terms) sum += term;
  return std::min(sum, T(1));
}

/// Exact for short-decimal p when N <= kExactMajorityMaxN, otherwise the
/// floating tail sum.
template <std::floating_point T>
T majority_success_prob(int n, T p) {
  detail::check_majority_args(n, p >= T(0) && p <= T(1));
  if (n <= kExactMajorityMaxN) {
    if (auto exact = detail::short_decimal(p)) {
      return static_cast<T>(majority_success_prob(n, *exact));
    }
  }
  return majority_success_prob_floating(n, p);
}

enum class QuestionType { kType1, kType2, kType3 };

inline std::string_view to_string(QuestionType type) {
  switch (type) {
    case QuestionType::kType1:
      return "Type1";
    case QuestionType::kType2:
      return "Type2";
    case QuestionType::kType3:
      return "Type3";
  }
  return "Type3";
}

/// Type1: always right (p = 1). Type2: majority voting helps (p > 1/2).
/// Type3: everything else, including the p = 1/2 boundary.
template <typename Scalar>
QuestionType classify_question_type(const Scalar& p) {
  if (p < Scalar(0) || p > Scalar(1)) throw DomainError("p must lie in [0, 1]");
  if (p == Scalar(1)) return QuestionType::kType1;
  if (p * 2 > Scalar(1)) return QuestionType::kType2;
  return QuestionType::kType3;
}

/// Per-model success probabilities.
template <typename Scalar>
class AbilityVector {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit AbilityVector(Vector p) : p_(std::move(p)) {
    if (p_.size() == 0) throw DomainError("ability vector is empty");
    for (Eigen::Index i = 0; i < p_.size(); ++i) {
      if (p_(i) < Scalar(0) || p_(i) > Scalar(1)) {
        throw DomainError("ability outside [0, 1]");
      }
    }
  }
  AbilityVector(std::initializer_list<Scalar> values)
      : AbilityVector(from_list(values)) {}

  const Vector& values() const { return p_; }
  Eigen::Index size() const { return p_.size(); }
  Scalar p_max() const { return p_.maxCoeff(); }
  Scalar p_bar() const { return Scalar(p_.sum()) / Scalar(p_.size()); }

 private:
  static Vector from_list(std::initializer_list<Scalar> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (const auto& x : values) v(i++) = x;
    return v;
  }

  Vector p_;
};

/// Confidence-based selection behaves like majority voting by the
/// strongest model: A(N, p_max).
template <typename Scalar>
Scalar predict_mux(int n, const AbilityVector<Scalar>& abilities) {
  return majority_success_prob(n, abilities.p_max());
}

/// Voting over samples drawn evenly from all models: A(N, p_bar).
template <typename Scalar>
Scalar predict_agent_forest(int n, const AbilityVector<Scalar>& abilities) {
  return majority_success_prob(n, abilities.p_bar());
}

/// A(N, p) sampled on lo, lo+step, ..., hi (inclusive, clamped to [0, 1]).
inline std::vector<std::pair<double, double>> majority_curve(int n, double lo,
                                                             double hi,
                                                             double step) {
  if (!(step > 0) || hi < lo) throw DomainError("bad grid");
  const auto count = static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<std::pair<double, double>> curve;
  curve.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    // Round to the grid's decimal resolution so 0.07 is 0.07, not 0.0700..01.
    double p = std::clamp(lo + static_cast<double>(i) * step, 0.0, 1.0);
    p = std::round(p * 1e9) / 1e9;
    curve.emplace_back(p, majority_success_prob(n, p));
  }
  return curve;
}

}  // namespace slmmux
