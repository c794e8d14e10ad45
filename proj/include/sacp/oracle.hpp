#pragma once

// Brute-force reference computations used to check the conformal pipeline:
//
//  * R = P(cal score > test score) over every (cal, test-entry) pair;
//  * the alpha-integrated total set size, evaluated two independent ways
//    (breakpoint sweep over alpha, and the per-entry counting formula);
//  * the closed form  n*N/(1+n) * R + N/(1+n)  relating the two, where N is
//    the number of test entries (test pixels times labels);
//  * a two-sample permutation test for exchangeability of cal/test scores.
//
// The closed form counts cal >= t in the integral but cal > t in R, so it
// only holds exactly when no cal score equals a test score. Routines report
// ties rather than hiding them.
//
// Everything here is deliberately naive and single threaded.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sacp/conformal.hpp"
#include "sacp/grid.hpp"
#include "sacp/random.hpp"

namespace sacp::oracle {

/// Fraction of (cal, test) pairs with cal > test, by direct double loop.
inline double r_statistic(std::span<const double> cal, std::span<const double> test) {
  require(!cal.empty() && !test.empty(), ErrorCode::EmptyInput, "r_statistic needs non-empty samples");
  std::uint64_t greater = 0;
  for (double s : cal) {
    for (double t : test) greater += s > t ? 1 : 0;
  }
  return static_cast<double>(greater) / (static_cast<double>(cal.size()) * static_cast<double>(test.size()));
}

/// True when some cal score equals some test score.
inline bool has_cross_ties(std::span<const double> cal, std::span<const double> test) {
  std::vector<double> a(cal.begin(), cal.end()), b(test.begin(), test.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) ++i; else ++j;
  }
  return false;
}

struct IntegratedSize {
  double lhs = 0.0;         // breakpoint sweep
  double lhs_direct = 0.0;  // sum over entries of (1 + #{cal >= t}) / (1 + n)
  double rhs = 0.0;         // closed form through R
  double r = 0.0;
  bool ties = false;
  std::uint64_t sweep_count = 0;   // lhs * (1 + n), exact
  std::uint64_t direct_count = 0;  // lhs_direct * (1 + n), exact

  double relative_gap() const { return std::abs(lhs - rhs) / std::abs(lhs); }
};

/// Sum over test entries of the integral over alpha in (0, 1) of 1{t <= tau(alpha)}.
///
/// tau(alpha) is the ceil((n+1)(1-alpha))-th smallest cal score (+inf past n).
/// On the open interval alpha in (j/(n+1), (j+1)/(n+1)) that rank is the
/// constant n + 1 - j, so the integrand is piecewise constant with width
/// 1/(n+1) pieces and the integral is exact.
inline IntegratedSize integrated_set_size(std::span<const double> cal, std::span<const double> test) {
  require(!cal.empty() && !test.empty(), ErrorCode::EmptyInput, "integrated_set_size needs non-empty samples");
  const std::size_t n = cal.size();
  std::vector<double> sorted(cal.begin(), cal.end());
  std::sort(sorted.begin(), sorted.end());

  IntegratedSize out;
  for (std::size_t j = 0; j <= n; ++j) {
    const std::size_t rank = n + 1 - j;
    const double tau = rank > n ? std::numeric_limits<double>::infinity() : sorted[rank - 1];
    for (double t : test) out.sweep_count += t <= tau ? 1 : 0;
  }
  for (double t : test) {
    std::uint64_t at_least = 1;
    for (double s : cal) at_least += s >= t ? 1 : 0;
    out.direct_count += at_least;
  }
  const double denom = static_cast<double>(n + 1);
  const double entries = static_cast<double>(test.size());
  out.lhs = static_cast<double>(out.sweep_count) / denom;
  out.lhs_direct = static_cast<double>(out.direct_count) / denom;
  out.r = r_statistic(cal, test);
  out.rhs = static_cast<double>(n) * entries / denom * out.r + entries / denom;
  out.ties = has_cross_ties(cal, test);
  return out;
}

/// Calibration scores at true labels and test scores at every label.
struct ScoreSample {
  std::vector<double> cal;
  std::vector<double> test_all_labels;
  std::vector<double> test_true_labels;
};

inline ScoreSample extract_sample(const ScoreField& field, const LabelGrid& labels, const SplitMask& mask) {
  ScoreSample s;
  s.cal = calibration_scores(field, labels, mask);
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i] != Role::Test) continue;
    require(field.valid(i), ErrorCode::InvariantViolation, pixel_str(i, mask.extent().width) + ": Test pixel has no score");
    const auto px = field.pixel(i);
    s.test_all_labels.insert(s.test_all_labels.end(), px.begin(), px.end());
    if (labels.labeled(i)) s.test_true_labels.push_back(field.at(i, static_cast<std::size_t>(labels[i])));
  }
  return s;
}

struct RankSizeResult {
  bool holds = false;
  double r_a = 0.0, r_b = 0.0;
  double size_a = 0.0, size_b = 0.0;
  bool ties = false;
};

inline int sign_of(double d) { return (d > 0.0) - (d < 0.0); }

/// sign(R_a - R_b) == sign(integrated size_a - integrated size_b).
inline RankSizeResult rank_size_check(const ScoreSample& a, const ScoreSample& b) {
  require(a.cal.size() == b.cal.size() && a.test_all_labels.size() == b.test_all_labels.size(), ErrorCode::ShapeMismatch,
          "both score functions must be evaluated on the same split");
  const auto ia = integrated_set_size(a.cal, a.test_all_labels);
  const auto ib = integrated_set_size(b.cal, b.test_all_labels);
  RankSizeResult res;
  res.r_a = ia.r;
  res.r_b = ib.r;
  res.size_a = ia.lhs;
  res.size_b = ib.lhs;
  res.ties = ia.ties || ib.ties;
  res.holds = sign_of(res.r_a - res.r_b) == sign_of(res.size_a - res.size_b);
  return res;
}

/// Inputs shared by both sides of a comparison.
struct Fixture {
  const ProbabilityGrid& probs;
  const LabelGrid& labels;
  const SplitMask& mask;
  RandomizationField u;
};

/// Score functions are callables `ScoreField(const Fixture&)`.
template <typename ScoreFnA, typename ScoreFnB>
RankSizeResult rank_size_check(ScoreFnA&& score_a, ScoreFnB&& score_b, const Fixture& fx) {
  const ScoreField fa = score_a(fx);
  const ScoreField fb = score_b(fx);
  return rank_size_check(extract_sample(fa, fx.labels, fx.mask), extract_sample(fb, fx.labels, fx.mask));
}

/// Two-sided permutation test on the difference of means. Returns
/// (1 + #{|perm stat| >= |observed|}) / (1 + num_permutations).
inline double exchangeability_permutation_test(std::span<const double> cal, std::span<const double> test,
                                               std::size_t num_permutations, std::uint64_t seed) {
  require(!cal.empty() && !test.empty(), ErrorCode::EmptyInput, "permutation test needs non-empty samples");
  require(num_permutations >= 1, ErrorCode::InvalidConfig, "num_permutations must be >= 1");
  std::vector<double> pooled(cal.begin(), cal.end());
  pooled.insert(pooled.end(), test.begin(), test.end());
  const std::size_t n = cal.size(), m = test.size();
  double total = 0.0;
  for (double v : pooled) total += v;

  auto stat = [&](double first_sum) {
    return std::abs(first_sum / static_cast<double>(n) - (total - first_sum) / static_cast<double>(m));
  };
  double observed_sum = 0.0;
  for (double v : cal) observed_sum += v;
  const double observed = stat(observed_sum);
  const double slack = 1e-12 * (1.0 + observed);

  CounterRng rng(seed);
  std::size_t extreme = 0;
  for (std::size_t p = 0; p < num_permutations; ++p) {
    // partial Fisher-Yates: only the first n slots are needed
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pooled.size() - i));
      std::swap(pooled[i], pooled[j]);
      sum += pooled[i];
    }
    extreme += stat(sum) >= observed - slack ? 1 : 0;
  }
  return static_cast<double>(1 + extreme) / static_cast<double>(1 + num_permutations);
}

}  // namespace sacp::oracle
