#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_support.hpp"

using namespace sacp;
using sacp::test::code_of;

namespace {
const std::vector<double> kP{0.6, 0.3, 0.1};
}

TEST(RankLabels, HandSorted) {
  const auto a = rank_labels(kP);
  EXPECT_EQ(a.order, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(a.rank[1], 2u);
  EXPECT_EQ(rank_labels(std::vector<double>{0.5, 0.5}).order, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(rank_labels(std::vector<double>{0.1, 0.2, 0.7}).order, (std::vector<std::size_t>{2, 1, 0}));
}

TEST(ApsScore, HandValues) {
  EXPECT_NEAR(aps_score(kP, 0, 0.5), 0.30, 1e-12);
  EXPECT_NEAR(aps_score(kP, 2, 0.5), 0.95, 1e-12);
  EXPECT_EQ(aps_score(std::vector<double>{1.0, 0.0}, 0, 0.0), 0.0);
  EXPECT_EQ(code_of([] { aps_score(kP, 3, 0.5); }), ErrorCode::LabelOutOfRange);
}

TEST(RapsScore, HandValues) {
  EXPECT_NEAR(raps_score(kP, 1, 0.5, 0.1, 1), 0.85, 1e-12);
  EXPECT_NEAR(raps_score(kP, 0, 0.5, 0.1, 1), 0.30, 1e-12);
  EXPECT_EQ(code_of([] { raps_score(kP, 7, 0.5, 0.1, 1); }), ErrorCode::LabelOutOfRange);
}

TEST(SapsScore, HandValues) {
  EXPECT_NEAR(saps_score(kP, 0, 0.5, 0.2), 0.30, 1e-12);
  EXPECT_NEAR(saps_score(kP, 1, 0.5, 0.2), 0.70, 1e-12);
  EXPECT_NEAR(saps_score(kP, 2, 0.5, 0.2), 0.90, 1e-12);
  EXPECT_EQ(code_of([] { saps_score(kP, 3, 0.5, 0.2); }), ErrorCode::LabelOutOfRange);
}

TEST(ScoreFunctionConfig, ParsesKindsAndRejectsBadParameters) {
  EXPECT_EQ(parse_score_kind("APS"), ScoreKind::APS);
  EXPECT_EQ(parse_score_kind("raps"), ScoreKind::RAPS);
  EXPECT_EQ(parse_score_kind("Saps"), ScoreKind::SAPS);
  EXPECT_EQ(code_of([] { parse_score_kind("thr"); }), ErrorCode::InvalidConfig);
  ScoreFunctionConfig cfg;
  cfg.raps_lambda = -1.0;
  EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::InvalidConfig);
}

TEST(ScoreField, OnePixelAps) {
  const auto grid = sacp::test::probs_1x1(kP);
  const auto mask = sacp::test::uniform_mask({1, 1}, Role::Test);
  std::vector<double> out(3);
  score_pixel(grid.pixel(0), 0.5, {}, out);
  EXPECT_NEAR(out[0], 0.30, 1e-12);
  EXPECT_NEAR(out[1], 0.75, 1e-12);
  EXPECT_NEAR(out[2], 0.95, 1e-12);

  const auto field = score_field(grid, mask, {}, RandomizationField(3));
  ASSERT_TRUE(field.valid(0));
  const double u = RandomizationField(3)(0, 0);
  for (std::size_t y = 0; y < 3; ++y) EXPECT_EQ(field.at(0, y), aps_score(kP, y, u));
}

TEST(ScoreField, TrainPixelsAreInvalidAndRunsRepeat) {
  ProbabilityGrid grid({1, 3}, 3, {0.6, 0.3, 0.1, 0.2, 0.2, 0.6, 0.1, 0.8, 0.1});
  SplitMask mask({1, 3}, {Role::Train, Role::Cal, Role::Test});
  const auto a = score_field(grid, mask, {}, RandomizationField(42));
  const auto b = score_field(grid, mask, {}, RandomizationField(42));
  EXPECT_FALSE(a.valid(0));
  EXPECT_TRUE(a.valid(1));
  EXPECT_TRUE(a.valid(2));
  EXPECT_TRUE(a.identical(b));
}

TEST(RandomizationField, PureFunctionOfSeedAndPosition) {
  RandomizationField u(9);
  std::vector<double> forward, backward;
  for (std::size_t r = 0; r < 20; ++r)
    for (std::size_t c = 0; c < 20; ++c) forward.push_back(u(r, c));
  for (std::size_t r = 20; r-- > 0;)
    for (std::size_t c = 20; c-- > 0;) backward.push_back(u(r, c));
  std::reverse(backward.begin(), backward.end());
  EXPECT_EQ(forward, backward);
  for (double v : forward) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_NE(RandomizationField(9)(3, 4), RandomizationField(10)(3, 4));
}

class ScoreProperties : public ::testing::Test {
 protected:
  CounterRng rng{2024};
  std::vector<double> probs(std::size_t k) { return sacp::test::random_simplex(rng, k); }
};

TEST_F(ScoreProperties, MonotoneInRankAtFixedU) {
  for (int t = 0; t < 500; ++t) {
    const std::size_t k = 2 + rng.below(14);
    const auto p = probs(k);
    const double u = rng.uniform();
    const auto rv = rank_labels(p);
    for (auto kind : {ScoreKind::APS, ScoreKind::RAPS, ScoreKind::SAPS}) {
      ScoreFunctionConfig cfg{.kind = kind};
      std::vector<double> s(k);
      score_pixel(p, u, cfg, s);
      for (std::size_t pos = 1; pos < k; ++pos) {
        const auto hi = rv.order[pos - 1], lo = rv.order[pos];
        if (kind == ScoreKind::SAPS) {
          // SAPS is monotone past the top label, and the top label stays below
          // the rest once lambda >= pmax
          if (pos >= 2) {
            EXPECT_LE(s[hi], s[lo]);
          }
        } else {
          EXPECT_LE(s[hi], s[lo] + 1e-15);
        }
      }
    }
    const ScoreFunctionConfig big{.kind = ScoreKind::SAPS, .saps_lambda = 1.0};
    std::vector<double> s(k);
    score_pixel(p, u, big, s);
    for (std::size_t y = 0; y < k; ++y) EXPECT_LE(s[rv.order[0]], s[y]);
  }
}

TEST_F(ScoreProperties, ApsStrictlyIncreasingInU) {
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 2 + rng.below(10);
    const auto p = probs(k);
    const std::size_t y = rng.below(k);
    const double u1 = rng.uniform() * 0.5;
    const double u2 = u1 + 0.1 + rng.uniform() * 0.4;
    EXPECT_LT(aps_score(p, y, u1), aps_score(p, y, u2));
  }
}

TEST_F(ScoreProperties, RapsWithZeroLambdaIsApsBitwise) {
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 2 + rng.below(10);
    const auto p = probs(k);
    const double u = rng.uniform();
    for (std::size_t y = 0; y < k; ++y) {
      EXPECT_EQ(raps_score(p, y, u, 0.0, 1 + static_cast<std::int64_t>(rng.below(5))), aps_score(p, y, u));
    }
  }
}

TEST_F(ScoreProperties, PermutationEquivariant) {
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 2 + rng.below(10);
    const auto p = probs(k);
    const double u = rng.uniform();
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<double> q(k);
    for (std::size_t y = 0; y < k; ++y) q[perm[y]] = p[y];
    for (auto kind : {ScoreKind::APS, ScoreKind::RAPS, ScoreKind::SAPS}) {
      ScoreFunctionConfig cfg{.kind = kind};
      for (std::size_t y = 0; y < k; ++y) {
        EXPECT_NEAR(score_label(p, y, u, cfg), score_label(q, perm[y], u, cfg), 1e-12);
      }
    }
  }
}

TEST_F(ScoreProperties, VectorFormMatchesSingleLabelBitwise) {
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 2 + rng.below(10);
    auto p = probs(k);
    if (t % 3 == 0) p[1] = p[0];  // exercise ties
    const double u = rng.uniform();
    for (auto kind : {ScoreKind::APS, ScoreKind::RAPS, ScoreKind::SAPS}) {
      ScoreFunctionConfig cfg{.kind = kind, .raps_lambda = 0.05, .raps_kreg = 2, .saps_lambda = 0.3};
      std::vector<double> s(k);
      score_pixel(p, u, cfg, s);
      for (std::size_t y = 0; y < k; ++y) EXPECT_EQ(s[y], score_label(p, y, u, cfg));
    }
  }
}
