#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace sacp;
using sacp::test::code_of;

TEST(ProbabilityGrid, AcceptsUniformRows) {
  ProbabilityGrid g({2, 2}, 2, std::vector<double>(8, 0.5));
  EXPECT_EQ(g.pixels(), 4u);
  EXPECT_DOUBLE_EQ(g.at(1, 1, 1), 0.5);
}

TEST(ProbabilityGrid, RejectsBadRowsWithCoordinates) {
  std::vector<double> v(8, 0.5);
  v[6] = 0.7;  // pixel (1, 1)
  try {
    ProbabilityGrid g({2, 2}, 2, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvariantViolation);
    EXPECT_NE(std::string(e.what()).find("pixel (1, 1)"), std::string::npos) << e.what();
  }
  v[6] = -0.0001;
  v[7] = 1.0001;
  EXPECT_EQ(code_of([&] { ProbabilityGrid({2, 2}, 2, v); }), ErrorCode::InvariantViolation);
  EXPECT_EQ(code_of([&] { ProbabilityGrid({2, 2}, 2, std::vector<double>(7, 0.5)); }), ErrorCode::InvariantViolation);
}

TEST(LabelGrid, RejectsLabelAtK) {
  EXPECT_EQ(code_of([] { LabelGrid({1, 3}, 3, {0, 3, -1}); }), ErrorCode::InvariantViolation);
  EXPECT_EQ(code_of([] { LabelGrid({1, 2}, 3, {0, -2}); }), ErrorCode::InvariantViolation);
  LabelGrid ok({1, 3}, 3, {0, 2, -1});
  EXPECT_EQ(ok.labeled_count(), 2u);
}

TEST(RoleSet, MembershipIsPerRole) {
  RoleSet s{Role::Train, Role::Ignore};
  EXPECT_TRUE(s.contains(Role::Train));
  EXPECT_TRUE(s.contains(Role::Ignore));
  EXPECT_FALSE(s.contains(Role::Cal));
  EXPECT_FALSE(s.contains(Role::Test));
}

TEST(PredictionSetGrid, WideLabelSpaces) {
  const std::size_t k = 130;
  auto sets = sacp::test::sets_from({1, 2}, k, {{0, 64, 129}, {}});
  EXPECT_EQ(sets.size(0), 3u);
  EXPECT_TRUE(sets.contains(0, 129));
  EXPECT_FALSE(sets.contains(0, 128));
  EXPECT_EQ(sets.size(1), 0u);
  EXPECT_EQ(sets.labels(0), (std::vector<std::size_t>{0, 64, 129}));
}

TEST(SoftmaxIngest, HandExamples) {
  {
    const auto g = softmax_ingest({1, 1}, 2, std::vector<double>{0.0, 0.0});
    EXPECT_NEAR(g.at(0, 0, 0), 0.5, 1e-12);
    EXPECT_NEAR(g.at(0, 0, 1), 0.5, 1e-12);
  }
  {
    const auto g = softmax_ingest({1, 1}, 3, std::vector<double>{std::log(6.0), std::log(3.0), std::log(1.0)});
    EXPECT_NEAR(g.at(0, 0, 0), 0.6, 1e-12);
    EXPECT_NEAR(g.at(0, 0, 1), 0.3, 1e-12);
    EXPECT_NEAR(g.at(0, 0, 2), 0.1, 1e-12);
  }
  {
    const auto g = softmax_ingest({1, 1}, 2, std::vector<double>{1000.0, 0.0});
    EXPECT_TRUE(std::isfinite(g.at(0, 0, 0)));
    EXPECT_NEAR(g.at(0, 0, 0), 1.0, 1e-12);
    EXPECT_NEAR(g.at(0, 0, 1), 0.0, 1e-12);
  }
}

TEST(SoftmaxIngest, RejectsNonFinite) {
  const std::vector<double> bad{0.0, std::nan("")};
  EXPECT_EQ(code_of([&] { softmax_ingest({1, 1}, 2, bad); }), ErrorCode::NonFiniteInput);
  const std::vector<double> inf{0.0, INFINITY};
  EXPECT_EQ(code_of([&] { softmax_ingest({1, 1}, 2, inf); }), ErrorCode::NonFiniteInput);
}

TEST(SoftmaxIngest, RowsSumToOneAndShiftInvariant) {
  CounterRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(15);
    std::vector<double> logits(k), shifted(k);
    const double shift = (rng.uniform() - 0.5) * 40.0;
    for (std::size_t y = 0; y < k; ++y) {
      logits[y] = (rng.uniform() - 0.5) * 20.0;
      shifted[y] = logits[y] + shift;
    }
    const auto a = softmax_ingest({1, 1}, k, logits);
    const auto b = softmax_ingest({1, 1}, k, shifted);
    double sum = 0.0;
    for (std::size_t y = 0; y < k; ++y) {
      sum += a.at(0, 0, y);
      EXPECT_NEAR(a.at(0, 0, y), b.at(0, 0, y), 1e-12);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}
