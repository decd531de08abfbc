#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "autopos/closed_form.hpp"
#include "autopos/simulator.hpp"
#include "oracles.hpp"

using namespace autopos;
using cf::FailureReason;

namespace {

const std::vector<NodePosition> kFixture{{0, 0}, {4, 0}, {2, 3}, {1, 1}};

MeasurementMatrix exact_matrix(const std::vector<NodePosition>& pts) {
  MeasurementMatrix m(0, pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (i != j) m.set(i, j, {euclidean_distance(pts[i], pts[j]), ErrorClass::kLos});
  return m;
}

}  // namespace

TEST(FrameAnchors, WorkedExamples) {
  auto f = cf::place_frame_anchors(4.0, std::sqrt(13.0), std::sqrt(13.0));
  ASSERT_TRUE(f.a2.ok());
  EXPECT_NEAR(f.a2.position->x, 2.0, 1e-12);
  EXPECT_NEAR(f.a2.position->y, 3.0, 1e-12);
  EXPECT_EQ(*f.a1.position, (NodePosition{4.0, 0.0}));

  f = cf::place_frame_anchors(2.0, std::sqrt(2.0), std::sqrt(2.0));
  ASSERT_TRUE(f.a2.ok());
  EXPECT_NEAR(f.a2.position->x, 1.0, 1e-12);
  EXPECT_NEAR(f.a2.position->y, 1.0, 1e-12);

  f = cf::place_frame_anchors(2.0, 5.0, 1.0);
  EXPECT_FALSE(f.a2.ok());
  EXPECT_EQ(f.a2.reason, FailureReason::kNegativeDiscriminant);

  f = cf::place_frame_anchors(0.0, 1.0, 1.0);
  EXPECT_EQ(f.a1.reason, FailureReason::kDegenerateGeometry);
}

TEST(Lse, ExactRangesRecoverTarget) {
  const std::vector<NodePosition> anchors{{0, 0}, {4, 0}, {2, 3}};
  std::vector<double> r;
  for (const auto& a : anchors) r.push_back(euclidean_distance(a, {1, 1}));
  const auto p = cf::trilaterate_lse(std::span<const NodePosition>(anchors), std::span<const double>(r));
  ASSERT_TRUE(p.ok());
  EXPECT_NEAR(p.position->x, 1.0, 1e-6);
  EXPECT_NEAR(p.position->y, 1.0, 1e-6);
}

TEST(Lse, PerturbedRangesMatchGridSearchOracle) {
  const std::vector<NodePosition> anchors{{0, 0}, {4, 0}, {2, 3}};
  std::vector<double> r;
  for (const auto& a : anchors) r.push_back(euclidean_distance(a, {1, 1}) + 0.1);
  const auto p = cf::trilaterate_lse(std::span<const NodePosition>(anchors), std::span<const double>(r));
  ASSERT_TRUE(p.ok());

  std::vector<oracle::Point> oa;
  for (const auto& a : anchors) oa.push_back({a.x, a.y});
  const auto coarse = oracle::lse_grid_search(oa, r, -1.0, 3.0, -1.0, 3.0, 0.01);
  const auto fine = oracle::lse_grid_search(oa, r, coarse.x - 0.02, coarse.x + 0.02, coarse.y - 0.02,
                                            coarse.y + 0.02, 0.001);
  EXPECT_NEAR(p.position->x, fine.x, 1e-3);
  EXPECT_NEAR(p.position->y, fine.y, 1e-3);
}

TEST(Lse, TwoRangesAreInsufficient) {
  const std::vector<NodePosition> anchors{{0, 0}, {4, 0}};
  const std::vector<double> r{1.0, 3.0};
  const auto p = cf::trilaterate_lse(std::span<const NodePosition>(anchors), std::span<const double>(r));
  EXPECT_FALSE(p.ok());
  EXPECT_EQ(p.reason, FailureReason::kInsufficientRanges);
}

TEST(CfAutoposition, NoiseFreeFixtureIsExact) {
  const auto res = cf::cf_autoposition(exact_matrix(kFixture));
  ASSERT_TRUE(res.success());
  for (std::size_t i = 0; i < kFixture.size(); ++i) {
    EXPECT_NEAR(res.estimates[i].position.x, kFixture[i].x, 1e-9) << i;
    EXPECT_NEAR(res.estimates[i].position.y, kFixture[i].y, 1e-9) << i;
  }
  EXPECT_EQ(res.failure_reason(), FailureReason::kNone);
}

TEST(CfAutoposition, MissingFrameRangeFailsEverything) {
  auto m = exact_matrix(kFixture);
  m.set(0, 1, RangeDraw::failed());
  m.set(1, 0, RangeDraw::failed());
  const auto res = cf::cf_autoposition(m);
  EXPECT_FALSE(res.success());
  EXPECT_EQ(res.failure_reason(), FailureReason::kMissingRange);
  for (const auto& e : res.estimates) EXPECT_FALSE(e.valid);
}

TEST(CfAutoposition, OneDirectionSuffices) {
  auto m = exact_matrix(kFixture);
  m.set(0, 1, RangeDraw::failed());
  EXPECT_TRUE(cf::cf_autoposition(m).success());
}

TEST(CfAutoposition, NodeWithoutFrameRangeFails) {
  auto m = exact_matrix(kFixture);
  m.set(1, 3, RangeDraw::failed());
  m.set(3, 1, RangeDraw::failed());
  const auto res = cf::cf_autoposition(m);
  EXPECT_FALSE(res.success());
  EXPECT_FALSE(res.estimates[3].valid);
  EXPECT_EQ(res.reasons[3], FailureReason::kMissingRange);
  EXPECT_TRUE(res.estimates[2].valid);
}

TEST(CfAutoposition, DirectionSwapInvariance) {
  RangingModelParams p;
  p.seed = 17;
  const Constellation c(std::vector<NodePosition>{{0, 0}, {9, 0.5}, {4, 7}, {2, 2}, {7, 3}});
  for (std::size_t t = 0; t < 50; ++t) {
    const auto m = simulate_epoch(c, p, t);
    MeasurementMatrix swapped(t, c.size());
    m.for_each([&](const RangingMeasurement& r) { swapped.set(r.to.index, r.from.index, r.value); });
    const auto a = cf::cf_autoposition(m);
    const auto b = cf::cf_autoposition(swapped);
    ASSERT_EQ(a.success(), b.success());
    for (std::size_t i = 0; i < c.size(); ++i) {
      ASSERT_EQ(a.estimates[i].valid, b.estimates[i].valid);
      if (a.estimates[i].valid) {
        EXPECT_NEAR(a.estimates[i].position.x, b.estimates[i].position.x, 1e-9);
        EXPECT_NEAR(a.estimates[i].position.y, b.estimates[i].position.y, 1e-9);
      }
    }
  }
}

TEST(CfAutoposition, SuccessIsMonotoneInFailures) {
  // Knocking out more measurements never turns a failed node into a success.
  RangingModelParams p;
  p.seed = 23;
  p.failures_enabled = false;
  p.nlos_enabled = false;
  const Constellation c(std::vector<NodePosition>{{0, 0}, {9, 0.5}, {4, 7}, {2, 2}, {7, 3}, {1, 6}});
  std::mt19937_64 rng(4);
  for (std::size_t t = 0; t < 40; ++t) {
    auto m = simulate_epoch(c, p, t);
    auto prev = cf::cf_autoposition(m);
    for (int k = 0; k < 12; ++k) {
      const std::size_t i = rng() % c.size();
      std::size_t j = rng() % c.size();
      if (i == j) j = (j + 1) % c.size();
      m.set(i, j, RangeDraw::failed());
      const auto next = cf::cf_autoposition(m);
      EXPECT_LE(next.success(), prev.success());
      prev = next;
    }
  }
}
