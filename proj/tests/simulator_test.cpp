#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "autopos/config.hpp"
#include "autopos/simulator.hpp"
#include "oracles.hpp"

using namespace autopos;

namespace {

ScenarioConfig bundled(const char* name) {
  return load_scenario(std::filesystem::path(AUTOPOS_CONFIG_DIR) / name);
}

std::vector<MeasurementMatrix> simulate(const ScenarioConfig& cfg, std::size_t epochs) {
  std::vector<MeasurementMatrix> out;
  out.reserve(epochs);
  for (std::size_t t = 0; t < epochs; ++t) out.push_back(simulate_epoch(cfg.constellation, cfg.params, t));
  return out;
}

}  // namespace

TEST(ErrorBranch, ForcedDrawEntersMultipath) {
  RangingModelParams p;
  p.d_max = 100.0;
  EXPECT_DOUBLE_EQ(multipath_threshold(50.0, 100.0), 0.65);
  // 0.70 > 0.65 so the multipath branch is tested; a short draw makes it NLOS.
  EXPECT_EQ(select_error_branch(50.0, p, 0.70, 3.0), ErrorClass::kNlos);
  // A draw beyond the true distance falls through.
  EXPECT_EQ(select_error_branch(50.0, p, 0.70, 60.0), ErrorClass::kLos);
  EXPECT_EQ(select_error_branch(50.0, p, 0.60, 3.0), ErrorClass::kLos);
  p.p_out = 0.75;
  EXPECT_EQ(select_error_branch(50.0, p, 0.70, 60.0), ErrorClass::kOutlier);
  EXPECT_EQ(select_error_branch(50.0, p, 0.70, 3.0), ErrorClass::kNlos);
}

TEST(DrawMeasurement, MaximumRangeAlwaysFails) {
  RangingModelParams p;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(draw_measurement(100.0, p, rng).is_failed());
  }
  EXPECT_THROW(draw_measurement(0.0, p, rng), std::invalid_argument);
}

TEST(DrawMeasurement, ScenarioOneIsGaussianOnly) {
  RangingModelParams p;
  p.nlos_enabled = false;
  p.failures_enabled = false;
  std::mt19937_64 rng(3);
  const double d = 20.0;
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto r = draw_measurement(d, p, rng);
    ASSERT_EQ(r.error_class, ErrorClass::kLos);
    const double e = *r.range - d;
    sum += e;
    sq += e * e;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 4.0 * 0.9 / std::sqrt(n));
  EXPECT_NEAR(sd, 0.9, 0.01);
}

TEST(DrawMeasurement, FailureRateMatchesDistanceRatio) {
  RangingModelParams p;
  std::mt19937_64 rng(11);
  for (double d : {10.0, 40.0, 75.0}) {
    int failed = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) failed += draw_measurement(d, p, rng).is_failed() ? 1 : 0;
    EXPECT_NEAR(static_cast<double>(failed) / n, d / p.d_max, 0.01) << "d = " << d;
  }
}

TEST(DrawMeasurement, RangesNeverNegative) {
  RangingModelParams p;
  p.p_out = 0.5;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20000; ++i) {
    const auto r = draw_measurement(0.5, p, rng);
    if (r.range) {
      EXPECT_GE(*r.range, 0.0);
    }
  }
}

TEST(SimulateEpoch, EntryCountAndDeterminism) {
  const Constellation c(std::vector<NodePosition>{{0, 0}, {4, 0}, {2, 3}});
  RangingModelParams p;
  p.seed = 99;
  const auto a = simulate_epoch(c, p, 4);
  std::size_t entries = 0;
  a.for_each([&](const RangingMeasurement&) { ++entries; });
  EXPECT_EQ(entries, 6u);

  const auto b = simulate_epoch(c, p, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      EXPECT_EQ(a.at(i, j)->value.range, b.at(i, j)->value.range);
      EXPECT_EQ(a.at(i, j)->value.error_class, b.at(i, j)->value.error_class);
    }
  }
  const auto other = simulate_epoch(c, p, 5);
  bool differs = false;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j && a.at(i, j)->value.range != other.at(i, j)->value.range) differs = true;
  EXPECT_TRUE(differs);
}

TEST(SimulateEpoch, BundledScenarioAttemptCount) {
  const auto cfg = bundled("scenario2.yaml");
  ASSERT_EQ(cfg.constellation.size(), 13u);
  const auto m = simulate(cfg, 10);
  EXPECT_EQ(summarize(m).attempted, 13u * 12u * 10u);
}

TEST(Summarize, AllLosAndEmptyInput) {
  MeasurementMatrix m(0, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) m.set(i, j, {1.0, ErrorClass::kLos});
  const std::vector<MeasurementMatrix> one{m};
  const auto s = summarize(one);
  EXPECT_EQ(s.los, 1.0);
  EXPECT_EQ(s.nlos + s.outlier + s.failed, 0.0);
  EXPECT_THROW(summarize(std::span<const MeasurementMatrix>{}), std::invalid_argument);
}

TEST(Summarize, MatchesAnalyticOracleOnEveryBundledScenario) {
  for (const char* name : {"scenario1.yaml", "scenario2.yaml", "scenario3.yaml"}) {
    const auto cfg = bundled(name);
    const auto& p = cfg.params;
    const auto s = summarize(simulate(cfg, 700));  // 109,200 draws
    const auto o = oracle::expected_fractions(cfg.constellation.positions(), p.d_max, p.p_out, p.mp_mean,
                                              p.mp_sigma, p.nlos_enabled, p.failures_enabled);
    EXPECT_NEAR(s.los, o.los, 0.02) << name;
    EXPECT_NEAR(s.nlos, o.nlos, 0.02) << name;
    EXPECT_NEAR(s.outlier, o.outlier, 0.02) << name;
    EXPECT_NEAR(s.failed, o.failed, 0.02) << name;
  }
}

TEST(Summarize, OracleSanityForSinglePair) {
  // Hand-evaluated: d = 50, d_max = 100, p_out = 0.07, LN(0.8, 1.07).
  const auto f = oracle::pair_class_probabilities(50.0, 100.0, 0.07, 0.8, 1.07, true, true);
  EXPECT_NEAR(f.failed, 0.5, 1e-15);
  EXPECT_NEAR(f.los + f.nlos + f.outlier + f.failed, 1.0, 1e-15);
  const double p_short = 0.5 * std::erfc(-((std::log(50.0) - 0.8) / 1.07) / std::sqrt(2.0));
  EXPECT_NEAR(f.nlos, 0.5 * 0.35 * p_short, 1e-15);
  EXPECT_NEAR(f.outlier, 0.5 * 0.07, 1e-15);
}
