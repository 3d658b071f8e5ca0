#include "prbcount/core.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace prbcount;

TEST(FrameOf, BoundaryTimestamps) {
  const FrameSpec spec{0, 60};
  // The frame's nominal timestamp belongs to it; one second later is next.
  EXPECT_EQ(frame_of(60, spec), 1);
  EXPECT_EQ(frame_of(61, spec), 2);
  EXPECT_EQ(frame_of(120, spec), 2);
  EXPECT_EQ(frame_of(1, spec), 1);
  EXPECT_EQ(frame_of(0, spec), 0);
  EXPECT_EQ(frame_of(-1, spec), 0);
  EXPECT_EQ(frame_of(-60, spec), -1);
}

TEST(FrameOf, NonzeroEpoch) {
  const FrameSpec spec{1000, 10};
  EXPECT_EQ(frame_of(1000, spec), 0);
  EXPECT_EQ(frame_of(1001, spec), 1);
  EXPECT_EQ(frame_of(1010, spec), 1);
  EXPECT_EQ(frame_of(1011, spec), 2);
}

TEST(FrameOf, PartitionsTimestampRange) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const FrameSpec spec{static_cast<std::int64_t>(rng() % 100000) - 50000,
                         static_cast<std::int32_t>(1 + rng() % 600)};
    std::int64_t prev_frame = 0;
    bool first = true;
    for (int i = 0; i < 1000; ++i) {
      const std::int64_t ts = spec.epoch - 2000 + i;
      const std::int64_t k = frame_of(ts, spec);
      const TimeFrame frame = frame_at(spec, k);
      ASSERT_TRUE(frame.contains(ts)) << "ts " << ts << " not inside its frame";
      ASSERT_EQ(frame.last_ts - frame.first_ts + 1, spec.duration);
      if (!first) {
        // No gaps, no overlaps: consecutive timestamps share a frame or move
        // to the immediately following one.
        ASSERT_TRUE(k == prev_frame || k == prev_frame + 1);
      }
      first = false;
      prev_frame = k;
    }
  }
}

TEST(FrameOf, RejectsNonPositiveDuration) {
  EXPECT_THROW(frame_of(0, FrameSpec{0, 0}), std::invalid_argument);
  EXPECT_THROW(frame_at(FrameSpec{0, -60}, 1), std::invalid_argument);
}

TEST(MeanTxProbability, PaperExample) {
  // Single smartphone configuration transmitting every third frame.
  const PopulationSpec spec{10, {{1.0 / 3.0, 1.0}}};
  EXPECT_DOUBLE_EQ(mean_tx_probability(spec), 1.0 / 3.0);
}

TEST(MeanTxProbability, TwoPointMixture) {
  const PopulationSpec spec{10, {{0.0, 0.5}, {1.0, 0.5}}};
  EXPECT_DOUBLE_EQ(mean_tx_probability(spec), 0.5);
}

TEST(MeanTxProbability, HandComputedMixture) {
  const PopulationSpec spec{10, {{0.0, 0.3}, {0.2, 0.4}, {0.5, 0.3}}};
  EXPECT_NEAR(mean_tx_probability(spec), 0.23, 1e-15);
}

TEST(MeanTxProbability, LinearInWeightsMonotoneInAlpha) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double a1 = static_cast<double>(rng() % 1000) / 2000.0;        // [0, 0.5)
    const double a2 = 0.5 + static_cast<double>(rng() % 1000) / 2000.0;  // [0.5, 1)
    const double w = static_cast<double>(rng() % 1001) / 1000.0;
    const PopulationSpec spec{5, {{a1, w}, {a2, 1.0 - w}}};
    const double p = mean_tx_probability(spec);
    EXPECT_NEAR(p, a1 * w + a2 * (1.0 - w), 1e-12);
    // Raising any alpha raises p.
    const PopulationSpec raised{5, {{a1 + 1e-3, w}, {a2 + 1e-3, 1.0 - w}}};
    EXPECT_GT(mean_tx_probability(raised), p - 1e-15);
  }
}

TEST(PopulationSpec, Validation) {
  EXPECT_THROW((PopulationSpec{0, {{0.5, 1.0}}}).validate(), std::invalid_argument);
  EXPECT_THROW((PopulationSpec{5, {}}).validate(), std::invalid_argument);
  EXPECT_THROW((PopulationSpec{5, {{0.5, 0.6}}}).validate(), std::invalid_argument);
  EXPECT_THROW((PopulationSpec{5, {{0.5, 0.5}, {0.5, 0.5}}}).validate(),
               std::invalid_argument);  // duplicate alpha
  EXPECT_THROW((PopulationSpec{5, {{0.7, 0.5}, {0.2, 0.5}}}).validate(),
               std::invalid_argument);  // not ascending
  EXPECT_THROW((PopulationSpec{5, {{1.5, 1.0}}}).validate(), std::invalid_argument);
  EXPECT_NO_THROW((PopulationSpec{5, {{0.2, 0.5}, {0.7, 0.5}}}).validate());
}

TEST(SensorConfig, ThresholdMustReachDetectionFloor) {
  SensorConfig s;
  s.rssi_lower_bound = -90;
  s.rx.detection_floor_dbm = -85;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.rssi_lower_bound = -85;
  EXPECT_NO_THROW(s.validate());
}

TEST(RawMac, Formatting) {
  const RawMac mac{{0x00, 0x11, 0x22, 0x33, 0x44, 0x55}};
  EXPECT_EQ(mac.to_string(), "00:11:22:33:44:55");
  EXPECT_FALSE(mac.locally_administered());
  const RawMac local{{0x02, 0, 0, 0, 0, 0}};
  EXPECT_TRUE(local.locally_administered());
  EXPECT_TRUE(local.unicast());
}
