#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cavsim/error.hpp"
#include "cavsim/trajectory.hpp"

using namespace cavsim;

namespace {

constexpr double kDt = 0.1;
constexpr double kEps = 1e-9;

// Max |accel| and |jerk| by finite differences over a speed trace, with the
// trace assumed at rest (zero acceleration) just before its first sample.
std::pair<double, double> finite_differences(double before, const std::vector<double>& v) {
  double prev_v = before, prev_a = 0.0, max_a = 0.0, max_j = 0.0;
  for (double s : v) {
    const double a = (s - prev_v) / kDt;
    max_a = std::max(max_a, std::abs(a));
    max_j = std::max(max_j, std::abs(a - prev_a) / kDt);
    prev_v = s;
    prev_a = a;
  }
  max_j = std::max(max_j, std::abs(prev_a) / kDt);  // back to rest after the last sample
  return {max_a, max_j};
}

SpeedSeries constant(std::int64_t id, double v, std::size_t n) {
  return {id, std::vector<double>(n, v)};
}

}  // namespace

TEST(Parse, EmptyAndTwoRows) {
  std::istringstream empty("");
  EXPECT_TRUE(parse_trajectories(empty).empty());
  std::istringstream header_only("vehicle_id,frame,lane,local_y_m,speed_mps\n");
  EXPECT_TRUE(parse_trajectories(header_only).empty());

  std::istringstream two(
      "vehicle_id,frame,lane,local_y_m,speed_mps\n"
      "7,100,2,10.5,12.25\n"
      "7,101,2,11.75,12.5\n");
  const auto recs = parse_trajectories(two);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1], (TrajectoryRecord{7, 101, 2, 11.75, 12.5}));

  std::ostringstream out;
  write_trajectories(out, recs);
  std::istringstream back(out.str());
  EXPECT_EQ(parse_trajectories(back), recs);
}

TEST(Parse, GroupsByVehicleAndSortsFrames) {
  std::istringstream in(
      "vehicle_id,frame,lane,local_y_m,speed_mps\n"
      "2,11,1,0,1\n"
      "1,5,1,0,1\n"
      "2,10,1,0,1\n");
  const auto recs = parse_trajectories(in);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].vehicle_id, 2);
  EXPECT_EQ(recs[0].frame, 10);
  EXPECT_EQ(recs[1].frame, 11);
  EXPECT_EQ(recs[2].vehicle_id, 1);
}

TEST(Parse, RejectsBadRowsWithLocation) {
  std::istringstream neg(
      "vehicle_id,frame,lane,local_y_m,speed_mps\n"
      "1,1,1,0,5\n"
      "1,2,1,0,-0.5\n");
  try {
    parse_trajectories(neg);
    FAIL() << "negative speed accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), "speed_mps");
  }
  std::istringstream text(
      "vehicle_id,frame,lane,local_y_m,speed_mps\n"
      "1,x,1,0,5\n");
  try {
    parse_trajectories(text);
    FAIL() << "non-numeric frame accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), "frame");
  }
  std::istringstream missing("vehicle_id,frame,lane,speed_mps\n1,1,1,5\n");
  EXPECT_THROW(parse_trajectories(missing), ParseError);
  std::istringstream gap(
      "vehicle_id,frame,lane,local_y_m,speed_mps\n"
      "1,1,1,0,5\n"
      "1,3,1,0,5\n");
  EXPECT_THROW(parse_trajectories(gap), ParseError);
}

TEST(Parse, NgsimLayoutConvertsFeet) {
  std::istringstream in(
      "Vehicle_ID,Frame_ID,Total_Frames,Lane_ID,Local_Y,v_Vel\n"
      "3,1,2,4,100,50\n"
      "3,2,2,4,105,50\n");
  const auto recs = parse_ngsim(in);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].lane, 4);
  EXPECT_DOUBLE_EQ(recs[0].position, 30.48);
  EXPECT_DOUBLE_EQ(recs[0].speed, 50 * 0.3048);
}

TEST(LaneKeepers, DropsChangersAndOrdersByEntry) {
  std::vector<TrajectoryRecord> recs{
      {1, 20, 2, 0, 1}, {1, 21, 2, 0, 1}, {1, 22, 2, 0, 1},
      {2, 5, 2, 0, 1},  {2, 6, 3, 0, 1},
      {3, 10, 1, 0, 1}, {3, 11, 1, 0, 1}};
  const auto kept = filter_lane_keepers(recs);
  ASSERT_EQ(kept.size(), 5u);
  EXPECT_EQ(kept.front().vehicle_id, 3);
  EXPECT_EQ(kept.back().vehicle_id, 1);
  for (const auto& r : kept) EXPECT_NE(r.vehicle_id, 2);

  const auto series = speed_series(kept);
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0].source, 3);
  EXPECT_EQ(series[1].speed.size(), 3u);
  EXPECT_EQ(speed_series(kept, 2).size(), 1u);
  EXPECT_EQ(speed_series(kept, -1, 21, 21).front().speed.size(), 1u);
}

TEST(Bridge, EmptyForEqualSpeeds) { EXPECT_TRUE(bridge(12.0, 12.0, kDt, {}).empty()); }

TEST(Bridge, TwoMetersPerSecondTakesAboutTenSeconds) {
  const auto b = bridge(10.0, 12.0, kDt, {});
  ASSERT_FALSE(b.empty());
  EXPECT_EQ(b.back(), 12.0);
  const double seconds = kDt * static_cast<double>(b.size());
  EXPECT_GE(seconds, 10.0);
  EXPECT_LE(seconds, 12.0);
  const auto [a, j] = finite_differences(10.0, b);
  EXPECT_LE(a, 0.2 + kEps);
  EXPECT_LE(j, 0.2 + kEps);
}

TEST(Bridge, RespectsCapsBothDirectionsAndSizes) {
  for (double delta : {-5.0, -1.3, -0.01, 0.004, 0.37, 1.0, 7.5}) {
    const auto b = bridge(15.0, 15.0 + delta, kDt, {});
    const auto [a, j] = finite_differences(15.0, b);
    EXPECT_LE(a, 0.2 + kEps) << delta;
    EXPECT_LE(j, 0.2 + kEps) << delta;
    EXPECT_EQ(b.back(), 15.0 + delta);
  }
  EXPECT_THROW(bridge(1.0, 2.0, 0.0, {}), ConfigError);
}

TEST(Extend, IdenticalJoinSpeedsNeedNoBridge) {
  const auto p = extend_profile({constant(1, 14.0, 300), constant(2, 14.0, 300)}, 60.0);
  EXPECT_EQ(p.size(), 600u);
  EXPECT_DOUBLE_EQ(p.source_fraction(), 1.0);
  EXPECT_EQ(p.tag[299], 1);
  EXPECT_EQ(p.tag[300], 2);
}

TEST(Extend, CropsToToleranceWindowAndBridges) {
  std::vector<double> ramp;
  for (int k = 0; k <= 100; ++k) ramp.push_back(10.0 + 0.1 * k);  // 10 .. 20
  const auto p = extend_profile({constant(1, 13.5, 50), {2, ramp}}, 30.0);
  // First sample of series 2 within 1 m/s of 13.5 is 12.5 (k = 25), the last is 14.5 (k = 45).
  std::size_t first = 0;
  while (p.tag[first] != 2) ++first;
  EXPECT_NEAR(p.speed[first], 12.5, 1e-9);
  std::size_t count = 0;
  for (std::size_t k = first; k < p.size() && p.tag[k] == 2; ++k) ++count;
  EXPECT_EQ(count, 21u);
  for (std::size_t k = 50; k < first; ++k) EXPECT_EQ(p.tag[k], kBridgeTag);
  EXPECT_EQ(p.size(), 300u);
}

TEST(Extend, BridgeSamplesRespectCaps) {
  std::vector<SpeedSeries> src;
  for (int i = 0; i < 6; ++i) {
    auto s = synthesize_profile(90.0, kDt, 40 + i);
    src.push_back({i + 1, s.speed});
  }
  const auto p = extend_profile(src, 1500.0);
  EXPECT_EQ(p.size(), 15000u);
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (p.tag[k] != kBridgeTag) continue;
    EXPECT_LE(std::abs(p.speed[k] - p.speed[k - 1]), 0.2 * kDt + kEps) << k;
  }
}

TEST(Extend, MostSamplesComeFromSourceData) {
  std::vector<SpeedSeries> src;
  for (int i = 0; i < 5; ++i) src.push_back({i + 1, synthesize_profile(120.0, kDt, 7 + i).speed});
  const auto p = extend_profile(src, 1200.0);
  EXPECT_GE(p.source_fraction(), 0.8);
}

TEST(Extend, Errors) {
  EXPECT_THROW(extend_profile({constant(1, 10.0, 10)}, 10.0), ExtensionError);
  EXPECT_THROW(extend_profile({constant(1, 10.0, 10), constant(2, 20.0, 10)}, 10.0),
               ExtensionError);
}

TEST(Synthetic, DeterministicAndSized) {
  const auto a = synthesize_profile(1200.0, kDt, 99);
  const auto b = synthesize_profile(1200.0, kDt, 99);
  EXPECT_EQ(a.speed, b.speed);
  EXPECT_EQ(a.size(), 12000u);
  EXPECT_NE(synthesize_profile(1200.0, kDt, 100).speed, a.speed);
  for (double v : a.speed) {
    EXPECT_GE(v, 5.0);
    EXPECT_LE(v, 25.0);
  }
  SyntheticProfileParams flat;
  flat.speed_spread = 0.0;
  const auto c = synthesize_profile(100.0, kDt, 1, flat);
  for (double v : c.speed) EXPECT_EQ(v, 15.0);
}
