#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "cavsim/core.hpp"
#include "cavsim/csv.hpp"
#include "cavsim/error.hpp"
#include "cavsim/fleet.hpp"
#include "cavsim/rng.hpp"
#include "cavsim/world.hpp"

using namespace cavsim;

namespace {

std::map<VehicleClass, std::size_t> counts(const std::vector<VehicleProfile>& fleet) {
  std::map<VehicleClass, std::size_t> out;
  for (const auto& p : fleet) ++out[p.vehicle_class];
  return out;
}

}  // namespace

TEST(Capabilities, ClassFlags) {
  EXPECT_EQ(capabilities_of(VehicleClass::kTHV), Capabilities{});
  EXPECT_EQ(capabilities_of(VehicleClass::kCHV), (Capabilities{true, false, false, false}));
  EXPECT_EQ(capabilities_of(VehicleClass::kAV), (Capabilities{false, true, false, false}));
  EXPECT_EQ(capabilities_of(VehicleClass::kCAV), (Capabilities{true, true, false, false}));
  EXPECT_EQ(capabilities_of(VehicleClass::kCAVu), (Capabilities{true, true, true, false}));
  EXPECT_EQ(capabilities_of(VehicleClass::kCAVuLC), (Capabilities{true, true, true, true}));
}

TEST(Capabilities, NamesRoundTrip) {
  for (auto c : {VehicleClass::kTHV, VehicleClass::kCHV, VehicleClass::kAV, VehicleClass::kCAV,
                 VehicleClass::kCAVu, VehicleClass::kCAVuLC})
    EXPECT_EQ(parse_vehicle_class(to_string(c)), c);
  EXPECT_EQ(parse_vehicle_class("CAVu-LC"), VehicleClass::kCAVuLC);
  EXPECT_THROW(parse_vehicle_class("cav"), ConfigError);
}

TEST(Rng, DeterministicAndSeedSensitive) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    (void)c.normal();
  }
  EXPECT_NE(Rng(42).uniform01(), Rng(43).uniform01());
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
}

TEST(Rng, NormalMoments) {
  Rng r(7);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Rng, BelowIsUniform) {
  Rng r(11);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[r.below(7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

TEST(Fleet, CompositionAtTwentyPercent) {
  FleetComposition c{100, 0.10, 0.10, VehicleClass::kCAV};
  const auto f = counts(compose_fleet(c, 1));
  EXPECT_EQ(f.at(VehicleClass::kCAV), 10u);
  EXPECT_EQ(f.at(VehicleClass::kCHV), 10u);
  EXPECT_EQ(f.at(VehicleClass::kTHV), 80u);
}

TEST(Fleet, AllHuman) {
  FleetComposition c{100, 0.0, 0.0, VehicleClass::kCAV};
  const auto f = counts(compose_fleet(c, 1));
  EXPECT_EQ(f.size(), 1u);
  EXPECT_EQ(f.at(VehicleClass::kTHV), 100u);
}

TEST(Fleet, SeedsChangeOrderNotCounts) {
  FleetComposition c{50, 0.40, 0.40, VehicleClass::kCAVu};
  const auto a = compose_fleet(c, 1), b = compose_fleet(c, 2);
  EXPECT_EQ(counts(a), counts(b));
  EXPECT_EQ(counts(a).at(VehicleClass::kCAVu), 20u);
  EXPECT_EQ(counts(a).at(VehicleClass::kCHV), 20u);
  EXPECT_EQ(counts(a).at(VehicleClass::kTHV), 10u);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].vehicle_class != b[i].vehicle_class;
  EXPECT_TRUE(differs);
  const auto again = compose_fleet(c, 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].vehicle_class, again[i].vehicle_class);
    EXPECT_EQ(a[i].driver.time_headway, again[i].driver.time_headway);
  }
}

TEST(Fleet, ExactFloorCountsExhaustiveSmallN) {
  for (std::size_t n = 0; n <= 60; ++n) {
    for (int pct = 0; pct <= 50; pct += 5) {
      const double f = pct / 100.0;
      FleetComposition c{n, f, f, VehicleClass::kCAV};
      const auto fleet = compose_fleet(c, n * 100 + pct);
      ASSERT_EQ(fleet.size(), n);
      const auto k = static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
      const auto got = counts(fleet);
      const auto get = [&](VehicleClass v) { return got.count(v) ? got.at(v) : 0u; };
      EXPECT_EQ(get(VehicleClass::kCAV), k);
      EXPECT_EQ(get(VehicleClass::kCHV), k);
      EXPECT_EQ(get(VehicleClass::kTHV), n - 2 * k);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(fleet[i].id.value, i);
    }
  }
}

TEST(Fleet, DriverHeadwaysInRange) {
  FleetComposition c{200, 0.0, 0.0, VehicleClass::kCAV};
  for (const auto& p : compose_fleet(c, 3)) {
    EXPECT_GE(p.driver.time_headway, 1.0);
    EXPECT_LE(p.driver.time_headway, 2.0);
  }
}

TEST(Fleet, CompositionErrors) {
  EXPECT_THROW(compose_fleet({10, 0.6, 0.6, VehicleClass::kCAV}, 1), CompositionError);
  EXPECT_THROW(compose_fleet({10, -0.1, 0.0, VehicleClass::kCAV}, 1), CompositionError);
  EXPECT_THROW(compose_fleet({10, 0.1, 0.1, VehicleClass::kCHV}, 1), CompositionError);
}

TEST(World, SingleVehicleHasNoLeader) {
  World w(1, 5.0);
  const auto id = w.add({100, 10, 0, 0});
  w.reindex();
  EXPECT_FALSE(w.first_preceding(id));
  EXPECT_FALSE(w.second_preceding(id));
}

TEST(World, FirstAndSecondPreceding) {
  World w(1, 5.0);
  const auto rear = w.add({100, 10, 0, 0});
  const auto front = w.add({200, 10, 0, 0});
  const auto mid = w.add({150, 10, 0, 0});
  w.reindex();
  EXPECT_EQ(w.first_preceding(rear), mid);
  EXPECT_EQ(w.second_preceding(rear), front);
  EXPECT_EQ(w.first_preceding(mid), front);
  EXPECT_FALSE(w.second_preceding(mid));
  EXPECT_DOUBLE_EQ(w.gap(rear, mid), 45.0);
}

TEST(World, AdjacentLaneNeighbors) {
  World w(2, 5.0);
  const auto ego = w.add({100, 10, 0, 1});
  const auto behind = w.add({90, 10, 0, 0});
  const auto ahead = w.add({130, 10, 0, 0});
  w.reindex();
  const auto n = w.adjacent_lane_neighbors(ego, Side::kLeft);
  EXPECT_EQ(n.leader, ahead);
  EXPECT_EQ(n.follower, behind);
  const auto r = w.adjacent_lane_neighbors(ego, Side::kRight);
  EXPECT_FALSE(r.leader);
  EXPECT_FALSE(r.follower);
}

TEST(World, Errors) {
  World w(2, 5.0);
  EXPECT_THROW(w.state(VehicleId{3}), LookupError);
  w.add({10, 0, 0, 0});
  w.add({10, 0, 0, 0});
  EXPECT_THROW(w.reindex(), StateError);
  World bad(2, 5.0);
  bad.add({10, 0, 0, 2});
  EXPECT_THROW(bad.reindex(), StateError);
}

TEST(World, NeighborQueriesMatchBruteForce) {
  Rng rng(5);
  World w(4, 5.0);
  for (int i = 0; i < 100; ++i)
    w.add({rng.uniform(0, 2000), 10, 0, static_cast<int>(rng.below(4))});
  w.reindex();
  const auto& s = w.states();
  for (std::uint32_t i = 0; i < s.size(); ++i) {
    for (int dl : {-1, 0, 1}) {
      const int lane = s[i].lane + dl;
      std::optional<VehicleId> lead, follow;
      for (std::uint32_t j = 0; j < s.size(); ++j) {
        if (j == i || s[j].lane != lane) continue;
        if (s[j].position > s[i].position &&
            (!lead || s[j].position < s[lead->index()].position))
          lead = VehicleId{j};
        if (s[j].position < s[i].position &&
            (!follow || s[j].position > s[follow->index()].position))
          follow = VehicleId{j};
      }
      if (dl == 0) {
        EXPECT_EQ(w.first_preceding(VehicleId{i}), lead);
      } else if (lane >= 0 && lane < 4) {
        const auto n = w.adjacent_lane_neighbors(VehicleId{i}, dl < 0 ? Side::kLeft : Side::kRight);
        EXPECT_EQ(n.leader, lead);
        EXPECT_EQ(n.follower, follow);
      }
    }
  }
}

TEST(Csv, FormatParseRoundTrip) {
  for (double x : {0.1, -3.25, 1e-300, 123456789.125, 0.0})
    EXPECT_EQ(csv::parse_double(csv::format(x), 1, "x"), x);
  EXPECT_THROW(csv::parse_double("1.5x", 4, "speed"), ParseError);
  try {
    csv::parse_int("abc", 7, "frame");
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 7u);
    EXPECT_EQ(e.column(), "frame");
  }
}

TEST(Csv, RejectsRaggedRows) {
  std::istringstream in("a,b\n1,2\n3\n");
  EXPECT_THROW(csv::read(in), ParseError);
}
