#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "cavsim/core.hpp"
#include "cavsim/human_driver.hpp"
#include "cavsim/world.hpp"

namespace cavsim {

struct MobilParams {
  double b_safe = -4.0;          // m/s^2, lowest acceptable new-follower accel
  double politeness = 0.5;
  double threshold = 0.1;        // m/s^2
  double cooldown = 10.0;        // s between changes of one vehicle
  double platoon_weight = 0.2;   // m/s^2 per platoon member in the benefit

  void validate() const;
};

/// IDM accelerations before (a, a_n, a_o) and after (tilde) a prospective
/// move. n is the new follower, o the old follower; absent when missing.
struct PredictedAccels {
  bool feasible = true;  // false when the move would overlap a neighbor
  double a = 0.0;
  double a_tilde = 0.0;
  std::optional<double> a_n;
  std::optional<double> a_n_tilde;
  std::optional<double> a_o;
  std::optional<double> a_o_tilde;
};

/// Evaluated on the current snapshot. idm[i] holds the car-following
/// parameters of vehicle i, used for every prediction involving it.
PredictedAccels predicted_accels(const World& world, VehicleId ego, Side side,
                                 std::span<const HumanParams> idm);

/// a_n_tilde > b_safe; vacuously true without a new follower.
bool mobil_safety(std::optional<double> a_n_tilde, const MobilParams& p);

struct Incentive {
  double value;
  bool passes;
};

/// a_tilde - a + p (a_n_tilde - a_n + a_o_tilde - a_o) against the threshold.
/// Missing follower terms contribute zero.
Incentive mobil_incentive(const PredictedAccels& acc, const MobilParams& p);

/// Run length of leading `true` entries.
int platoon_size(std::span<const bool> chain);

enum class LaneChoice : std::uint8_t { kStay, kLeft, kRight };

std::string_view to_string(LaneChoice c) noexcept;

/// What the ego knows about one adjacent lane.
struct SideOption {
  bool exists = false;          // lane exists and has a leader ahead
  bool leader_connected = false;
  int platoon = 0;
  PredictedAccels accels;
};

/// Platoon-seeking decision. Only moves when the current leader is not known
/// to be connected and the target lane's leader is; the side with the
/// larger benefit wins, ties go left.
LaneChoice lc_decide(bool current_connected, const SideOption& left,
                     const SideOption& right, const MobilParams& p);

/// Benefit of a side, or nullopt when it is not a valid candidate.
std::optional<double> lc_benefit(const SideOption& side, const MobilParams& p);

}  // namespace cavsim
