#include "cavsim/lane_change.hpp"

#include <cmath>
#include <limits>

#include "cavsim/error.hpp"

namespace cavsim {

namespace {

constexpr double kFree = std::numeric_limits<double>::infinity();

// IDM acceleration of `follower` behind `leader` (free road when absent).
// Returns nullopt when the gap is not positive.
std::optional<double> follow_accel(const World& w, VehicleId follower,
                                   std::optional<VehicleId> leader,
                                   std::span<const HumanParams> idm) {
  const VehicleState& f = w.state(follower);
  const HumanParams& p = idm[follower.index()];
  if (!leader) return idm_accel(f.speed, kFree, 0.0, p);
  const double gap = w.gap(follower, *leader);
  if (!(gap > 0.0)) return std::nullopt;
  return idm_accel(f.speed, gap, f.speed - w.state(*leader).speed, p);
}

// Same, with the follower virtually placed at `position`.
std::optional<double> follow_accel_at(const World& w, double position, double speed,
                                      const HumanParams& p,
                                      std::optional<VehicleId> leader) {
  if (!leader) return idm_accel(speed, kFree, 0.0, p);
  const double gap = w.state(*leader).position - w.vehicle_length() - position;
  if (!(gap > 0.0)) return std::nullopt;
  return idm_accel(speed, gap, speed - w.state(*leader).speed, p);
}

}  // namespace

void MobilParams::validate() const {
  if (!(b_safe < 0.0)) throw ConfigError("mobil b_safe must be negative");
  if (!(politeness >= 0.0)) throw ConfigError("mobil politeness must be non-negative");
  if (!(threshold >= 0.0)) throw ConfigError("mobil threshold must be non-negative");
  if (!(cooldown >= 0.0)) throw ConfigError("mobil cooldown must be non-negative");
  if (!(platoon_weight >= 0.0)) throw ConfigError("platoon weight must be non-negative");
}

PredictedAccels predicted_accels(const World& world, VehicleId ego, Side side,
                                 std::span<const HumanParams> idm) {
  if (idm.size() < world.size()) throw ConfigError("predicted_accels: idm table too short");
  PredictedAccels out;
  const VehicleState& e = world.state(ego);
  const int target_lane = e.lane + lane_offset(side);
  if (target_lane < 0 || target_lane >= world.lane_count())
    throw LookupError("predicted_accels: no lane on that side");

  const auto old_leader = world.first_preceding(ego);
  const LaneNeighbors old_lane = world.neighbors_at(e.lane, e.position, ego);
  const LaneNeighbors target = world.adjacent_lane_neighbors(ego, side);

  // Ego before and after.
  const auto a = follow_accel(world, ego, old_leader, idm);
  const auto a_tilde = follow_accel_at(world, e.position, e.speed, idm[ego.index()],
                                       target.leader);
  if (!a || !a_tilde) {
    out.feasible = false;
    return out;
  }
  out.a = *a;
  out.a_tilde = *a_tilde;

  // New follower: behind its current leader, then behind the ego.
  if (target.follower) {
    const VehicleState& n = world.state(*target.follower);
    const double gap_tilde = e.position - world.vehicle_length() - n.position;
    if (!(gap_tilde > 0.0)) {
      out.feasible = false;
      return out;
    }
    out.a_n = follow_accel(world, *target.follower, target.leader, idm);
    out.a_n_tilde = idm_accel(n.speed, gap_tilde, n.speed - e.speed,
                              idm[target.follower->index()]);
    if (!out.a_n) {
      out.feasible = false;
      return out;
    }
  }

  // Old follower: behind the ego, then behind the ego's leader.
  if (old_lane.follower) {
    out.a_o = follow_accel(world, *old_lane.follower, ego, idm);
    out.a_o_tilde = follow_accel(world, *old_lane.follower, old_leader, idm);
    if (!out.a_o || !out.a_o_tilde) {
      out.a_o.reset();
      out.a_o_tilde.reset();
    }
  }
  return out;
}

bool mobil_safety(std::optional<double> a_n_tilde, const MobilParams& p) {
  return !a_n_tilde || *a_n_tilde > p.b_safe;
}

Incentive mobil_incentive(const PredictedAccels& acc, const MobilParams& p) {
  double others = 0.0;
  if (acc.a_n && acc.a_n_tilde) others += *acc.a_n_tilde - *acc.a_n;
  if (acc.a_o && acc.a_o_tilde) others += *acc.a_o_tilde - *acc.a_o;
  const double value = acc.a_tilde - acc.a + p.politeness * others;
  return {value, value > p.threshold};
}

int platoon_size(std::span<const bool> chain) {
  int n = 0;
  for (bool c : chain) {
    if (!c) break;
    ++n;
  }
  return n;
}

std::string_view to_string(LaneChoice c) noexcept {
  switch (c) {
    case LaneChoice::kStay: return "stay";
    case LaneChoice::kLeft: return "left";
    case LaneChoice::kRight: return "right";
  }
  return "?";
}

std::optional<double> lc_benefit(const SideOption& side, const MobilParams& p) {
  if (!side.exists || !side.leader_connected || !side.accels.feasible) return std::nullopt;
  if (!mobil_safety(side.accels.a_n_tilde, p)) return std::nullopt;
  const Incentive inc = mobil_incentive(side.accels, p);
  if (!inc.passes) return std::nullopt;
  return inc.value + p.platoon_weight * side.platoon;
}

LaneChoice lc_decide(bool current_connected, const SideOption& left,
                     const SideOption& right, const MobilParams& p) {
  if (current_connected) return LaneChoice::kStay;
  const auto bl = lc_benefit(left, p);
  const auto br = lc_benefit(right, p);
  if (bl && (!br || *bl >= *br)) return LaneChoice::kLeft;
  if (br) return LaneChoice::kRight;
  return LaneChoice::kStay;
}

}  // namespace cavsim
