#pragma once

#include <optional>
#include <vector>

#include "cavsim/core.hpp"

namespace cavsim {

struct LaneNeighbors {
  std::optional<VehicleId> leader;
  std::optional<VehicleId> follower;
};

/// Snapshot of every vehicle on the segment plus per-lane front-to-back
/// orderings. Call reindex() after positions or lanes change.
class World {
 public:
  World(int n_lanes, double vehicle_length);

  /// Appends a vehicle and returns its id (dense, in insertion order).
  VehicleId add(const VehicleState& state);

  std::size_t size() const noexcept { return states_.size(); }
  int lane_count() const noexcept { return n_lanes_; }
  double vehicle_length() const noexcept { return vehicle_length_; }

  const VehicleState& state(VehicleId id) const;
  VehicleState& mutable_state(VehicleId id);
  const std::vector<VehicleState>& states() const noexcept { return states_; }
  std::vector<VehicleState>& mutable_states() noexcept { return states_; }

  /// Rebuilds lane orderings. Throws StateError when two vehicles in a lane
  /// share a position or a lane index is out of range.
  void reindex();

  /// Vehicles in the lane, front (largest position) first.
  const std::vector<VehicleId>& lane(int lane) const;

  std::optional<VehicleId> first_preceding(VehicleId id) const;
  std::optional<VehicleId> second_preceding(VehicleId id) const;

  /// Nearest vehicles strictly ahead of / behind the ego's position in the
  /// adjacent lane. Both empty when that lane does not exist.
  LaneNeighbors adjacent_lane_neighbors(VehicleId id, Side side) const;

  /// Nearest vehicles strictly ahead of / behind `position` in `lane`,
  /// ignoring `exclude`.
  LaneNeighbors neighbors_at(int lane, double position,
                             std::optional<VehicleId> exclude = std::nullopt) const;

  /// Bumper-to-bumper gap from follower to leader (leader.x - length - follower.x).
  double gap(VehicleId follower, VehicleId leader) const;

 private:
  void check(VehicleId id) const;

  int n_lanes_;
  double vehicle_length_;
  std::vector<VehicleState> states_;
  std::vector<std::vector<VehicleId>> lanes_;
  std::vector<std::size_t> rank_;  // index of each vehicle within its lane list
};

}  // namespace cavsim
