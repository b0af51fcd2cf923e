#include "cavsim/world.hpp"

#include <algorithm>
#include <string>

#include "cavsim/error.hpp"

namespace cavsim {

World::World(int n_lanes, double vehicle_length)
    : n_lanes_(n_lanes), vehicle_length_(vehicle_length), lanes_(n_lanes > 0 ? n_lanes : 0) {
  if (n_lanes < 1) throw ConfigError("world needs at least one lane");
  if (!(vehicle_length > 0.0)) throw ConfigError("vehicle length must be positive");
}

VehicleId World::add(const VehicleState& state) {
  const VehicleId id{static_cast<std::uint32_t>(states_.size())};
  states_.push_back(state);
  rank_.push_back(0);
  return id;
}

void World::check(VehicleId id) const {
  if (id.index() >= states_.size())
    throw LookupError("unknown vehicle id " + std::to_string(id.value));
}

const VehicleState& World::state(VehicleId id) const {
  check(id);
  return states_[id.index()];
}

VehicleState& World::mutable_state(VehicleId id) {
  check(id);
  return states_[id.index()];
}

void World::reindex() {
  for (auto& l : lanes_) l.clear();
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const int lane = states_[i].lane;
    if (lane < 0 || lane >= n_lanes_)
      throw StateError("vehicle " + std::to_string(i) + " in invalid lane " +
                       std::to_string(lane));
    lanes_[static_cast<std::size_t>(lane)].push_back(VehicleId{static_cast<std::uint32_t>(i)});
  }
  for (auto& l : lanes_) {
    std::sort(l.begin(), l.end(), [this](VehicleId a, VehicleId b) {
      const double xa = states_[a.index()].position;
      const double xb = states_[b.index()].position;
      return xa != xb ? xa > xb : a < b;
    });
    for (std::size_t r = 0; r < l.size(); ++r) {
      if (r > 0 && states_[l[r].index()].position == states_[l[r - 1].index()].position)
        throw StateError("vehicles " + std::to_string(l[r - 1].value) + " and " +
                         std::to_string(l[r].value) + " share a position");
      rank_[l[r].index()] = r;
    }
  }
}

const std::vector<VehicleId>& World::lane(int lane) const {
  if (lane < 0 || lane >= n_lanes_) throw LookupError("unknown lane " + std::to_string(lane));
  return lanes_[static_cast<std::size_t>(lane)];
}

std::optional<VehicleId> World::first_preceding(VehicleId id) const {
  check(id);
  const std::size_t r = rank_[id.index()];
  if (r == 0) return std::nullopt;
  return lanes_[static_cast<std::size_t>(states_[id.index()].lane)][r - 1];
}

std::optional<VehicleId> World::second_preceding(VehicleId id) const {
  check(id);
  const std::size_t r = rank_[id.index()];
  if (r < 2) return std::nullopt;
  return lanes_[static_cast<std::size_t>(states_[id.index()].lane)][r - 2];
}

LaneNeighbors World::neighbors_at(int lane, double position,
                                  std::optional<VehicleId> exclude) const {
  LaneNeighbors out;
  if (lane < 0 || lane >= n_lanes_) return out;
  const auto& l = lanes_[static_cast<std::size_t>(lane)];
  // First vehicle (front to back) whose position is not strictly greater.
  auto it = std::partition_point(l.begin(), l.end(), [&](VehicleId v) {
    return states_[v.index()].position > position;
  });
  for (auto lead = it; lead != l.begin();) {
    --lead;
    if (*lead != exclude) {
      out.leader = *lead;
      break;
    }
  }
  for (auto fol = it; fol != l.end(); ++fol) {
    if (*fol == exclude || states_[fol->index()].position == position) continue;
    out.follower = *fol;
    break;
  }
  return out;
}

LaneNeighbors World::adjacent_lane_neighbors(VehicleId id, Side side) const {
  check(id);
  const VehicleState& s = states_[id.index()];
  return neighbors_at(s.lane + lane_offset(side), s.position, id);
}

double World::gap(VehicleId follower, VehicleId leader) const {
  return state(leader).position - vehicle_length_ - state(follower).position;
}

}  // namespace cavsim
