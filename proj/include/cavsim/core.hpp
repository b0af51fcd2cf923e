#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace cavsim {

/// Dense vehicle identifier; followers first, then one lead per lane.
struct VehicleId {
  std::uint32_t value = 0;

  constexpr std::size_t index() const noexcept { return value; }
  friend constexpr auto operator<=>(VehicleId, VehicleId) = default;
};

enum class VehicleClass : std::uint8_t { kTHV, kCHV, kAV, kCAV, kCAVu, kCAVuLC };

/// Capability flags implied by a vehicle class. Behaviour is driven by
/// these flags only, never by the class label itself.
struct Capabilities {
  bool connected = false;
  bool automated = false;
  bool caccu_capable = false;
  bool lc_capable = false;

  friend constexpr bool operator==(const Capabilities&, const Capabilities&) = default;
};

constexpr Capabilities capabilities_of(VehicleClass c) noexcept {
  switch (c) {
    case VehicleClass::kTHV: return {};
    case VehicleClass::kCHV: return {.connected = true};
    case VehicleClass::kAV: return {.automated = true};
    case VehicleClass::kCAV: return {.connected = true, .automated = true};
    case VehicleClass::kCAVu:
      return {.connected = true, .automated = true, .caccu_capable = true};
    case VehicleClass::kCAVuLC:
      return {.connected = true, .automated = true, .caccu_capable = true,
              .lc_capable = true};
  }
  return {};
}

constexpr bool is_automated(VehicleClass c) noexcept {
  return capabilities_of(c).automated;
}

std::string_view to_string(VehicleClass c) noexcept;

/// Accepts THV, CHV, AV, CAV, CAVu, CAVu-LC (case-sensitive).
VehicleClass parse_vehicle_class(std::string_view name);

/// Kinematic state of one vehicle at one step. position is the front bumper.
struct VehicleState {
  double position = 0.0;  // m
  double speed = 0.0;     // m/s
  double accel = 0.0;     // m/s^2, realized
  int lane = 0;           // 0 = leftmost

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

enum class Side : std::uint8_t { kLeft, kRight };

constexpr int lane_offset(Side s) noexcept { return s == Side::kLeft ? -1 : 1; }

/// Gap and speed difference to a preceding vehicle.
struct Gap {
  double h;   // front bumper of leader minus length minus front bumper of ego
  double dv;  // v_ego - v_leader
};

}  // namespace cavsim

template <>
struct std::hash<cavsim::VehicleId> {
  std::size_t operator()(cavsim::VehicleId id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
