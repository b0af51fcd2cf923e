#pragma once

#include <cstdint>
#include <vector>

#include "cavsim/controllers.hpp"
#include "cavsim/core.hpp"
#include "cavsim/human_driver.hpp"

namespace cavsim {

/// Class, capability flags and model parameters of one vehicle.
struct VehicleProfile {
  VehicleId id;
  VehicleClass vehicle_class = VehicleClass::kTHV;
  Capabilities caps;
  HumanParams driver;          // used when !caps.automated
  ControllerParams controller; // used when caps.automated
};

/// Market-penetration mix for one run. The remainder are THVs.
struct FleetComposition {
  std::size_t n_vehicles = 100;
  double cav_fraction = 0.0;
  double chv_fraction = 0.0;
  VehicleClass automated_class = VehicleClass::kCAV;

  /// Throws CompositionError on fractions outside [0, 1], a sum above 1, or a
  /// non-automated automated_class.
  void validate() const;

  std::size_t cav_count() const;
  std::size_t chv_count() const;
};

struct FleetOptions {
  HumanParams driver;
  ControllerParams controller;
  double headway_min = 1.0;  // s, per-driver T drawn from U[min, max]
  double headway_max = 2.0;
};

/// Exact floor counts per class, shuffled into positions with a seeded
/// Fisher-Yates pass. Ids are 0..n-1 in position order.
std::vector<VehicleProfile> compose_fleet(const FleetComposition& composition,
                                          std::uint64_t seed,
                                          const FleetOptions& options = {});

}  // namespace cavsim
