#include "cavsim/core.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "cavsim/error.hpp"
#include "cavsim/fleet.hpp"
#include "cavsim/rng.hpp"

namespace cavsim {

namespace {

constexpr std::array<std::pair<VehicleClass, std::string_view>, 6> kClassNames{{
    {VehicleClass::kTHV, "THV"},
    {VehicleClass::kCHV, "CHV"},
    {VehicleClass::kAV, "AV"},
    {VehicleClass::kCAV, "CAV"},
    {VehicleClass::kCAVu, "CAVu"},
    {VehicleClass::kCAVuLC, "CAVu-LC"},
}};

std::size_t floor_count(double fraction, std::size_t n) {
  // The epsilon keeps exact products such as 0.1 * 100 from landing at 9.
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace

std::string_view to_string(VehicleClass c) noexcept {
  for (const auto& [cls, name] : kClassNames)
    if (cls == c) return name;
  return "?";
}

VehicleClass parse_vehicle_class(std::string_view name) {
  for (const auto& [cls, n] : kClassNames)
    if (n == name) return cls;
  throw ConfigError("unknown vehicle class '" + std::string(name) + "'");
}

void FleetComposition::validate() const {
  const auto in_unit = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!in_unit(cav_fraction) || !in_unit(chv_fraction))
    throw CompositionError("fleet fractions must lie in [0, 1]");
  if (cav_fraction + chv_fraction > 1.0 + 1e-12)
    throw CompositionError("cav_fraction + chv_fraction exceeds 1");
  if (!is_automated(automated_class))
    throw CompositionError("automated_class must be AV, CAV, CAVu or CAVu-LC");
}

std::size_t FleetComposition::cav_count() const {
  return floor_count(cav_fraction, n_vehicles);
}

std::size_t FleetComposition::chv_count() const {
  return floor_count(chv_fraction, n_vehicles);
}

std::vector<VehicleProfile> compose_fleet(const FleetComposition& composition,
                                          std::uint64_t seed,
                                          const FleetOptions& options) {
  composition.validate();
  const std::size_t n = composition.n_vehicles;
  const std::size_t n_cav = composition.cav_count();
  const std::size_t n_chv = composition.chv_count();
  if (n_cav + n_chv > n) throw CompositionError("class counts exceed fleet size");

  std::vector<VehicleClass> classes;
  classes.reserve(n);
  classes.insert(classes.end(), n_cav, composition.automated_class);
  classes.insert(classes.end(), n_chv, VehicleClass::kCHV);
  classes.resize(n, VehicleClass::kTHV);

  Rng shuffle = make_stream(seed, Stream::kFleetShuffle, 0);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(shuffle.below(i));
    std::swap(classes[i - 1], classes[j]);
  }

  std::vector<VehicleProfile> fleet(n);
  for (std::size_t i = 0; i < n; ++i) {
    VehicleProfile& p = fleet[i];
    p.id = VehicleId{static_cast<std::uint32_t>(i)};
    p.vehicle_class = classes[i];
    p.caps = capabilities_of(classes[i]);
    p.driver = options.driver;
    p.controller = options.controller;
    // Drawn for every vehicle so a driver's headway does not depend on the class mix.
    Rng headway = make_stream(seed, Stream::kDriverHeadway, i);
    p.driver.time_headway = headway.uniform(options.headway_min, options.headway_max);
  }
  return fleet;
}

}  // namespace cavsim
