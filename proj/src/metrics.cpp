#include "cavsim/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "cavsim/error.hpp"

namespace cavsim {

void FuelModelParams::validate() const {
  if (!(c0 > 0.0)) throw ConfigError("fuel c0 must be positive");
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw ConfigError("fuel c1, c2 must be non-negative");
  if (!(mass > 0.0) || !(efficiency > 0.0) || !(efficiency <= 1.0))
    throw ConfigError("fuel mass must be positive and efficiency in (0, 1]");
}

double resistance_force(double speed, const FuelModelParams& p) {
  const double kmh = 3.6 * speed;
  const double aero = 0.5 * p.air_density * p.drag_coefficient * p.frontal_area * speed * speed;
  const double rolling =
      9.8066 * p.mass * p.rolling_coefficient / 1000.0 * (p.rolling_c1 * kmh + p.rolling_c2);
  return aero + rolling;
}

double traction_power(double speed, double accel, const FuelModelParams& p) {
  return (resistance_force(speed, p) + p.mass * accel) * speed / (1000.0 * p.efficiency);
}

double fuel_rate(double speed, double accel, const FuelModelParams& p) {
  const double power = traction_power(speed, accel, p);
  if (!(power > 0.0)) return p.c0;
  return p.c0 + p.c1 * power + p.c2 * power * power;
}

namespace {

constexpr std::array<MetricField, 19> kFields{{
    {"cav_utilization", [](const RunMetrics& m) { return m.automated.utilization; }},
    {"cav_utilization_cacc", [](const RunMetrics& m) { return m.automated.utilization_cacc; }},
    {"cav_utilization_caccu", [](const RunMetrics& m) { return m.automated.utilization_caccu; }},
    {"cav_max_unsafe_spacing", [](const RunMetrics& m) { return m.automated.max_unsafe_spacing; }},
    {"cav_accel_rms", [](const RunMetrics& m) { return m.automated.accel_rms; }},
    {"cav_min_speed", [](const RunMetrics& m) { return m.automated.min_speed; }},
    {"cav_fuel_total", [](const RunMetrics& m) { return m.automated.fuel_total; }},
    {"cav_fuel_rate_mean", [](const RunMetrics& m) { return m.automated.fuel_rate_mean; }},
    {"fleet_utilization", [](const RunMetrics& m) { return m.fleet.utilization; }},
    {"fleet_max_unsafe_spacing", [](const RunMetrics& m) { return m.fleet.max_unsafe_spacing; }},
    {"fleet_accel_rms", [](const RunMetrics& m) { return m.fleet.accel_rms; }},
    {"fleet_min_speed", [](const RunMetrics& m) { return m.fleet.min_speed; }},
    {"fleet_fuel_total", [](const RunMetrics& m) { return m.fleet.fuel_total; }},
    {"fleet_fuel_rate_mean", [](const RunMetrics& m) { return m.fleet.fuel_rate_mean; }},
    {"cav_count", [](const RunMetrics& m) { return static_cast<double>(m.automated.vehicles); }},
    {"fleet_count", [](const RunMetrics& m) { return static_cast<double>(m.fleet.vehicles); }},
    {"lane_changes", [](const RunMetrics& m) { return static_cast<double>(m.lane_changes); }},
    {"lane_changes_per_cav",
     [](const RunMetrics& m) {
       return m.automated.vehicles
                  ? static_cast<double>(m.lane_changes) / static_cast<double>(m.automated.vehicles)
                  : 0.0;
     }},
    {"collision", [](const RunMetrics& m) { return m.collision ? 1.0 : 0.0; }},
}};

}  // namespace

std::span<const MetricField> metric_fields() { return kFields; }

Utilization utilization(std::span<const PlannerMode> modes) {
  if (modes.empty()) return {0.0, 0.0};
  std::size_t cacc = 0, caccu = 0;
  for (PlannerMode m : modes) {
    if (m == PlannerMode::kCACC) ++cacc;
    if (m == PlannerMode::kCACCu) ++caccu;
  }
  const double n = static_cast<double>(modes.size());
  return {static_cast<double>(cacc) / n, static_cast<double>(caccu) / n};
}

double max_unsafe_spacing(std::span<const double> spacing_errors) {
  double worst = 0.0;
  for (double e : spacing_errors)
    if (e < 0.0) worst = std::max(worst, -e);
  return worst;
}

double accel_rms(std::span<const double> accels) {
  if (accels.empty()) throw DomainError("accel_rms of an empty trace");
  double sum = 0.0;
  for (double a : accels) sum += a * a;
  return std::sqrt(sum / static_cast<double>(accels.size()));
}

MetricsAccumulator::MetricsAccumulator(std::vector<bool> automated, std::int64_t warmup_steps,
                                       double dt, const FuelModelParams& fuel)
    : automated_(std::move(automated)),
      warmup_(warmup_steps),
      dt_(dt),
      fuel_(fuel),
      per_(automated_.size()) {}

void MetricsAccumulator::add(std::int64_t step, std::size_t vehicle, double speed,
                             double accel, std::int8_t mode, double spacing_error) {
  if (step < warmup_) return;
  PerVehicle& p = per_.at(vehicle);
  p.min_speed = p.samples == 0 ? speed : std::min(p.min_speed, speed);
  ++p.samples;
  p.sum_sq += accel * accel;
  p.fuel += fuel_rate(speed, accel, fuel_) * dt_;
  if (mode == static_cast<std::int8_t>(PlannerMode::kCACC)) ++p.cacc;
  if (mode == static_cast<std::int8_t>(PlannerMode::kCACCu)) ++p.caccu;
  if (spacing_error < 0.0) p.max_unsafe = std::max(p.max_unsafe, -spacing_error);
}

RunMetrics MetricsAccumulator::finish() const {
  RunMetrics out;
  out.lane_changes = lane_changes_;
  out.collision = collision_;

  // Cooperative-mode and spacing metrics are defined over automated
  // vehicles in both scopes.
  std::size_t auto_samples = 0, cacc = 0, caccu = 0, auto_vehicles = 0;
  double unsafe_sum = 0.0;
  for (std::size_t i = 0; i < per_.size(); ++i) {
    if (!automated_[i] || per_[i].samples == 0) continue;
    ++auto_vehicles;
    auto_samples += per_[i].samples;
    cacc += per_[i].cacc;
    caccu += per_[i].caccu;
    unsafe_sum += per_[i].max_unsafe;
  }

  const auto fold = [&](bool automated_only) {
    ScopeMetrics s;
    std::size_t samples = 0;
    double sum_sq = 0.0, min_sum = 0.0, fuel = 0.0;
    for (std::size_t i = 0; i < per_.size(); ++i) {
      if (automated_only && !automated_[i]) continue;
      const PerVehicle& p = per_[i];
      if (p.samples == 0) continue;
      ++s.vehicles;
      samples += p.samples;
      sum_sq += p.sum_sq;
      min_sum += p.min_speed;
      fuel += p.fuel;
    }
    if (s.vehicles == 0) return s;
    const double n = static_cast<double>(samples);
    s.accel_rms = std::sqrt(sum_sq / n);
    s.min_speed = min_sum / static_cast<double>(s.vehicles);
    s.fuel_total = fuel;
    s.fuel_rate_mean = fuel / (n * dt_);
    if (auto_samples > 0) {
      s.utilization_cacc = static_cast<double>(cacc) / static_cast<double>(auto_samples);
      s.utilization_caccu = static_cast<double>(caccu) / static_cast<double>(auto_samples);
      s.utilization = s.utilization_cacc + s.utilization_caccu;
      s.max_unsafe_spacing = unsafe_sum / static_cast<double>(auto_vehicles);
    }
    return s;
  };
  out.automated = fold(true);
  out.fleet = fold(false);
  return out;
}

}  // namespace cavsim
