#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cavsim/controllers.hpp"

namespace cavsim {

/// VT-CPFM style power-based fuel model (mid-size sedan defaults).
struct FuelModelParams {
  double c0 = 4.7738e-4;       // L/s, idle
  double c1 = 5.363e-5;        // L/s per kW
  double c2 = 1.0e-6;          // L/s per kW^2
  double mass = 1453.0;        // kg
  double drag_coefficient = 0.30;
  double frontal_area = 2.32;  // m^2
  double air_density = 1.2256; // kg/m^3
  double rolling_coefficient = 1.75;
  double rolling_c1 = 0.0328;  // per km/h
  double rolling_c2 = 4.575;
  double efficiency = 0.92;

  void validate() const;
};

/// Resistance force in N at a speed in m/s (aerodynamic plus rolling).
double resistance_force(double speed, const FuelModelParams& p);

/// Traction power in kW.
double traction_power(double speed, double accel, const FuelModelParams& p);

/// Fuel rate in L/s; c0 whenever the traction power is not positive.
double fuel_rate(double speed, double accel, const FuelModelParams& p);

/// Aggregates for one group of vehicles over the metric window.
struct ScopeMetrics {
  std::size_t vehicles = 0;
  double utilization_cacc = 0.0;
  double utilization_caccu = 0.0;
  double utilization = 0.0;          // cacc + caccu
  double max_unsafe_spacing = 0.0;   // m, mean over vehicles of per-vehicle maxima
  double accel_rms = 0.0;            // m/s^2, pooled over all samples
  double min_speed = 0.0;            // m/s, mean over vehicles of per-vehicle minima
  double fuel_total = 0.0;           // L, summed over vehicles
  double fuel_rate_mean = 0.0;       // L/s per vehicle
};

struct RunMetrics {
  ScopeMetrics automated;  // automated followers
  ScopeMetrics fleet;      // all followers
  std::size_t lane_changes = 0;
  bool collision = false;
};

/// Names and accessors used for CSV columns. Order is stable.
struct MetricField {
  const char* name;
  double (*get)(const RunMetrics&);
};
std::span<const MetricField> metric_fields();

/// Pure helpers over traces.
struct Utilization {
  double cacc;
  double caccu;
  double total() const noexcept { return cacc + caccu; }
};
Utilization utilization(std::span<const PlannerMode> modes);
/// max of -e over samples with e < 0; 0 when none. NaN samples are ignored.
double max_unsafe_spacing(std::span<const double> spacing_errors);
/// Throws DomainError on an empty trace.
double accel_rms(std::span<const double> accels);

/// Mode code stored per sample: -1 for human-driven vehicles.
constexpr std::int8_t kHumanMode = -1;

/// Streaming computation of RunMetrics. Samples must arrive in step order,
/// and within a step in vehicle order; samples of steps before the warm-up
/// are ignored.
class MetricsAccumulator {
 public:
  MetricsAccumulator(std::vector<bool> automated, std::int64_t warmup_steps, double dt,
                     const FuelModelParams& fuel);

  void add(std::int64_t step, std::size_t vehicle, double speed, double accel,
           std::int8_t mode, double spacing_error);

  void count_lane_change() noexcept { ++lane_changes_; }
  void flag_collision() noexcept { collision_ = true; }

  RunMetrics finish() const;

 private:
  struct PerVehicle {
    std::size_t samples = 0;
    std::size_t cacc = 0;
    std::size_t caccu = 0;
    double sum_sq = 0.0;
    double min_speed = 0.0;
    double max_unsafe = 0.0;
    double fuel = 0.0;
  };

  std::vector<bool> automated_;
  std::int64_t warmup_;
  double dt_;
  FuelModelParams fuel_;
  std::vector<PerVehicle> per_;
  std::size_t lane_changes_ = 0;
  bool collision_ = false;
};

}  // namespace cavsim
