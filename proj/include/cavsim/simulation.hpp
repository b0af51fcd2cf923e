#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cavsim/controllers.hpp"
#include "cavsim/dynamics.hpp"
#include "cavsim/fleet.hpp"
#include "cavsim/human_driver.hpp"
#include "cavsim/lane_change.hpp"
#include "cavsim/metrics.hpp"
#include "cavsim/svis.hpp"
#include "cavsim/trajectory.hpp"
#include "cavsim/world.hpp"

namespace cavsim {

/// How per-vehicle work inside a step is scheduled. Results are identical.
enum class ExecutionPolicy : std::uint8_t { kSerial, kParallel };

/// Capability switches applied to every automated follower after fleet
/// composition; used to nest functionalities inside each other.
struct CapabilityMask {
  bool disable_connectivity = false;
  bool disable_caccu = false;
  bool disable_lane_change = false;

  Capabilities apply(Capabilities c) const noexcept;
};

struct ScenarioConfig {
  double dt = 0.1;               // s
  double duration = 1200.0;      // s
  double warmup = 60.0;          // s excluded from metrics
  int lanes = 5;
  double vehicle_length = 5.0;   // m
  double road_length = 100000.0; // m available behind the leads' start
  FleetComposition fleet;
  FleetOptions fleet_options;
  DynamicsParams automated_dynamics;              // lag 0.5 s, delay 0.3 s
  DynamicsParams human_dynamics{0.0, 0.0};        // humans act through the IDM delay only
  SvisParams svis;
  bool perfect_identification = false;  // verdicts equal ground truth instantly
  MobilParams mobil;
  FuelModelParams fuel;
  SyntheticProfileParams synthetic_lead;
  std::vector<LeadProfile> lead_profiles;  // one per lane; synthesized when empty
  bool lead_connected = false;
  CapabilityMask mask;
  std::uint64_t seed = 1;
  ExecutionPolicy policy = ExecutionPolicy::kSerial;
  bool record_log = false;

  /// Throws ConfigError on invalid settings.
  void validate() const;
  std::int64_t steps() const;
};

/// Per step and vehicle record. lc_event is -1 (moved left), +1 (moved
/// right) or 0.
struct LogRow {
  std::int64_t step;
  std::uint32_t vehicle;
  std::int16_t lane;
  std::int8_t mode;  // PlannerMode value, kHumanMode for human-driven
  std::int8_t lc_event;
  Connectivity first;
  Connectivity second;
  double position;
  double speed;
  double accel;     // realized
  double command;
  double spacing_error;  // NaN for humans and automated vehicles without a leader

  friend bool operator==(const LogRow& a, const LogRow& b);
};

/// Append-only trajectory log; rows are in (step, vehicle) order.
struct TrajectoryLog {
  std::vector<LogRow> rows;
  std::size_t vehicles = 0;  // followers logged per step

  void write_csv(std::ostream& out) const;
  static TrajectoryLog read_csv(std::istream& in);
};

struct CollisionInfo {
  std::int64_t step;
  std::uint32_t follower;
  std::uint32_t leader;
  double gap;
};

struct RunResult {
  RunMetrics metrics;
  TrajectoryLog log;
  std::optional<CollisionInfo> collision;
  std::vector<VehicleProfile> fleet;
  std::int64_t steps_run = 0;
};

/// One scenario: followers 0..n-1 placed round-robin across lanes at
/// equilibrium spacing behind one prescribed lead per lane (ids n..n+L-1).
class Simulation {
 public:
  explicit Simulation(ScenarioConfig config);
  ~Simulation();
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;

  /// Advances one step. Returns false once the run is over (duration reached
  /// or a collision aborted it).
  bool step();

  /// Runs to completion and returns the metrics, the log and collision info.
  RunResult run();

  const World& world() const;
  const std::vector<VehicleProfile>& fleet() const;
  std::int64_t current_step() const;
  const ScenarioConfig& config() const;

  /// Commands the vehicles would issue on the current snapshot (no state
  /// change); used to check equilibrium initialization.
  std::vector<double> preview_commands() const;

  const SlotTracker& tracker(VehicleId id, Slot slot) const;
  PlannerMode mode(VehicleId id) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Convenience: run one config.
RunResult run_scenario(const ScenarioConfig& config);

}  // namespace cavsim
