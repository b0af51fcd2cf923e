#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cavsim/core.hpp"
#include "cavsim/rng.hpp"
#include "cavsim/verdict.hpp"

namespace cavsim {

/// Standard deviations of the sensor errors (per axis).
struct SensorNoise {
  double radar_dist_sd = 0.1;   // m
  double radar_speed_sd = 0.1;  // m/s
  double gps_dist_sd = 1.0;     // m
  double gps_speed_sd = 0.0;    // m/s

  SensorNoise with_radar_scaled(double factor) const;
};

/// Chi-square gates on the normalized GPS-minus-radar differences.
struct MatchRegions {
  double alpha1 = 0.011;
  double alpha2 = 0.0049;
  double pos_threshold = 0.0;    // 2 dof
  double speed_threshold = 0.0;  // 1 dof
};

/// Upper chi-square quantiles at 1 - alpha. Throws DomainError unless both
/// alphas lie in (0, 1).
MatchRegions derive_thresholds(double alpha1, double alpha2);

/// Relative position (dx along the road, dy lateral) and speed of a target
/// with respect to the ego.
struct RelativeMeasurement {
  double dx = 0.0;
  double dy = 0.0;
  double dv = 0.0;
};

/// Absolute state broadcast by a connected vehicle.
struct GpsMessage {
  VehicleId sender;
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
};

struct SvisParams {
  MatchRegions regions = derive_thresholds(0.011, 0.0049);
  SensorNoise noise;
  int inner_steps = 34;         // n, consecutive matches for a verdict
  int outer_windows = 6;        // k, failed windows before Unconnected
  int second_slot_factor = 2;   // n and radar sd scale for the second slot
  double retry_cooldown = 5.0;  // s after Unconnected before re-scanning
  double radar_range = 150.0;   // m
  double comm_range = 300.0;    // m
  double lane_width = 3.5;      // m
};

/// True relative state plus radar noise.
RelativeMeasurement synthesize_radar(const RelativeMeasurement& truth,
                                     const SensorNoise& noise, Rng& rng);

/// True absolute state plus GPS noise.
GpsMessage synthesize_gps(VehicleId sender, double x, double y, double v,
                          const SensorNoise& noise, Rng& rng);

/// Both gates pass for one candidate. gps is already expressed relative to
/// the ego. sds combine the GPS and radar error per axis.
bool region_test(const RelativeMeasurement& radar, const RelativeMeasurement& gps,
                 const MatchRegions& regions, const SensorNoise& noise);

/// Counters of one identification attempt. A candidate survives a window
/// only while it matches on every step; the window is resolved on its last
/// step. Exactly one survivor gives Connected, otherwise the window fails.
struct IdentificationState {
  int inner_target = 34;
  int outer_target = 6;
  int window_step = 0;        // steps taken in the current window
  int failed_windows = 0;
  std::vector<VehicleId> survivors;  // sorted
  Connectivity verdict = Connectivity::kPending;
  std::optional<VehicleId> matched;
  double elapsed = 0.0;
};

IdentificationState make_identification(int inner_steps, int outer_windows);

/// Record this step's matching candidates (any order). Throws StateError
/// when the state already carries a verdict.
void identification_step(IdentificationState& state, std::span<const VehicleId> matches,
                         double dt);

enum class Slot : std::uint8_t { kFirst, kSecond, kLeft, kRight };

/// Identification of one slot around an ego (the first/second predecessor
/// or the leader in an adjacent lane). Tracks the radar target, restarts
/// when it changes, and re-scans after a cool-down following Unconnected.
class SlotTracker {
 public:
  SlotTracker() = default;
  SlotTracker(Slot slot, const SvisParams& params);

  /// Sets the physical target for this step. A change resets to Pending.
  /// Returns true when the tracker was reset.
  bool retarget(std::optional<VehicleId> target);

  /// True while a scan is running and a target exists.
  bool scanning() const noexcept;

  /// Feeds this step's matching candidates. Call only while scanning().
  void observe(std::span<const VehicleId> matches, double dt);

  /// Advances cool-down when not scanning.
  void idle(double dt);

  /// Verdict for the current target: the most recent resolved one, Pending
  /// before the first resolution or when there is no target.
  Connectivity verdict() const noexcept;
  std::optional<VehicleId> target() const noexcept { return target_; }
  std::optional<VehicleId> matched() const noexcept { return state_.matched; }
  const IdentificationState& state() const noexcept { return state_; }
  Slot slot() const noexcept { return slot_; }

  /// Total time the last completed scan took (resolution latency), or
  /// nullopt while none completed since the last retarget.
  std::optional<double> resolution_time() const noexcept { return resolved_after_; }

 private:
  void restart();

  Slot slot_ = Slot::kFirst;
  int inner_ = 34;
  int outer_ = 6;
  double cooldown_total_ = 5.0;
  double cooldown_left_ = 0.0;
  std::optional<VehicleId> target_;
  IdentificationState state_;
  // Last resolved verdict; stays in force while a re-scan runs.
  Connectivity standing_ = Connectivity::kPending;
  std::optional<double> resolved_after_;
};

/// Noise model used for a slot (second slot radar sd scaled).
SensorNoise slot_noise(Slot slot, const SvisParams& params);

/// One identification episode with a single radar target and a set of
/// connected candidates at fixed relative offsets; returns the outcome
/// at resolution (or after max_steps).
struct EpisodeResult {
  Connectivity verdict = Connectivity::kPending;
  std::optional<std::size_t> matched_index;  // index into candidates
  double time = 0.0;
};

/// candidates[i] is the true relative state of connected candidate i;
/// target_index picks the radar target (it need not be connected: pass
/// target_connected = false to exclude it from the GPS set).
EpisodeResult run_identification_episode(const std::vector<RelativeMeasurement>& candidates,
                                         std::size_t target_index, bool target_connected,
                                         Slot slot, const SvisParams& params, Rng& rng,
                                         std::size_t max_steps = 100000, double dt = 0.1);

}  // namespace cavsim
