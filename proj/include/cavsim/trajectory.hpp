#pragma once

#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace cavsim {

/// One sample of a recorded vehicle trajectory (10 Hz frames).
struct TrajectoryRecord {
  std::int64_t vehicle_id = 0;
  std::int64_t frame = 0;
  int lane = 0;
  double position = 0.0;  // m
  double speed = 0.0;     // m/s

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

/// Parses `vehicle_id,frame,lane,local_y_m,speed_mps` records. Output is
/// grouped by vehicle (in order of first appearance) and frame-sorted.
/// Throws ParseError naming the row and column of the first bad field,
/// including negative speeds and non-contiguous frames.
std::vector<TrajectoryRecord> parse_trajectories(std::istream& in);
std::vector<TrajectoryRecord> parse_trajectories_file(const std::string& path);

/// Same, from the public NGSIM column layout (Vehicle_ID, Frame_ID, Lane_ID,
/// Local_Y in ft, v_Vel in ft/s). Extra columns are ignored.
std::vector<TrajectoryRecord> parse_ngsim(std::istream& in);

void write_trajectories(std::ostream& out, const std::vector<TrajectoryRecord>& records);

/// Vehicles whose lane never changes, ordered by first frame (ties by id).
std::vector<TrajectoryRecord> filter_lane_keepers(const std::vector<TrajectoryRecord>& records);

/// Speed series of one source vehicle.
struct SpeedSeries {
  std::int64_t source = 0;
  std::vector<double> speed;
};

/// Splits filtered records into per-vehicle series (order preserved),
/// optionally restricted to one lane and a frame range.
std::vector<SpeedSeries> speed_series(const std::vector<TrajectoryRecord>& records,
                                      int lane = -1,
                                      std::int64_t first_frame = std::numeric_limits<std::int64_t>::min(),
                                      std::int64_t last_frame = std::numeric_limits<std::int64_t>::max());

/// Sample tag for samples produced by a bridge rather than a source vehicle.
inline constexpr std::int64_t kBridgeTag = -1;

/// Lead-vehicle speed trace at a fixed step, with one provenance tag per sample.
struct LeadProfile {
  double dt = 0.1;
  std::vector<double> speed;
  std::vector<std::int64_t> tag;

  std::size_t size() const noexcept { return speed.size(); }
  double duration() const noexcept { return dt * static_cast<double>(speed.size()); }
  /// Fraction of samples carrying a source tag.
  double source_fraction() const;
};

struct BridgeLimits {
  double accel = 0.2;  // m/s^2
  double jerk = 0.2;   // m/s^3
};

/// Speeds strictly after `from` up to and including `to` along a trapezoidal
/// acceleration profile that respects both limits, using the fewest steps.
/// Empty when from == to.
std::vector<double> bridge(double from, double to, double dt, const BridgeLimits& limits);

/// Concatenates source series into a profile of at least target_duration,
/// cycling through the list. Each next series is cropped to the span between
/// its first and last sample within `join_tolerance` of the current end speed
/// and joined by a bridge. Series with no such span are skipped, and a series
/// never follows itself. Throws ExtensionError with fewer than two series or
/// when no other series joins the current end.
LeadProfile extend_profile(const std::vector<SpeedSeries>& series, double target_duration,
                           double dt = 0.1, const BridgeLimits& limits = {},
                           double join_tolerance = 1.0);

struct SyntheticProfileParams {
  double mean_speed = 15.0;   // m/s
  double speed_spread = 4.0;  // m/s, sd of phase target speeds
  double min_speed = 5.0;
  double max_speed = 25.0;
  double cruise_min = 10.0;   // s
  double cruise_max = 40.0;   // s
  BridgeLimits limits{1.0, 1.0};
};

/// Seeded cruise / slow-down / speed-up sequence. Tagged as source 0.
LeadProfile synthesize_profile(double duration, double dt, std::uint64_t seed,
                               const SyntheticProfileParams& params = {});

}  // namespace cavsim
