#pragma once

#include <cstdint>
#include <string_view>

#include "cavsim/core.hpp"
#include "cavsim/verdict.hpp"

namespace cavsim {

/// Gains shared by the ACC, CACC and CACCu planners.
struct ControllerParams {
  double kp = 0.3;
  double kd = 0.7;
  double time_headway = 1.2;      // s, T_h
  double ovm_alpha = 0.76;
  double ovm_beta = 0.51;
  double ovm_headway = 0.57;      // s
  double ff_time_constant = 1.2;  // s
  double cruise_speed = 25.0;     // m/s, speed cap when no leader limits the ego
  double cruise_gain = 0.3;       // 1/s
  double min_command = -8.0;      // m/s^2
  double max_command = 4.0;       // m/s^2
  // Collision-avoidance override: command min_command while the
  // time-to-collision on the first predecessor is below this. 0 disables.
  double emergency_ttc = 3.6;     // s

  void validate() const;
};

enum class PlannerMode : std::uint8_t { kACC, kCACC, kCACCu };

std::string_view to_string(PlannerMode m) noexcept;

constexpr bool is_cooperative(PlannerMode m) noexcept { return m != PlannerMode::kACC; }

/// e = h - T_h v.
constexpr double spacing_error(double gap, double speed, double time_headway) noexcept {
  return gap - time_headway * speed;
}

/// e_dot from relative speed and the previous realized acceleration.
constexpr double spacing_error_rate(double v_lead, double v_ego, double a_ego,
                                    double time_headway) noexcept {
  return (v_lead - v_ego) - time_headway * a_ego;
}

/// u = kp e + kd e_dot.
double acc_command(double e, double e_dot, const ControllerParams& p);

/// State of one first-order feed-forward lag with unity DC gain.
struct FilterState {
  double y = 0.0;
};

/// Advances the feed-forward lag by one step (exact for inputs held over dt)
/// and returns the new output.
double feedforward_step(double input, FilterState& state, double dt,
                        const ControllerParams& p);

/// u = acc_command + filtered communicated leader acceleration.
double cacc_command(double e, double e_dot, double leader_accel, FilterState& filter,
                    double dt, const ControllerParams& p);

/// Linearized OVM acceleration: alpha (h / T_ovm - v) + beta dv_lead.
double ovm_accel_estimate(double gap, double speed, double dv_lead,
                          const ControllerParams& p);

/// Tracks the acceleration of an unconnected vehicle that follows a connected
/// one. The linearized OVM is differentiated in time, so only the relative
/// speed and the connected vehicle's communicated acceleration enter and the
/// unknown equilibrium offset drops out.
class OvmEstimator {
 public:
  /// Advances the estimate. v_target is the unconnected vehicle's speed,
  /// v_ahead and a_ahead belong to the connected vehicle in front of it.
  double step(double v_target, double v_ahead, double a_ahead, double dt,
              const ControllerParams& p);

  double estimate() const noexcept { return estimate_; }
  void reset() noexcept { estimate_ = 0.0; }

 private:
  double estimate_ = 0.0;
};

/// u = acc_command + filtered OVM estimate of the unconnected first
/// predecessor, driven by the connected second predecessor.
double caccu_command(double e, double e_dot, double second_leader_accel,
                     double estimated_first_leader_accel, FilterState& filter,
                     double dt, const ControllerParams& p);

/// Planner choice from capabilities and the two identification verdicts.
PlannerMode select_planner(const Capabilities& caps, Connectivity first,
                           Connectivity second);

/// Mutable per-vehicle planner state: active mode, feed-forward filter and
/// OVM estimator. Both are reset whenever the mode changes.
class Planner {
 public:
  explicit Planner(const ControllerParams& params);

  struct Inputs {
    PlannerMode mode;
    bool has_leader;           // a first predecessor is visible
    double gap;                // to first predecessor
    double v_ego;
    double a_ego;              // previous realized acceleration
    double v_first;            // first predecessor speed
    double a_first;            // communicated, used in CACC
    double v_second;           // communicated, used in CACCu
    double a_second;           // communicated, used in CACCu
  };

  struct Output {
    double command;
    double spacing_error;      // NaN when no leader
  };

  Output step(const Inputs& in, double dt);

  PlannerMode mode() const noexcept { return mode_; }
  const ControllerParams& params() const noexcept { return params_; }

 private:
  ControllerParams params_;
  PlannerMode mode_ = PlannerMode::kACC;
  FilterState filter_;
  OvmEstimator estimator_;
};

}  // namespace cavsim
