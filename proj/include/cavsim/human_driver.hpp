#pragma once

#include <optional>
#include <vector>

#include "cavsim/rng.hpp"

namespace cavsim {

/// IDM car-following parameters plus the human-factor extensions
/// (reaction delay, TTC emergency mode, Wiener perception errors).
struct HumanParams {
  double desired_speed = 25.0;       // m/s
  double min_gap = 2.0;              // m
  double max_accel = 4.0;            // m/s^2
  double comfort_decel = 4.0;        // m/s^2
  double emergency_decel = 8.0;      // m/s^2, applied as -emergency_decel
  double time_headway = 1.5;         // s, drawn per driver from [1, 2]
  double reaction_delay = 0.9;       // s
  double ttc_threshold = 3.6;        // s
  double distance_error_cv = 0.05;   // relative distance error coefficient
  double approach_rate_sd = 0.01;    // relative approach-rate coefficient
  double error_persistence = 20.0;   // s

  /// Throws ConfigError when a parameter is out of range. The perception
  /// coefficients and the reaction delay may be zero (errors/delay disabled).
  void validate() const;
};

/// Desired gap s0 + max(v T + v dv / (2 sqrt(a b)), 0). dv = v_ego - v_lead.
double idm_desired_gap(double speed, double dv, const HumanParams& p);

/// IDM acceleration. gap is bumper-to-bumper; pass +inf for free road.
/// Throws DomainError when gap <= 0.
double idm_accel(double speed, double gap, double dv, const HumanParams& p);

/// Gap at which idm_accel vanishes for a leader at the same speed.
double idm_equilibrium_gap(double speed, const HumanParams& p);

/// Time to collision; +inf unless the ego is closing in.
double time_to_collision(double gap, double v_ego, double v_lead);

/// Wiener-process states driving the distance and speed estimation errors.
struct PerceptionState {
  double distance_error = 0.0;
  double speed_error = 0.0;
};

struct Perception {
  double gap;
  double dv;
  PerceptionState next;
};

/// Advances one Ornstein-Uhlenbeck step: w <- exp(-dt/tau) w + sqrt(2 dt/tau) eta.
double advance_wiener(double w, double dt, double persistence, Rng& rng);

/// Perceived gap and speed difference under the current error state, plus
/// the advanced state. Both Wiener states always consume one normal draw.
Perception perceive(double gap, double dv, const PerceptionState& state,
                    double dt, const HumanParams& p, Rng& rng);

/// What the driver sees ahead at the current step (ground truth).
struct LeaderView {
  double gap;    // bumper-to-bumper, m
  double speed;  // m/s
};

/// One human driver: perception state, reaction-delay history and the
/// normal/emergency mode switch.
class HumanDriver {
 public:
  HumanDriver(const HumanParams& params, double dt);

  /// Commanded acceleration for this step.
  ///
  /// `exact_perception` is true when the driver gets error-free inputs
  /// (connected ego following a connected leader). Emergency braking is
  /// evaluated on ground truth without delay and overrides everything.
  double step(const std::optional<LeaderView>& leader, double v_ego,
              bool exact_perception, Rng& rng);

  const HumanParams& params() const noexcept { return params_; }
  const PerceptionState& perception() const noexcept { return perception_; }
  bool last_was_emergency() const noexcept { return last_emergency_; }
  std::size_t delay_steps() const noexcept { return delay_steps_; }

 private:
  // Perceived leader stimulus; the driver's own speed enters undelayed.
  struct Sample {
    double gap;  // +inf when no leader
    double dv;
  };

  HumanParams params_;
  double dt_;
  std::size_t delay_steps_;
  PerceptionState perception_;
  std::vector<Sample> history_;  // ring buffer of delay_steps_ + 1 samples
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
  bool last_emergency_ = false;
};

}  // namespace cavsim
