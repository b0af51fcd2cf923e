#pragma once

#include <cstddef>
#include <vector>

#include "cavsim/core.hpp"

namespace cavsim {

/// Longitudinal plant: first-order lag on the delayed acceleration command.
struct DynamicsParams {
  double time_constant = 0.5;  // s, powertrain lag; 0 gives an instantaneous plant
  double delay = 0.3;          // s, actuation delay
};

/// Commands in flight plus the realized acceleration of one vehicle.
class ActuationBuffer {
 public:
  /// Throws ConfigError unless delay is a whole number of steps (within 1e-9)
  /// and the time constant is non-negative.
  ActuationBuffer(const DynamicsParams& params, double dt, double initial_accel = 0.0);

  /// Pushes the new command and returns the one issued delay_steps() ago.
  double exchange(double command);

  std::size_t delay_steps() const noexcept { return ring_.size(); }
  double decay() const noexcept { return decay_; }
  double dt() const noexcept { return dt_; }

 private:
  std::vector<double> ring_;
  std::size_t head_ = 0;
  double decay_;
  double dt_;
};

/// One plant step. The lag is integrated exactly for an input held over the
/// step; speed and position use the trapezoidal rule on the realized
/// acceleration. Speed is clamped at zero.
VehicleState dynamics_step(double command, ActuationBuffer& buffer,
                           const VehicleState& state);

}  // namespace cavsim
