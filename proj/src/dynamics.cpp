#include "cavsim/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "cavsim/error.hpp"

namespace cavsim {

ActuationBuffer::ActuationBuffer(const DynamicsParams& params, double dt,
                                 double initial_accel)
    : dt_(dt) {
  if (!(dt > 0.0)) throw ConfigError("dynamics: dt must be positive");
  if (!(params.time_constant >= 0.0))
    throw ConfigError("dynamics: time constant must be non-negative");
  if (!(params.delay >= 0.0)) throw ConfigError("dynamics: delay must be non-negative");
  const double steps = params.delay / dt;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) * dt > 1e-9)
    throw ConfigError("dynamics: delay must be a whole number of time steps");
  ring_.assign(static_cast<std::size_t>(rounded), initial_accel);
  decay_ = params.time_constant > 0.0 ? std::exp(-dt / params.time_constant) : 0.0;
}

double ActuationBuffer::exchange(double command) {
  if (ring_.empty()) return command;
  const double out = ring_[head_];
  ring_[head_] = command;
  head_ = (head_ + 1) % ring_.size();
  return out;
}

VehicleState dynamics_step(double command, ActuationBuffer& buffer,
                           const VehicleState& state) {
  const double dt = buffer.dt();
  const double u = buffer.exchange(command);
  VehicleState next = state;
  next.accel = u + (state.accel - u) * buffer.decay();

  const double mean_accel = 0.5 * (state.accel + next.accel);
  double v = state.speed + mean_accel * dt;
  if (v < 0.0) {
    // Stop within the step: time to standstill under the mean acceleration.
    const double t_stop = mean_accel < 0.0 ? state.speed / -mean_accel : 0.0;
    next.position = state.position + 0.5 * state.speed * t_stop;
    next.speed = 0.0;
    next.accel = std::max(next.accel, 0.0);
    return next;
  }
  next.speed = v;
  next.position = state.position + 0.5 * (state.speed + v) * dt;
  return next;
}

}  // namespace cavsim
