#include "cavsim/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cavsim/error.hpp"

namespace cavsim {

void ControllerParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string("controller parameter '") + name +
                        "' must be positive and finite");
  };
  positive(kp, "kp");
  positive(kd, "kd");
  positive(time_headway, "time_headway");
  positive(ovm_alpha, "ovm_alpha");
  positive(ovm_beta, "ovm_beta");
  positive(ovm_headway, "ovm_headway");
  positive(ff_time_constant, "ff_time_constant");
  if (!(emergency_ttc >= 0.0)) throw ConfigError("controller emergency_ttc must be non-negative");
  positive(cruise_speed, "cruise_speed");
  positive(cruise_gain, "cruise_gain");
  if (!(min_command < 0.0) || !(max_command > 0.0))
    throw ConfigError("controller command limits must bracket zero");
}

std::string_view to_string(PlannerMode m) noexcept {
  switch (m) {
    case PlannerMode::kACC: return "ACC";
    case PlannerMode::kCACC: return "CACC";
    case PlannerMode::kCACCu: return "CACCu";
  }
  return "?";
}

double acc_command(double e, double e_dot, const ControllerParams& p) {
  return p.kp * e + p.kd * e_dot;
}

double feedforward_step(double input, FilterState& state, double dt,
                        const ControllerParams& p) {
  const double decay = std::exp(-dt / p.ff_time_constant);
  state.y = input + (state.y - input) * decay;
  return state.y;
}

double cacc_command(double e, double e_dot, double leader_accel, FilterState& filter,
                    double dt, const ControllerParams& p) {
  return acc_command(e, e_dot, p) + feedforward_step(leader_accel, filter, dt, p);
}

double ovm_accel_estimate(double gap, double speed, double dv_lead,
                          const ControllerParams& p) {
  return p.ovm_alpha * (gap / p.ovm_headway - speed) + p.ovm_beta * dv_lead;
}

double OvmEstimator::step(double v_target, double v_ahead, double a_ahead, double dt,
                          const ControllerParams& p) {
  // d/dt of alpha (h/T - v) + beta (v_ahead - v), with dh/dt = v_ahead - v.
  const double rate = ovm_accel_estimate(v_ahead - v_target, estimate_,
                                         a_ahead - estimate_, p);
  estimate_ += rate * dt;
  return estimate_;
}

double caccu_command(double e, double e_dot, double /*second_leader_accel*/,
                     double estimated_first_leader_accel, FilterState& filter,
                     double dt, const ControllerParams& p) {
  return acc_command(e, e_dot, p) +
         feedforward_step(estimated_first_leader_accel, filter, dt, p);
}

PlannerMode select_planner(const Capabilities& caps, Connectivity first,
                           Connectivity second) {
  if (!caps.automated || !caps.connected) return PlannerMode::kACC;
  if (first == Connectivity::kConnected) return PlannerMode::kCACC;
  if (first == Connectivity::kUnconnected && second == Connectivity::kConnected &&
      caps.caccu_capable)
    return PlannerMode::kCACCu;
  return PlannerMode::kACC;
}

Planner::Planner(const ControllerParams& params) : params_(params) {
  params_.validate();
}

Planner::Output Planner::step(const Inputs& in, double dt) {
  if (in.mode != mode_) {
    mode_ = in.mode;
    filter_ = {};
    estimator_.reset();
  }

  const double cruise = params_.cruise_gain * (params_.cruise_speed - in.v_ego);
  if (!in.has_leader) {
    return {std::clamp(cruise, params_.min_command, params_.max_command),
            std::numeric_limits<double>::quiet_NaN()};
  }

  const double e = spacing_error(in.gap, in.v_ego, params_.time_headway);
  const double e_dot =
      spacing_error_rate(in.v_first, in.v_ego, in.a_ego, params_.time_headway);

  double u = 0.0;
  switch (mode_) {
    case PlannerMode::kACC:
      u = acc_command(e, e_dot, params_);
      break;
    case PlannerMode::kCACC:
      u = cacc_command(e, e_dot, in.a_first, filter_, dt, params_);
      break;
    case PlannerMode::kCACCu: {
      const double a_hat =
          estimator_.step(in.v_first, in.v_second, in.a_second, dt, params_);
      u = caccu_command(e, e_dot, in.a_second, a_hat, filter_, dt, params_);
      break;
    }
  }
  u = std::min(u, cruise);
  const double closing = in.v_ego - in.v_first;
  if (closing > 0.0 && in.gap < params_.emergency_ttc * closing) u = params_.min_command;
  return {std::clamp(u, params_.min_command, params_.max_command), e};
}

}  // namespace cavsim
