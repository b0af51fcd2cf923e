#include "cavsim/human_driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cavsim/error.hpp"

namespace cavsim {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw ConfigError(std::string("human parameter '") + name +
                      "' must be positive and finite");
}

void require_nonnegative(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw ConfigError(std::string("human parameter '") + name +
                      "' must be non-negative and finite");
}

}  // namespace

void HumanParams::validate() const {
  require_positive(desired_speed, "desired_speed");
  require_positive(min_gap, "min_gap");
  require_positive(max_accel, "max_accel");
  require_positive(comfort_decel, "comfort_decel");
  require_positive(emergency_decel, "emergency_decel");
  require_positive(time_headway, "time_headway");
  require_nonnegative(reaction_delay, "reaction_delay");
  require_positive(ttc_threshold, "ttc_threshold");
  require_nonnegative(distance_error_cv, "distance_error_cv");
  require_nonnegative(approach_rate_sd, "approach_rate_sd");
  require_positive(error_persistence, "error_persistence");
}

double idm_desired_gap(double speed, double dv, const HumanParams& p) {
  const double dynamic = speed * p.time_headway +
                         speed * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
  return p.min_gap + std::max(dynamic, 0.0);
}

double idm_accel(double speed, double gap, double dv, const HumanParams& p) {
  if (!(gap > 0.0))
    throw DomainError("idm_accel: non-positive gap " + std::to_string(gap));
  const double free = std::pow(speed / p.desired_speed, 4);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    const double ratio = idm_desired_gap(speed, dv, p) / gap;
    interaction = ratio * ratio;
  }
  return p.max_accel * (1.0 - free - interaction);
}

double idm_equilibrium_gap(double speed, const HumanParams& p) {
  const double free = std::pow(speed / p.desired_speed, 4);
  if (free >= 1.0) return std::numeric_limits<double>::infinity();
  return (p.min_gap + speed * p.time_headway) / std::sqrt(1.0 - free);
}

double time_to_collision(double gap, double v_ego, double v_lead) {
  if (v_lead < v_ego) return gap / (v_ego - v_lead);
  return std::numeric_limits<double>::infinity();
}

double advance_wiener(double w, double dt, double persistence, Rng& rng) {
  return std::exp(-dt / persistence) * w +
         std::sqrt(2.0 * dt / persistence) * rng.normal();
}

Perception perceive(double gap, double dv, const PerceptionState& state,
                    double dt, const HumanParams& p, Rng& rng) {
  Perception out;
  out.gap = gap * std::exp(p.distance_error_cv * state.distance_error);
  out.dv = dv + gap * p.approach_rate_sd * state.speed_error;
  out.next.distance_error =
      advance_wiener(state.distance_error, dt, p.error_persistence, rng);
  out.next.speed_error =
      advance_wiener(state.speed_error, dt, p.error_persistence, rng);
  return out;
}

HumanDriver::HumanDriver(const HumanParams& params, double dt)
    : params_(params),
      dt_(dt),
      delay_steps_(static_cast<std::size_t>(std::llround(params.reaction_delay / dt))),
      history_(delay_steps_ + 1) {
  params_.validate();
  if (!(dt > 0.0)) throw ConfigError("HumanDriver: dt must be positive");
}

double HumanDriver::step(const std::optional<LeaderView>& leader, double v_ego,
                         bool exact_perception, Rng& rng) {
  Sample sample{std::numeric_limits<double>::infinity(), 0.0};
  if (leader) {
    const double dv = v_ego - leader->speed;
    const Perception seen = perceive(leader->gap, dv, perception_, dt_, params_, rng);
    perception_ = seen.next;
    if (exact_perception) {
      sample.gap = leader->gap;
      sample.dv = dv;
    } else {
      sample.gap = seen.gap;
      sample.dv = seen.dv;
    }
  } else {
    // Keep the error processes running so the stream position does not
    // depend on whether a leader happens to be visible.
    perception_.distance_error =
        advance_wiener(perception_.distance_error, dt_, params_.error_persistence, rng);
    perception_.speed_error =
        advance_wiener(perception_.speed_error, dt_, params_.error_persistence, rng);
  }

  history_[head_] = sample;
  head_ = (head_ + 1) % history_.size();
  filled_ = std::min(filled_ + 1, history_.size());

  last_emergency_ = false;
  if (leader && time_to_collision(leader->gap, v_ego, leader->speed) <
                    params_.ttc_threshold) {
    last_emergency_ = true;
    return -params_.emergency_decel;
  }

  // Oldest retained sample: exactly delay_steps_ ago once the buffer is
  // full, the first recorded sample during warm-up.
  const Sample& delayed =
      filled_ == history_.size() ? history_[head_] : history_[0];
  const double gap = std::max(delayed.gap, 1e-3);
  const double accel = idm_accel(v_ego, gap, delayed.dv, params_);
  return std::clamp(accel, -params_.emergency_decel, params_.max_accel);
}

}  // namespace cavsim
