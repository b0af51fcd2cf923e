#include "cavsim/svis.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "cavsim/error.hpp"

namespace cavsim {

SensorNoise SensorNoise::with_radar_scaled(double factor) const {
  SensorNoise out = *this;
  out.radar_dist_sd *= factor;
  out.radar_speed_sd *= factor;
  return out;
}

MatchRegions derive_thresholds(double alpha1, double alpha2) {
  const auto check = [](double a, const char* name) {
    if (!(a > 0.0 && a < 1.0))
      throw DomainError(std::string(name) + " must lie in (0, 1), got " + std::to_string(a));
  };
  check(alpha1, "alpha1");
  check(alpha2, "alpha2");
  MatchRegions r;
  r.alpha1 = alpha1;
  r.alpha2 = alpha2;
  r.pos_threshold = boost::math::quantile(boost::math::chi_squared(2.0), 1.0 - alpha1);
  r.speed_threshold = boost::math::quantile(boost::math::chi_squared(1.0), 1.0 - alpha2);
  return r;
}

RelativeMeasurement synthesize_radar(const RelativeMeasurement& truth,
                                     const SensorNoise& noise, Rng& rng) {
  RelativeMeasurement m;
  m.dx = truth.dx + noise.radar_dist_sd * rng.normal();
  m.dy = truth.dy + noise.radar_dist_sd * rng.normal();
  m.dv = truth.dv + noise.radar_speed_sd * rng.normal();
  return m;
}

GpsMessage synthesize_gps(VehicleId sender, double x, double y, double v,
                          const SensorNoise& noise, Rng& rng) {
  GpsMessage g;
  g.sender = sender;
  g.x = x + noise.gps_dist_sd * rng.normal();
  g.y = y + noise.gps_dist_sd * rng.normal();
  g.v = v + noise.gps_speed_sd * rng.normal();
  return g;
}

bool region_test(const RelativeMeasurement& radar, const RelativeMeasurement& gps,
                 const MatchRegions& regions, const SensorNoise& noise) {
  const double sd_pos = std::hypot(noise.gps_dist_sd, noise.radar_dist_sd);
  const double sd_v = std::hypot(noise.gps_speed_sd, noise.radar_speed_sd);
  const double zx = (gps.dx - radar.dx) / sd_pos;
  const double zy = (gps.dy - radar.dy) / sd_pos;
  const double dv = gps.dv - radar.dv;
  const double zv2 = sd_v > 0.0 ? (dv / sd_v) * (dv / sd_v) : (dv == 0.0 ? 0.0 : HUGE_VAL);
  return zx * zx + zy * zy < regions.pos_threshold && zv2 < regions.speed_threshold;
}

IdentificationState make_identification(int inner_steps, int outer_windows) {
  if (inner_steps < 1 || outer_windows < 1)
    throw ConfigError("identification needs n >= 1 and k >= 1");
  IdentificationState s;
  s.inner_target = inner_steps;
  s.outer_target = outer_windows;
  return s;
}

void identification_step(IdentificationState& s, std::span<const VehicleId> matches,
                         double dt) {
  if (s.verdict != Connectivity::kPending)
    throw StateError("identification_step called after a verdict");
  s.elapsed += dt;

  std::vector<VehicleId> now(matches.begin(), matches.end());
  std::sort(now.begin(), now.end());
  if (s.window_step == 0) {
    s.survivors = std::move(now);
  } else {
    std::vector<VehicleId> kept;
    std::set_intersection(s.survivors.begin(), s.survivors.end(), now.begin(), now.end(),
                          std::back_inserter(kept));
    s.survivors = std::move(kept);
  }
  ++s.window_step;
  if (s.window_step < s.inner_target) return;

  if (s.survivors.size() == 1) {
    s.verdict = Connectivity::kConnected;
    s.matched = s.survivors.front();
    return;
  }
  s.window_step = 0;
  s.survivors.clear();
  if (++s.failed_windows >= s.outer_target) s.verdict = Connectivity::kUnconnected;
}

SensorNoise slot_noise(Slot slot, const SvisParams& params) {
  return slot == Slot::kSecond
             ? params.noise.with_radar_scaled(params.second_slot_factor)
             : params.noise;
}

SlotTracker::SlotTracker(Slot slot, const SvisParams& params)
    : slot_(slot),
      inner_(slot == Slot::kSecond ? params.inner_steps * params.second_slot_factor
                                   : params.inner_steps),
      outer_(params.outer_windows),
      cooldown_total_(params.retry_cooldown) {
  state_ = make_identification(inner_, outer_);
}

void SlotTracker::restart() {
  state_ = make_identification(inner_, outer_);
}

bool SlotTracker::retarget(std::optional<VehicleId> target) {
  if (target == target_) return false;
  target_ = target;
  restart();
  cooldown_left_ = 0.0;
  resolved_after_.reset();
  standing_ = Connectivity::kPending;
  return true;
}

bool SlotTracker::scanning() const noexcept {
  return target_.has_value() && state_.verdict == Connectivity::kPending &&
         cooldown_left_ <= 0.0;
}

void SlotTracker::observe(std::span<const VehicleId> matches, double dt) {
  identification_step(state_, matches, dt);
  if (state_.verdict == Connectivity::kPending) return;
  resolved_after_ = state_.elapsed;
  standing_ = state_.verdict;
  if (state_.verdict == Connectivity::kUnconnected) cooldown_left_ = cooldown_total_;
}

void SlotTracker::idle(double dt) {
  if (!target_ || state_.verdict != Connectivity::kUnconnected) return;
  cooldown_left_ -= dt;
  // Small tolerance so a cool-down of whole steps ends on the intended step.
  if (cooldown_left_ <= 1e-9) {
    cooldown_left_ = 0.0;
    restart();
  }
}

Connectivity SlotTracker::verdict() const noexcept {
  if (!target_) return Connectivity::kPending;
  return standing_;
}

EpisodeResult run_identification_episode(const std::vector<RelativeMeasurement>& candidates,
                                         std::size_t target_index, bool target_connected,
                                         Slot slot, const SvisParams& params, Rng& rng,
                                         std::size_t max_steps, double dt) {
  if (target_index >= candidates.size()) throw LookupError("episode target out of range");
  const SensorNoise noise = slot_noise(slot, params);
  IdentificationState state = make_identification(
      slot == Slot::kSecond ? params.inner_steps * params.second_slot_factor
                            : params.inner_steps,
      params.outer_windows);

  std::vector<VehicleId> matches;
  matches.reserve(candidates.size());
  for (std::size_t step = 0; step < max_steps; ++step) {
    const RelativeMeasurement radar = synthesize_radar(candidates[target_index], noise, rng);
    matches.clear();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (i == target_index && !target_connected) continue;
      const GpsMessage g = synthesize_gps(VehicleId{static_cast<std::uint32_t>(i)},
                                          candidates[i].dx, candidates[i].dy,
                                          candidates[i].dv, noise, rng);
      if (region_test(radar, {g.x, g.y, g.v}, params.regions, noise))
        matches.push_back(g.sender);
    }
    identification_step(state, matches, dt);
    if (state.verdict != Connectivity::kPending) break;
  }

  EpisodeResult out;
  out.verdict = state.verdict;
  out.time = state.elapsed;
  if (state.matched) out.matched_index = state.matched->index();
  return out;
}

}  // namespace cavsim
