#include "cavsim/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>

#include "cavsim/csv.hpp"
#include "cavsim/error.hpp"
#include "cavsim/rng.hpp"

namespace cavsim {

namespace {

constexpr double kFeet = 0.3048;

struct Columns {
  const char* id;
  const char* frame;
  const char* lane;
  const char* position;
  const char* speed;
  double scale;
};

constexpr Columns kNative{"vehicle_id", "frame", "lane", "local_y_m", "speed_mps", 1.0};
constexpr Columns kNgsim{"Vehicle_ID", "Frame_ID", "Lane_ID", "Local_Y", "v_Vel", kFeet};

std::vector<TrajectoryRecord> parse_with(std::istream& in, const Columns& c) {
  const csv::Table t = csv::read(in);
  if (t.header.empty()) return {};
  const std::size_t ci = t.column(c.id), cf = t.column(c.frame), cl = t.column(c.lane),
                    cp = t.column(c.position), cs = t.column(c.speed);

  struct Row {
    TrajectoryRecord rec;
    std::size_t line;
  };
  std::vector<std::vector<Row>> groups;
  std::unordered_map<std::int64_t, std::size_t> group_of;

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const std::size_t line = r + 2;  // header is line 1
    TrajectoryRecord rec;
    rec.vehicle_id = csv::parse_int(f[ci], line, c.id);
    rec.frame = csv::parse_int(f[cf], line, c.frame);
    rec.lane = static_cast<int>(csv::parse_int(f[cl], line, c.lane));
    rec.position = csv::parse_double(f[cp], line, c.position) * c.scale;
    rec.speed = csv::parse_double(f[cs], line, c.speed) * c.scale;
    if (!std::isfinite(rec.position))
      throw ParseError("row " + std::to_string(line) + ": position must be finite", line,
                       c.position);
    if (!(rec.speed >= 0.0) || !std::isfinite(rec.speed))
      throw ParseError("row " + std::to_string(line) + ": speed must be finite and >= 0",
                       line, c.speed);
    auto [it, inserted] = group_of.try_emplace(rec.vehicle_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back({rec, line});
  }

  std::vector<TrajectoryRecord> out;
  out.reserve(t.rows.size());
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(),
                     [](const Row& a, const Row& b) { return a.rec.frame < b.rec.frame; });
    for (std::size_t k = 1; k < g.size(); ++k) {
      if (g[k].rec.frame != g[k - 1].rec.frame + 1)
        throw ParseError("row " + std::to_string(g[k].line) + ": vehicle " +
                             std::to_string(g[k].rec.vehicle_id) +
                             " frames are not contiguous",
                         g[k].line, c.frame);
    }
    for (const Row& row : g) out.push_back(row.rec);
  }
  return out;
}

}  // namespace

std::vector<TrajectoryRecord> parse_trajectories(std::istream& in) {
  return parse_with(in, kNative);
}

std::vector<TrajectoryRecord> parse_trajectories_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file '" + path + "'");
  // Detect the layout from the header.
  std::string header;
  std::getline(in, header);
  in.clear();
  in.seekg(0);
  if (header.find("Vehicle_ID") != std::string::npos) return parse_ngsim(in);
  return parse_trajectories(in);
}

std::vector<TrajectoryRecord> parse_ngsim(std::istream& in) { return parse_with(in, kNgsim); }

void write_trajectories(std::ostream& out, const std::vector<TrajectoryRecord>& records) {
  csv::write_row(out, {kNative.id, kNative.frame, kNative.lane, kNative.position,
                       kNative.speed});
  for (const auto& r : records)
    csv::write_row(out, {csv::format(r.vehicle_id), csv::format(r.frame),
                         csv::format(r.lane), csv::format(r.position),
                         csv::format(r.speed)});
}

std::vector<TrajectoryRecord> filter_lane_keepers(const std::vector<TrajectoryRecord>& records) {
  struct Info {
    std::int64_t first_frame;
    bool keeps_lane = true;
    int lane;
  };
  std::map<std::int64_t, Info> info;
  for (const auto& r : records) {
    auto [it, inserted] = info.try_emplace(r.vehicle_id, Info{r.frame, true, r.lane});
    if (!inserted) {
      it->second.first_frame = std::min(it->second.first_frame, r.frame);
      if (r.lane != it->second.lane) it->second.keeps_lane = false;
    }
  }
  std::vector<TrajectoryRecord> out;
  for (const auto& r : records)
    if (info.at(r.vehicle_id).keeps_lane) out.push_back(r);
  std::stable_sort(out.begin(), out.end(), [&](const TrajectoryRecord& a, const TrajectoryRecord& b) {
    const auto fa = info.at(a.vehicle_id).first_frame;
    const auto fb = info.at(b.vehicle_id).first_frame;
    if (fa != fb) return fa < fb;
    if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
    return a.frame < b.frame;
  });
  return out;
}

std::vector<SpeedSeries> speed_series(const std::vector<TrajectoryRecord>& records, int lane,
                                      std::int64_t first_frame, std::int64_t last_frame) {
  std::vector<SpeedSeries> out;
  for (const auto& r : records) {
    if (lane >= 0 && r.lane != lane) continue;
    if (r.frame < first_frame || r.frame > last_frame) continue;
    if (out.empty() || out.back().source != r.vehicle_id) out.push_back({r.vehicle_id, {}});
    out.back().speed.push_back(r.speed);
  }
  return out;
}

double LeadProfile::source_fraction() const {
  if (tag.empty()) return 0.0;
  const auto n = std::count_if(tag.begin(), tag.end(),
                               [](std::int64_t t) { return t != kBridgeTag; });
  return static_cast<double>(n) / static_cast<double>(tag.size());
}

std::vector<double> bridge(double from, double to, double dt, const BridgeLimits& limits) {
  if (!(dt > 0.0) || !(limits.accel > 0.0) || !(limits.jerk > 0.0))
    throw ConfigError("bridge: dt and limits must be positive");
  const double delta = to - from;
  const double mag = std::abs(delta);
  if (mag == 0.0) return {};

  // Ramp of nr steps, hold of nh steps: peak = mag / (dt (nr + nh)) must stay
  // under the accel cap, and peak / (nr dt) under the jerk cap.
  constexpr double kSlack = 1e-9;
  const double m_accel = std::ceil(mag / (dt * limits.accel) - kSlack);
  std::int64_t best_nr = 0, best_m = 0;
  for (std::int64_t nr = 1;; ++nr) {
    const double m_jerk = std::ceil(mag / (limits.jerk * static_cast<double>(nr) * dt * dt) - kSlack);
    const std::int64_t m = std::max<std::int64_t>(
        {nr, static_cast<std::int64_t>(m_accel), static_cast<std::int64_t>(m_jerk)});
    if (best_nr == 0 || nr + m < best_nr + best_m) {
      best_nr = nr;
      best_m = m;
    }
    if (nr >= best_nr + best_m) break;  // nr alone already exceeds the best total
  }
  const std::int64_t nr = best_nr, nh = best_m - best_nr;
  const double peak = delta / (dt * static_cast<double>(best_m));

  std::vector<double> accel;
  accel.reserve(static_cast<std::size_t>(2 * nr + nh));
  for (std::int64_t k = 1; k <= nr; ++k) accel.push_back(peak * static_cast<double>(k) / nr);
  for (std::int64_t k = 0; k < nh; ++k) accel.push_back(peak);
  for (std::int64_t k = nr - 1; k >= 1; --k) accel.push_back(peak * static_cast<double>(k) / nr);

  std::vector<double> out;
  out.reserve(accel.size());
  double v = from;
  for (double a : accel) {
    v += a * dt;
    out.push_back(v);
  }
  out.back() = to;  // the accelerations sum to delta; remove rounding drift
  return out;
}

LeadProfile extend_profile(const std::vector<SpeedSeries>& series, double target_duration,
                           double dt, const BridgeLimits& limits, double join_tolerance) {
  if (series.size() < 2) throw ExtensionError("extend_profile needs at least two series");
  if (!(target_duration > 0.0)) throw ExtensionError("target duration must be positive");
  const auto target = static_cast<std::size_t>(std::llround(target_duration / dt));

  LeadProfile out;
  out.dt = dt;
  const auto append = [&](double v, std::int64_t tag) {
    if (out.speed.size() < target) {
      out.speed.push_back(v);
      out.tag.push_back(tag);
    }
  };

  std::size_t start = 0;
  while (start < series.size() && series[start].speed.empty()) ++start;
  if (start == series.size()) throw ExtensionError("all series are empty");
  for (double v : series[start].speed) append(v, series[start].source);

  // A series never joins onto itself; the others are tried in cyclic order.
  std::size_t last_used = start;
  std::size_t next = (start + 1) % series.size();
  std::size_t misses = 0;
  while (out.speed.size() < target) {
    const std::size_t index = next;
    next = (next + 1) % series.size();
    if (index == last_used) continue;
    const SpeedSeries& s = series[index];
    const double end = out.speed.back();

    std::size_t first = s.speed.size(), last = 0;
    for (std::size_t k = 0; k < s.speed.size(); ++k) {
      if (std::abs(s.speed[k] - end) <= join_tolerance) {
        first = std::min(first, k);
        last = k;
      }
    }
    if (first == s.speed.size()) {
      if (++misses >= series.size() - 1)
        throw ExtensionError("no series joins the profile within the speed tolerance");
      continue;
    }
    misses = 0;
    last_used = index;
    for (double v : bridge(end, s.speed[first], dt, limits)) append(v, kBridgeTag);
    for (std::size_t k = first; k <= last; ++k) append(s.speed[k], s.source);
  }
  return out;
}

LeadProfile synthesize_profile(double duration, double dt, std::uint64_t seed,
                               const SyntheticProfileParams& p) {
  if (!(duration > 0.0) || !(dt > 0.0)) throw ConfigError("profile duration and dt must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  LeadProfile out;
  out.dt = dt;
  out.speed.reserve(n);
  Rng rng(seed);

  const double lo = std::min(p.min_speed, p.mean_speed);
  const double hi = std::max(p.max_speed, p.mean_speed);
  double v = p.mean_speed;
  while (out.speed.size() < n) {
    const double cruise = rng.uniform(p.cruise_min, p.cruise_max);
    const auto cruise_steps = static_cast<std::size_t>(std::llround(cruise / dt));
    for (std::size_t k = 0; k < cruise_steps && out.speed.size() < n; ++k) out.speed.push_back(v);
    if (p.speed_spread <= 0.0) continue;
    const double next = std::clamp(rng.normal(p.mean_speed, p.speed_spread), lo, hi);
    for (double s : bridge(v, next, dt, p.limits)) {
      if (out.speed.size() >= n) break;
      out.speed.push_back(s);
    }
    v = next;
  }
  out.tag.assign(out.speed.size(), 0);
  return out;
}

}  // namespace cavsim
