#include "cavsim/simulation.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "cavsim/csv.hpp"
#include "cavsim/error.hpp"
#include "cavsim/rng.hpp"

namespace cavsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kSlots = 4;
constexpr std::size_t kMaxPlatoonScan = 64;

constexpr std::size_t slot_index(Slot s) { return static_cast<std::size_t>(s); }

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

std::string_view mode_name(std::int8_t mode) {
  if (mode == kHumanMode) return "human";
  return to_string(static_cast<PlannerMode>(mode));
}

std::int8_t parse_mode(std::string_view s, std::size_t row) {
  if (s == "human") return kHumanMode;
  if (s == "ACC") return static_cast<std::int8_t>(PlannerMode::kACC);
  if (s == "CACC") return static_cast<std::int8_t>(PlannerMode::kCACC);
  if (s == "CACCu") return static_cast<std::int8_t>(PlannerMode::kCACCu);
  throw ParseError("row " + std::to_string(row) + ": unknown mode '" + std::string(s) + "'",
                   row, "mode");
}

Connectivity parse_verdict(std::string_view s, std::size_t row, const char* column) {
  for (Connectivity c : {Connectivity::kPending, Connectivity::kConnected,
                         Connectivity::kUnconnected})
    if (to_string(c) == s) return c;
  throw ParseError("row " + std::to_string(row) + ": unknown verdict '" + std::string(s) + "'",
                   row, column);
}

// Runs body(i) for i in [0, n), in parallel when requested. Bodies only
// write state owned by index i, so the schedule cannot change results.
template <class F>
void for_each_index(ExecutionPolicy policy, std::size_t n, F&& body) {
  const auto count = static_cast<std::int64_t>(n);
  if (policy == ExecutionPolicy::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  }
}

}  // namespace

Capabilities CapabilityMask::apply(Capabilities c) const noexcept {
  if (!c.automated) return c;
  if (disable_connectivity) c.connected = false;
  if (disable_connectivity || disable_caccu) c.caccu_capable = false;
  if (disable_connectivity || disable_caccu || disable_lane_change) c.lc_capable = false;
  return c;
}

void ScenarioConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  const double steps = duration / dt;
  if (std::abs(steps - std::round(steps)) > 1e-6)
    throw ConfigError("duration must be a multiple of dt");
  if (!(warmup >= 0.0)) throw ConfigError("warmup must be non-negative");
  if (lanes < 1) throw ConfigError("lanes must be at least 1");
  if (!(vehicle_length > 0.0)) throw ConfigError("vehicle_length must be positive");
  if (!(road_length > 0.0)) throw ConfigError("road_length must be positive");
  fleet.validate();
  fleet_options.driver.validate();
  fleet_options.controller.validate();
  if (!(fleet_options.headway_min > 0.0) ||
      !(fleet_options.headway_max >= fleet_options.headway_min))
    throw ConfigError("driver headway range must satisfy 0 < min <= max");
  if (!(automated_dynamics.time_constant > 0.0))
    throw ConfigError("automated powertrain time constant must be positive");
  mobil.validate();
  fuel.validate();
  if (svis.inner_steps < 1 || svis.outer_windows < 1 || svis.second_slot_factor < 1)
    throw ConfigError("svis n, k and second-slot factor must be at least 1");
  for (const auto& p : lead_profiles) {
    if (p.speed.empty()) throw ConfigError("lead profile is empty");
    if (std::abs(p.dt - dt) > 1e-12) throw ConfigError("lead profile dt differs from scenario dt");
  }
}

std::int64_t ScenarioConfig::steps() const { return std::llround(duration / dt); }

bool operator==(const LogRow& a, const LogRow& b) {
  return a.step == b.step && a.vehicle == b.vehicle && a.lane == b.lane && a.mode == b.mode &&
         a.lc_event == b.lc_event && a.first == b.first && a.second == b.second &&
         same_bits(a.position, b.position) && same_bits(a.speed, b.speed) &&
         same_bits(a.accel, b.accel) && same_bits(a.command, b.command) &&
         same_bits(a.spacing_error, b.spacing_error);
}

void TrajectoryLog::write_csv(std::ostream& out) const {
  csv::write_row(out, {"step", "vehicle", "lane", "x", "v", "a", "u", "mode", "first",
                       "second", "lc", "e"});
  for (const LogRow& r : rows) {
    csv::write_row(out, {csv::format(r.step), csv::format(static_cast<std::int64_t>(r.vehicle)),
                         csv::format(static_cast<std::int64_t>(r.lane)),
                         csv::format(r.position), csv::format(r.speed), csv::format(r.accel),
                         csv::format(r.command), std::string(mode_name(r.mode)),
                         std::string(to_string(r.first)), std::string(to_string(r.second)),
                         csv::format(static_cast<std::int64_t>(r.lc_event)),
                         csv::format(r.spacing_error)});
  }
}

TrajectoryLog TrajectoryLog::read_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  TrajectoryLog log;
  if (t.header.empty()) return log;
  const std::array<const char*, 12> names{"step", "vehicle", "lane", "x",     "v",  "a",
                                          "u",    "mode",    "first", "second", "lc", "e"};
  std::array<std::size_t, 12> col{};
  for (std::size_t k = 0; k < names.size(); ++k) col[k] = t.column(names[k]);
  std::uint32_t max_vehicle = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const std::size_t line = r + 2;
    LogRow row{};
    row.step = csv::parse_int(f[col[0]], line, "step");
    row.vehicle = static_cast<std::uint32_t>(csv::parse_int(f[col[1]], line, "vehicle"));
    row.lane = static_cast<std::int16_t>(csv::parse_int(f[col[2]], line, "lane"));
    row.position = csv::parse_double(f[col[3]], line, "x");
    row.speed = csv::parse_double(f[col[4]], line, "v");
    row.accel = csv::parse_double(f[col[5]], line, "a");
    row.command = csv::parse_double(f[col[6]], line, "u");
    row.mode = parse_mode(f[col[7]], line);
    row.first = parse_verdict(f[col[8]], line, "first");
    row.second = parse_verdict(f[col[9]], line, "second");
    row.lc_event = static_cast<std::int8_t>(csv::parse_int(f[col[10]], line, "lc"));
    row.spacing_error = csv::parse_double(f[col[11]], line, "e");
    max_vehicle = std::max(max_vehicle, row.vehicle);
    log.rows.push_back(row);
  }
  log.vehicles = log.rows.empty() ? 0 : max_vehicle + 1;
  return log;
}

struct Simulation::Impl {
  struct Vehicle {
    VehicleProfile profile;
    bool is_lead = false;
    std::optional<HumanDriver> driver;
    std::optional<Planner> planner;
    std::optional<ActuationBuffer> actuation;
    std::array<std::optional<SlotTracker>, kSlots> trackers;
    Rng perception;
    Rng gps_rng;
    std::array<Rng, kSlots> radar;
    double lc_cooldown = 0.0;
    std::vector<VehicleId> matches;  // scratch
    // Outputs of the current step.
    double command = 0.0;
    std::int8_t mode = kHumanMode;
    double spacing_error = kNaN;
    std::int8_t lc_event = 0;
    // Pending lane-change decision.
    LaneChoice choice = LaneChoice::kStay;
    LaneNeighbors decided_neighbors;
  };

  ScenarioConfig config;
  std::size_t n_followers = 0;
  World world;
  std::vector<Vehicle> vehicles;
  std::vector<VehicleProfile> fleet;
  std::vector<HumanParams> idm_table;  // car-following model used for MOBIL predictions
  std::vector<LeadProfile> leads;
  std::vector<VehicleState> snapshot;
  std::vector<GpsMessage> gps;        // indexed by vehicle; valid when connected
  std::vector<VehicleId> broadcasters;  // connected vehicles sorted by position
  MetricsAccumulator metrics;
  TrajectoryLog log;
  std::int64_t step_index = 0;
  std::int64_t total_steps = 0;
  std::optional<CollisionInfo> collision;

  explicit Impl(ScenarioConfig cfg)
      : config(std::move(cfg)),
        world(config.lanes, config.vehicle_length),
        metrics({}, 0, config.dt, config.fuel) {
    config.validate();
    total_steps = config.steps();
    n_followers = config.fleet.n_vehicles;
    fleet = compose_fleet(config.fleet, config.seed, config.fleet_options);
    for (auto& p : fleet) p.caps = config.mask.apply(p.caps);
    build_leads();
    place_vehicles();

    std::vector<bool> automated(n_followers);
    for (std::size_t i = 0; i < n_followers; ++i) automated[i] = fleet[i].caps.automated;
    metrics = MetricsAccumulator(std::move(automated),
                                 std::llround(config.warmup / config.dt), config.dt,
                                 config.fuel);
    log.vehicles = n_followers;
    if (config.record_log)
      log.rows.reserve(static_cast<std::size_t>(total_steps) * n_followers);
    retarget_all();
  }

  void build_leads() {
    const auto lanes = static_cast<std::size_t>(config.lanes);
    leads.clear();
    if (config.lead_profiles.empty()) {
      for (std::size_t l = 0; l < lanes; ++l)
        leads.push_back(synthesize_profile(
            config.duration + config.dt, config.dt,
            derive_seed(config.seed, static_cast<std::uint64_t>(Stream::kLeadProfile), l),
            config.synthetic_lead));
    } else {
      for (std::size_t l = 0; l < lanes; ++l)
        leads.push_back(config.lead_profiles[l % config.lead_profiles.size()]);
    }
  }

  double equilibrium_gap(const VehicleProfile& p, double v) const {
    double gap = p.caps.automated ? p.controller.time_headway * v
                                  : idm_equilibrium_gap(v, p.driver);
    if (!std::isfinite(gap))
      throw ConfigError("lead initial speed leaves no finite equilibrium gap");
    // Keep standstill placements from overlapping.
    return std::max(gap, p.caps.automated ? 1.0 : p.driver.min_gap);
  }

  void place_vehicles() {
    const auto lanes = static_cast<std::size_t>(config.lanes);
    const double len = config.vehicle_length;

    // Offsets behind each lead (lead at 0), round-robin by follower index.
    std::vector<double> offset(n_followers);
    std::vector<double> tail(lanes, 0.0);
    for (std::size_t k = 0; k < n_followers; ++k) {
      const std::size_t lane = k % lanes;
      const double v0 = leads[lane].speed.front();
      tail[lane] -= len + equilibrium_gap(fleet[k], v0);
      offset[k] = tail[lane];
    }
    const double span = -*std::min_element(tail.begin(), tail.end()) + len;
    if (span > config.road_length)
      throw ConfigError("road segment too short to place the fleet (" + std::to_string(span) +
                        " m needed)");
    const double lead_x = span;

    vehicles.resize(n_followers + lanes);
    idm_table.resize(n_followers + lanes);
    for (std::size_t k = 0; k < n_followers; ++k) {
      const std::size_t lane = k % lanes;
      world.add({lead_x + offset[k], leads[lane].speed.front(), 0.0, static_cast<int>(lane)});
    }
    for (std::size_t l = 0; l < lanes; ++l)
      world.add({lead_x, leads[l].speed.front(), 0.0, static_cast<int>(l)});
    world.reindex();

    const ControllerParams& ctl = config.fleet_options.controller;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      Vehicle& v = vehicles[i];
      if (i < n_followers) {
        v.profile = fleet[i];
      } else {
        v.is_lead = true;
        v.profile.id = VehicleId{static_cast<std::uint32_t>(i)};
        v.profile.vehicle_class = config.lead_connected ? VehicleClass::kCHV : VehicleClass::kTHV;
        v.profile.caps = capabilities_of(v.profile.vehicle_class);
        v.profile.driver = config.fleet_options.driver;
        v.profile.controller = ctl;
      }
      const Capabilities& caps = v.profile.caps;
      v.perception = make_stream(config.seed, Stream::kPerception, i);
      v.gps_rng = make_stream(config.seed, Stream::kGps, i);
      for (std::size_t s = 0; s < kSlots; ++s)
        v.radar[s] = make_stream(config.seed, Stream::kRadar, i * kSlots + s);

      idm_table[i] = v.profile.driver;
      if (caps.automated) idm_table[i].time_headway = v.profile.controller.time_headway;

      if (v.is_lead) continue;
      if (caps.automated) {
        v.planner.emplace(v.profile.controller);
        v.actuation.emplace(config.automated_dynamics, config.dt);
        v.mode = static_cast<std::int8_t>(PlannerMode::kACC);
        if (caps.connected) {
          v.trackers[slot_index(Slot::kFirst)].emplace(Slot::kFirst, config.svis);
          v.trackers[slot_index(Slot::kSecond)].emplace(Slot::kSecond, config.svis);
          if (caps.lc_capable) {
            v.trackers[slot_index(Slot::kLeft)].emplace(Slot::kLeft, config.svis);
            v.trackers[slot_index(Slot::kRight)].emplace(Slot::kRight, config.svis);
          }
        }
      } else {
        v.driver.emplace(v.profile.driver, config.dt);
        v.actuation.emplace(config.human_dynamics, config.dt);
      }
    }
  }

  bool connected(VehicleId id) const { return vehicles[id.index()].profile.caps.connected; }

  // Radar target of a slot on the current topology, within radar range.
  std::optional<VehicleId> slot_target(VehicleId ego, Slot slot) const {
    std::optional<VehicleId> t;
    switch (slot) {
      case Slot::kFirst: t = world.first_preceding(ego); break;
      case Slot::kSecond: t = world.second_preceding(ego); break;
      case Slot::kLeft: t = world.adjacent_lane_neighbors(ego, Side::kLeft).leader; break;
      case Slot::kRight: t = world.adjacent_lane_neighbors(ego, Side::kRight).leader; break;
    }
    if (t && world.state(*t).position - world.state(ego).position > config.svis.radar_range)
      t.reset();
    return t;
  }

  void retarget_all() {
    for (std::size_t i = 0; i < n_followers; ++i) {
      for (std::size_t s = 0; s < kSlots; ++s) {
        auto& tr = vehicles[i].trackers[s];
        if (tr) tr->retarget(slot_target(VehicleId{static_cast<std::uint32_t>(i)}, tr->slot()));
      }
    }
  }

  Connectivity verdict(std::size_t i, Slot slot) const {
    const auto& tr = vehicles[i].trackers[slot_index(slot)];
    if (!tr) return Connectivity::kPending;
    if (config.perfect_identification) {
      if (!tr->target()) return Connectivity::kPending;
      return connected(*tr->target()) ? Connectivity::kConnected : Connectivity::kUnconnected;
    }
    return tr->verdict();
  }

  // Vehicle whose broadcast a Connected verdict points at.
  std::optional<VehicleId> matched(std::size_t i, Slot slot) const {
    const auto& tr = vehicles[i].trackers[slot_index(slot)];
    if (!tr) return std::nullopt;
    if (config.perfect_identification) return tr->target();
    return tr->matched();
  }

  // (1) Broadcasts from the snapshot.
  void broadcast() {
    gps.resize(vehicles.size());
    for_each_index(config.policy, vehicles.size(), [&](std::size_t i) {
      Vehicle& v = vehicles[i];
      if (!v.profile.caps.connected) return;
      const VehicleState& s = snapshot[i];
      gps[i] = synthesize_gps(VehicleId{static_cast<std::uint32_t>(i)}, s.position,
                              s.lane * config.svis.lane_width, s.speed, config.svis.noise,
                              v.gps_rng);
    });
    broadcasters.clear();
    for (std::size_t i = 0; i < vehicles.size(); ++i)
      if (vehicles[i].profile.caps.connected)
        broadcasters.push_back(VehicleId{static_cast<std::uint32_t>(i)});
    std::sort(broadcasters.begin(), broadcasters.end(), [&](VehicleId a, VehicleId b) {
      const double xa = snapshot[a.index()].position, xb = snapshot[b.index()].position;
      return xa != xb ? xa < xb : a < b;
    });
  }

  // (2) Identification.
  void identify() {
    if (config.perfect_identification) {
      retarget_all();
      return;
    }
    for_each_index(config.policy, n_followers, [&](std::size_t i) {
      Vehicle& v = vehicles[i];
      const VehicleId ego{static_cast<std::uint32_t>(i)};
      const VehicleState& e = snapshot[i];
      for (std::size_t s = 0; s < kSlots; ++s) {
        auto& tr = v.trackers[s];
        if (!tr) continue;
        tr->retarget(slot_target(ego, tr->slot()));
        if (!tr->scanning()) {
          tr->idle(config.dt);
          continue;
        }
        const VehicleState& t = snapshot[tr->target()->index()];
        const SensorNoise noise = slot_noise(tr->slot(), config.svis);
        const RelativeMeasurement truth{t.position - e.position,
                                        (t.lane - e.lane) * config.svis.lane_width,
                                        t.speed - e.speed};
        const RelativeMeasurement radar = synthesize_radar(truth, noise, v.radar[s]);

        v.matches.clear();
        const double lo = e.position - config.svis.comm_range;
        const double hi = e.position + config.svis.comm_range;
        auto it = std::lower_bound(broadcasters.begin(), broadcasters.end(), lo,
                                   [&](VehicleId b, double x) {
                                     return snapshot[b.index()].position < x;
                                   });
        for (; it != broadcasters.end() && snapshot[it->index()].position <= hi; ++it) {
          if (*it == ego) continue;
          const GpsMessage& g = gps[it->index()];
          const RelativeMeasurement rel{g.x - e.position, g.y - e.lane * config.svis.lane_width,
                                        g.v - e.speed};
          if (region_test(radar, rel, config.svis.regions, noise)) v.matches.push_back(*it);
        }
        tr->observe(v.matches, config.dt);
      }
    });
  }

  // Connected run ahead of the ego in a lane, starting with the lane's
  // first leader, as far as the ego can vouch for it: each automated
  // connected member vouches for its own leader through its verdict.
  int platoon_in(std::size_t ego, Slot slot, VehicleId first) const {
    std::array<bool, kMaxPlatoonScan> chain{};
    std::size_t n = 0;
    chain[n++] = verdict(ego, slot) == Connectivity::kConnected;
    VehicleId cur = first;
    while (chain[n - 1] && n < kMaxPlatoonScan) {
      const auto ahead = world.first_preceding(cur);
      if (!ahead) break;
      const Vehicle& v = vehicles[cur.index()];
      const Capabilities& c = v.profile.caps;
      if (!(c.automated && c.connected) || v.is_lead) break;
      chain[n++] = verdict(cur.index(), Slot::kFirst) == Connectivity::kConnected &&
                   matched(cur.index(), Slot::kFirst) == ahead;
      cur = *ahead;
    }
    return platoon_size(std::span<const bool>(chain.data(), n));
  }

  void decide_lane_changes() {
    for_each_index(config.policy, n_followers, [&](std::size_t i) {
      Vehicle& v = vehicles[i];
      v.choice = LaneChoice::kStay;
      if (!v.profile.caps.lc_capable) return;
      if (v.lc_cooldown > 1e-9) return;
      const Connectivity first = verdict(i, Slot::kFirst);
      if (first == Connectivity::kPending) return;
      const VehicleId ego{static_cast<std::uint32_t>(i)};
      const VehicleState& e = world.state(ego);

      const auto option = [&](Side side, Slot slot) {
        SideOption o;
        const int lane = e.lane + lane_offset(side);
        if (lane < 0 || lane >= config.lanes) return o;
        const LaneNeighbors nb = world.adjacent_lane_neighbors(ego, side);
        if (!nb.leader) return o;
        if (world.state(*nb.leader).position - e.position > config.svis.radar_range) return o;
        const auto& tr = v.trackers[slot_index(slot)];
        if (!tr || tr->target() != nb.leader) return o;
        o.exists = true;
        o.leader_connected = verdict(i, slot) == Connectivity::kConnected;
        if (!o.leader_connected) return o;
        o.platoon = platoon_in(i, slot, *nb.leader);
        o.accels = predicted_accels(world, ego, side, idm_table);
        return o;
      };

      const bool current_connected = first == Connectivity::kConnected;
      if (current_connected) return;
      const SideOption left = option(Side::kLeft, Slot::kLeft);
      const SideOption right = option(Side::kRight, Slot::kRight);
      v.choice = lc_decide(current_connected, left, right, config.mobil);
      if (v.choice != LaneChoice::kStay)
        v.decided_neighbors = world.adjacent_lane_neighbors(
            ego, v.choice == LaneChoice::kLeft ? Side::kLeft : Side::kRight);
    });
  }

  // (3) Execute front to back; a move aborts when its neighborhood changed.
  bool execute_lane_changes() {
    std::vector<std::size_t> movers;
    for (std::size_t i = 0; i < n_followers; ++i)
      if (vehicles[i].choice != LaneChoice::kStay) movers.push_back(i);
    if (movers.empty()) return false;
    std::sort(movers.begin(), movers.end(), [&](std::size_t a, std::size_t b) {
      const double xa = world.states()[a].position, xb = world.states()[b].position;
      return xa != xb ? xa > xb : a < b;
    });
    bool any = false;
    for (std::size_t i : movers) {
      Vehicle& v = vehicles[i];
      const VehicleId ego{static_cast<std::uint32_t>(i)};
      const Side side = v.choice == LaneChoice::kLeft ? Side::kLeft : Side::kRight;
      v.choice = LaneChoice::kStay;
      const LaneNeighbors now = world.adjacent_lane_neighbors(ego, side);
      if (now.leader != v.decided_neighbors.leader ||
          now.follower != v.decided_neighbors.follower)
        continue;
      if (now.leader && !(world.gap(ego, *now.leader) > 0.0)) continue;
      if (now.follower && !(world.gap(*now.follower, ego) > 0.0)) continue;
      world.mutable_state(ego).lane += lane_offset(side);
      world.reindex();
      v.lc_cooldown = config.mobil.cooldown;
      v.lc_event = static_cast<std::int8_t>(lane_offset(side));
      metrics.count_lane_change();
      any = true;
    }
    return any;
  }

  // (4) Automated commands.
  void plan() {
    const double range = config.svis.radar_range;
    for_each_index(config.policy, n_followers, [&](std::size_t i) {
      Vehicle& v = vehicles[i];
      if (!v.planner) return;
      const VehicleId ego{static_cast<std::uint32_t>(i)};
      const VehicleState& e = snapshot[i];
      const PlannerMode mode =
          select_planner(v.profile.caps, verdict(i, Slot::kFirst), verdict(i, Slot::kSecond));

      Planner::Inputs in{};
      in.mode = mode;
      in.v_ego = e.speed;
      in.a_ego = e.accel;
      const auto first = world.first_preceding(ego);
      if (first) {
        const double gap = snapshot[first->index()].position - config.vehicle_length - e.position;
        if (gap <= range) {
          in.has_leader = true;
          in.gap = gap;
          in.v_first = snapshot[first->index()].speed;
        }
      }
      if (mode == PlannerMode::kCACC) {
        const auto m = matched(i, Slot::kFirst);
        in.a_first = m ? snapshot[m->index()].accel : 0.0;
      }
      if (mode == PlannerMode::kCACCu) {
        const auto m = matched(i, Slot::kSecond);
        const VehicleState& s = snapshot[(m ? *m : *world.second_preceding(ego)).index()];
        in.v_second = s.speed;
        in.a_second = s.accel;
      }
      const Planner::Output out = v.planner->step(in, config.dt);
      v.command = out.command;
      v.spacing_error = out.spacing_error;
      v.mode = static_cast<std::int8_t>(mode);
    });
  }

  // (5) Human commands.
  void drive() {
    for_each_index(config.policy, n_followers, [&](std::size_t i) {
      Vehicle& v = vehicles[i];
      if (!v.driver) return;
      const VehicleId ego{static_cast<std::uint32_t>(i)};
      const VehicleState& e = snapshot[i];
      std::optional<LeaderView> view;
      bool exact = false;
      if (const auto first = world.first_preceding(ego)) {
        const VehicleState& l = snapshot[first->index()];
        view = LeaderView{l.position - config.vehicle_length - e.position, l.speed};
        exact = v.profile.caps.connected && connected(*first);
      }
      if (view && !(view->gap > 0.0)) {
        v.command = -v.profile.driver.emergency_decel;
        return;
      }
      v.command = v.driver->step(view, e.speed, exact, v.perception);
      v.mode = kHumanMode;
    });
  }

  // (6) Plant update; leads follow their profiles.
  void advance() {
    const auto next = static_cast<std::size_t>(step_index + 1);
    auto& states = world.mutable_states();
    for_each_index(config.policy, vehicles.size(), [&](std::size_t i) {
      Vehicle& v = vehicles[i];
      VehicleState& s = states[i];
      if (v.is_lead) {
        const LeadProfile& p = leads[i - n_followers];
        const double v_new = p.speed[std::min(next, p.speed.size() - 1)];
        s.accel = (v_new - s.speed) / config.dt;
        s.position += 0.5 * (s.speed + v_new) * config.dt;
        s.speed = v_new;
        return;
      }
      s = dynamics_step(v.command, *v.actuation, s);
    });
  }

  bool check_collisions() {
    for (int l = 0; l < config.lanes; ++l) {
      const auto& order = world.lane(l);
      for (std::size_t r = 1; r < order.size(); ++r) {
        const double gap = world.gap(order[r], order[r - 1]);
        if (!(gap > 0.0)) {
          collision = CollisionInfo{step_index, order[r].value, order[r - 1].value, gap};
          metrics.flag_collision();
          return true;
        }
      }
    }
    return false;
  }

  void record() {
    const auto& states = world.states();
    for (std::size_t i = 0; i < n_followers; ++i) {
      const Vehicle& v = vehicles[i];
      const VehicleState& s = states[i];
      metrics.add(step_index, i, s.speed, s.accel, v.mode, v.spacing_error);
      if (!config.record_log) continue;
      log.rows.push_back(LogRow{step_index, static_cast<std::uint32_t>(i),
                                static_cast<std::int16_t>(s.lane), v.mode, v.lc_event,
                                verdict(i, Slot::kFirst), verdict(i, Slot::kSecond),
                                s.position, s.speed, s.accel, v.command, v.spacing_error});
    }
  }

  // Phases (1)-(5): commands for this step from the current snapshot.
  void compute_commands() {
    snapshot = world.states();
    for (auto& v : vehicles) {
      v.lc_event = 0;
      if (v.lc_cooldown > 0.0) v.lc_cooldown = std::max(0.0, v.lc_cooldown - config.dt);
    }
    broadcast();
    identify();
    decide_lane_changes();
    if (execute_lane_changes()) retarget_all();
    plan();
    drive();
  }

  bool step() {
    if (collision || step_index >= total_steps) return false;
    compute_commands();
    advance();
    if (check_collisions()) {
      record();
      ++step_index;
      return false;
    }
    world.reindex();
    record();
    ++step_index;
    return step_index < total_steps;
  }
};

Simulation::Simulation(ScenarioConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}
Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

bool Simulation::step() { return impl_->step(); }

RunResult Simulation::run() {
  while (impl_->step()) {
  }
  RunResult r;
  r.metrics = impl_->metrics.finish();
  r.log = std::move(impl_->log);
  impl_->log = TrajectoryLog{};
  r.collision = impl_->collision;
  r.fleet = impl_->fleet;
  r.steps_run = impl_->step_index;
  return r;
}

const World& Simulation::world() const { return impl_->world; }
const std::vector<VehicleProfile>& Simulation::fleet() const { return impl_->fleet; }
std::int64_t Simulation::current_step() const { return impl_->step_index; }
const ScenarioConfig& Simulation::config() const { return impl_->config; }

std::vector<double> Simulation::preview_commands() const {
  Impl copy = *impl_;
  copy.config.record_log = false;
  copy.compute_commands();
  std::vector<double> out(copy.n_followers);
  for (std::size_t i = 0; i < copy.n_followers; ++i) out[i] = copy.vehicles[i].command;
  return out;
}

const SlotTracker& Simulation::tracker(VehicleId id, Slot slot) const {
  if (id.index() >= impl_->vehicles.size()) throw LookupError("unknown vehicle id");
  const auto& tr = impl_->vehicles[id.index()].trackers[slot_index(slot)];
  if (!tr) throw LookupError("vehicle has no tracker for that slot");
  return *tr;
}

PlannerMode Simulation::mode(VehicleId id) const {
  if (id.index() >= impl_->n_followers) throw LookupError("unknown follower id");
  const auto m = impl_->vehicles[id.index()].mode;
  if (m == kHumanMode) throw LookupError("vehicle is human-driven");
  return static_cast<PlannerMode>(m);
}

RunResult run_scenario(const ScenarioConfig& config) { return Simulation(config).run(); }

}  // namespace cavsim
