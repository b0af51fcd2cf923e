#include "cavsim/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cavsim/csv.hpp"
#include "cavsim/error.hpp"
#include "cavsim/rng.hpp"

namespace cavsim {

using nlohmann::json;

namespace {

// Reads keys from one JSON object, remembering which were consumed so that
// misspelled keys are reported instead of silently ignored.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key " + path_ + "." + k);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void with_child(Section& s, const char* key, F&& f) {
  if (auto c = s.child(key)) {
    f(*c);
    c->finish();
  }
}

void read_human(Section& s, HumanParams& p) {
  s.get("desired_speed", p.desired_speed);
  s.get("min_gap", p.min_gap);
  s.get("max_accel", p.max_accel);
  s.get("comfort_decel", p.comfort_decel);
  s.get("emergency_decel", p.emergency_decel);
  s.get("reaction_delay", p.reaction_delay);
  s.get("ttc_threshold", p.ttc_threshold);
  s.get("distance_error_cv", p.distance_error_cv);
  s.get("approach_rate_sd", p.approach_rate_sd);
  s.get("error_persistence", p.error_persistence);
}

json human_json(const HumanParams& p) {
  return {{"desired_speed", p.desired_speed},         {"min_gap", p.min_gap},
          {"max_accel", p.max_accel},                 {"comfort_decel", p.comfort_decel},
          {"emergency_decel", p.emergency_decel},     {"reaction_delay", p.reaction_delay},
          {"ttc_threshold", p.ttc_threshold},         {"distance_error_cv", p.distance_error_cv},
          {"approach_rate_sd", p.approach_rate_sd},   {"error_persistence", p.error_persistence}};
}

void read_controller(Section& s, ControllerParams& p) {
  s.get("kp", p.kp);
  s.get("kd", p.kd);
  s.get("time_headway", p.time_headway);
  s.get("ovm_alpha", p.ovm_alpha);
  s.get("ovm_beta", p.ovm_beta);
  s.get("ovm_headway", p.ovm_headway);
  s.get("ff_time_constant", p.ff_time_constant);
  s.get("cruise_speed", p.cruise_speed);
  s.get("cruise_gain", p.cruise_gain);
  s.get("min_command", p.min_command);
  s.get("max_command", p.max_command);
  s.get("emergency_ttc", p.emergency_ttc);
}

json controller_json(const ControllerParams& p) {
  return {{"kp", p.kp},
          {"kd", p.kd},
          {"time_headway", p.time_headway},
          {"ovm_alpha", p.ovm_alpha},
          {"ovm_beta", p.ovm_beta},
          {"ovm_headway", p.ovm_headway},
          {"ff_time_constant", p.ff_time_constant},
          {"cruise_speed", p.cruise_speed},
          {"cruise_gain", p.cruise_gain},
          {"min_command", p.min_command},
          {"max_command", p.max_command},
          {"emergency_ttc", p.emergency_ttc}};
}

void read_svis(Section& s, SvisParams& p) {
  double a1 = p.regions.alpha1, a2 = p.regions.alpha2;
  s.get("alpha1", a1);
  s.get("alpha2", a2);
  p.regions = derive_thresholds(a1, a2);
  s.get("radar_dist_sd", p.noise.radar_dist_sd);
  s.get("radar_speed_sd", p.noise.radar_speed_sd);
  s.get("gps_dist_sd", p.noise.gps_dist_sd);
  s.get("gps_speed_sd", p.noise.gps_speed_sd);
  s.get("inner_steps", p.inner_steps);
  s.get("outer_windows", p.outer_windows);
  s.get("second_slot_factor", p.second_slot_factor);
  s.get("retry_cooldown", p.retry_cooldown);
  s.get("radar_range", p.radar_range);
  s.get("comm_range", p.comm_range);
  s.get("lane_width", p.lane_width);
}

json svis_json(const SvisParams& p) {
  return {{"alpha1", p.regions.alpha1},
          {"alpha2", p.regions.alpha2},
          {"radar_dist_sd", p.noise.radar_dist_sd},
          {"radar_speed_sd", p.noise.radar_speed_sd},
          {"gps_dist_sd", p.noise.gps_dist_sd},
          {"gps_speed_sd", p.noise.gps_speed_sd},
          {"inner_steps", p.inner_steps},
          {"outer_windows", p.outer_windows},
          {"second_slot_factor", p.second_slot_factor},
          {"retry_cooldown", p.retry_cooldown},
          {"radar_range", p.radar_range},
          {"comm_range", p.comm_range},
          {"lane_width", p.lane_width}};
}

void read_mobil(Section& s, MobilParams& p) {
  s.get("b_safe", p.b_safe);
  s.get("politeness", p.politeness);
  s.get("threshold", p.threshold);
  s.get("cooldown", p.cooldown);
  s.get("platoon_weight", p.platoon_weight);
}

json mobil_json(const MobilParams& p) {
  return {{"b_safe", p.b_safe},
          {"politeness", p.politeness},
          {"threshold", p.threshold},
          {"cooldown", p.cooldown},
          {"platoon_weight", p.platoon_weight}};
}

void read_fuel(Section& s, FuelModelParams& p) {
  s.get("c0", p.c0);
  s.get("c1", p.c1);
  s.get("c2", p.c2);
  s.get("mass", p.mass);
  s.get("drag_coefficient", p.drag_coefficient);
  s.get("frontal_area", p.frontal_area);
  s.get("air_density", p.air_density);
  s.get("rolling_coefficient", p.rolling_coefficient);
  s.get("rolling_c1", p.rolling_c1);
  s.get("rolling_c2", p.rolling_c2);
  s.get("efficiency", p.efficiency);
}

json fuel_json(const FuelModelParams& p) {
  return {{"c0", p.c0},
          {"c1", p.c1},
          {"c2", p.c2},
          {"mass", p.mass},
          {"drag_coefficient", p.drag_coefficient},
          {"frontal_area", p.frontal_area},
          {"air_density", p.air_density},
          {"rolling_coefficient", p.rolling_coefficient},
          {"rolling_c1", p.rolling_c1},
          {"rolling_c2", p.rolling_c2},
          {"efficiency", p.efficiency}};
}

void read_synthetic(Section& s, SyntheticProfileParams& p) {
  s.get("mean_speed", p.mean_speed);
  s.get("speed_spread", p.speed_spread);
  s.get("min_speed", p.min_speed);
  s.get("max_speed", p.max_speed);
  s.get("cruise_min", p.cruise_min);
  s.get("cruise_max", p.cruise_max);
  s.get("accel_limit", p.limits.accel);
  s.get("jerk_limit", p.limits.jerk);
}

json synthetic_json(const SyntheticProfileParams& p) {
  return {{"mean_speed", p.mean_speed},   {"speed_spread", p.speed_spread},
          {"min_speed", p.min_speed},     {"max_speed", p.max_speed},
          {"cruise_min", p.cruise_min},   {"cruise_max", p.cruise_max},
          {"accel_limit", p.limits.accel}, {"jerk_limit", p.limits.jerk}};
}

std::string cell_key(VehicleClass f, double mpr) {
  return std::string(to_string(f)) + "@" + csv::format(mpr);
}

}  // namespace

void ExperimentConfig::validate() const {
  base.validate();
  if (functionalities.empty()) throw ConfigError("sweep needs at least one functionality");
  for (VehicleClass f : functionalities)
    if (!is_automated(f)) throw ConfigError("functionalities must be automated classes");
  if (cv_mprs.empty()) throw ConfigError("sweep needs at least one MPR");
  for (double m : cv_mprs)
    if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("MPR values must lie in [0, 1]");
  if (replicates == 0) throw ConfigError("replicates must be positive");
  if (workers < 0) throw ConfigError("workers must be non-negative");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section root(j, "config");
  int version = 0;
  root.get("schema_version", version);
  if (version != kConfigSchemaVersion)
    throw ConfigError("unsupported config schema_version " + std::to_string(version) +
                      " (expected " + std::to_string(kConfigSchemaVersion) + ")");

  with_child(root, "scenario", [&](Section& s) {
    ScenarioConfig& b = c.base;
    s.get("dt", b.dt);
    s.get("duration", b.duration);
    s.get("warmup", b.warmup);
    s.get("lanes", b.lanes);
    s.get("vehicle_length", b.vehicle_length);
    s.get("road_length", b.road_length);
    s.get("n_vehicles", b.fleet.n_vehicles);
    s.get("lead_connected", b.lead_connected);
    s.get("perfect_identification", b.perfect_identification);
    std::vector<double> headway{b.fleet_options.headway_min, b.fleet_options.headway_max};
    s.get("driver_headway_range", headway);
    if (headway.size() != 2) throw ConfigError("driver_headway_range needs two values");
    b.fleet_options.headway_min = headway[0];
    b.fleet_options.headway_max = headway[1];
    with_child(s, "human", [&](Section& h) { read_human(h, b.fleet_options.driver); });
    with_child(s, "controller", [&](Section& h) { read_controller(h, b.fleet_options.controller); });
    with_child(s, "dynamics", [&](Section& h) {
      h.get("time_constant", b.automated_dynamics.time_constant);
      h.get("delay", b.automated_dynamics.delay);
    });
    with_child(s, "svis", [&](Section& h) { read_svis(h, b.svis); });
    with_child(s, "mobil", [&](Section& h) { read_mobil(h, b.mobil); });
    with_child(s, "fuel", [&](Section& h) { read_fuel(h, b.fuel); });
    with_child(s, "synthetic_lead", [&](Section& h) { read_synthetic(h, b.synthetic_lead); });
  });

  with_child(root, "sweep", [&](Section& s) {
    std::vector<std::string> names;
    s.get("functionalities", names);
    if (!names.empty()) {
      c.functionalities.clear();
      for (const auto& n : names) c.functionalities.push_back(parse_vehicle_class(n));
    }
    s.get("cv_mprs", c.cv_mprs);
    s.get("replicates", c.replicates);
    s.get("master_seed", c.master_seed);
    s.get("workers", c.workers);
  });

  with_child(root, "lead", [&](Section& s) {
    s.get("trajectory_file", c.lead.trajectory_file);
    s.get("allow_synthetic", c.lead.allow_synthetic);
    s.get("first_frame", c.lead.first_frame);
    s.get("last_frame", c.lead.last_frame);
  });
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  const ScenarioConfig& b = c.base;
  json funcs = json::array();
  for (VehicleClass f : c.functionalities) funcs.push_back(std::string(to_string(f)));
  json lead = {{"trajectory_file", c.lead.trajectory_file},
               {"allow_synthetic", c.lead.allow_synthetic}};
  if (c.lead.first_frame != std::numeric_limits<std::int64_t>::min())
    lead["first_frame"] = c.lead.first_frame;
  if (c.lead.last_frame != std::numeric_limits<std::int64_t>::max())
    lead["last_frame"] = c.lead.last_frame;
  json j = {
      {"schema_version", kConfigSchemaVersion},
      {"scenario",
       {{"dt", b.dt},
        {"duration", b.duration},
        {"warmup", b.warmup},
        {"lanes", b.lanes},
        {"vehicle_length", b.vehicle_length},
        {"road_length", b.road_length},
        {"n_vehicles", b.fleet.n_vehicles},
        {"lead_connected", b.lead_connected},
        {"perfect_identification", b.perfect_identification},
        {"driver_headway_range", {b.fleet_options.headway_min, b.fleet_options.headway_max}},
        {"human", human_json(b.fleet_options.driver)},
        {"controller", controller_json(b.fleet_options.controller)},
        {"dynamics",
         {{"time_constant", b.automated_dynamics.time_constant},
          {"delay", b.automated_dynamics.delay}}},
        {"svis", svis_json(b.svis)},
        {"mobil", mobil_json(b.mobil)},
        {"fuel", fuel_json(b.fuel)},
        {"synthetic_lead", synthetic_json(b.synthetic_lead)}}},
      {"sweep",
       {{"functionalities", funcs},
        {"cv_mprs", c.cv_mprs},
        {"replicates", c.replicates},
        {"master_seed", c.master_seed},
        {"workers", c.workers}}},
      {"lead", lead}};
  return j.dump(2) + "\n";
}

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t mpr_index, std::size_t replicate) {
  return derive_seed(master_seed, mpr_index, replicate);
}

std::filesystem::path data_directory() {
  if (const char* env = std::getenv("CAVSIM_DATA_DIR"); env && *env) return env;
  return "data";
}

ScenarioConfig cell_scenario(const ExperimentConfig& config, VehicleClass functionality,
                             std::size_t mpr_index, std::size_t replicate,
                             const std::vector<LeadProfile>& leads_for_seed) {
  ScenarioConfig s = config.base;
  const double mpr = config.cv_mprs.at(mpr_index);
  s.fleet.automated_class = functionality;
  s.fleet.cav_fraction = mpr / 2.0;
  s.fleet.chv_fraction = mpr / 2.0;
  s.seed = run_seed(config.master_seed, mpr_index, replicate);
  s.lead_profiles = leads_for_seed;
  s.policy = ExecutionPolicy::kSerial;
  s.record_log = false;
  return s;
}

LeadLibrary LeadLibrary::load(const ExperimentConfig& config) {
  LeadLibrary lib;
  if (config.lead.trajectory_file.empty()) return lib;
  std::filesystem::path path = config.lead.trajectory_file;
  if (path.is_relative()) path = data_directory() / path;
  if (!std::filesystem::exists(path)) {
    if (config.lead.allow_synthetic) return lib;
    throw ConfigError("trajectory file '" + path.string() +
                      "' not found; set lead.allow_synthetic (or pass --synthetic) to use "
                      "synthetic lead profiles");
  }
  const auto records = filter_lane_keepers(parse_trajectories_file(path.string()));
  std::set<int> lanes;
  for (const auto& r : records) lanes.insert(r.lane);
  for (int lane : lanes) {
    auto series = speed_series(records, lane, config.lead.first_frame, config.lead.last_frame);
    std::erase_if(series, [](const SpeedSeries& s) { return s.speed.empty(); });
    if (series.size() >= 2) lib.lanes_.push_back(std::move(series));
  }
  if (lib.lanes_.empty()) throw ConfigError("trajectory file has no lane with two usable vehicles");
  return lib;
}

std::vector<LeadProfile> LeadLibrary::profiles(std::uint64_t seed, int lanes, double duration,
                                               double dt) const {
  std::vector<LeadProfile> out;
  if (synthetic()) return out;
  for (int l = 0; l < lanes; ++l) {
    auto series = lanes_[static_cast<std::size_t>(l) % lanes_.size()];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(Stream::kLeadProfile),
                        static_cast<std::uint64_t>(l)));
    for (std::size_t i = series.size(); i > 1; --i)
      std::swap(series[i - 1], series[rng.below(i)]);
    out.push_back(extend_profile(series, duration + dt, dt));
  }
  return out;
}

int functionality_rank(VehicleClass c) {
  switch (c) {
    case VehicleClass::kAV: return 0;
    case VehicleClass::kCAV: return 1;
    case VehicleClass::kCAVu: return 2;
    case VehicleClass::kCAVuLC: return 3;
    default: return -1;
  }
}

std::vector<CellSummary> summarize(const std::vector<RunRow>& runs) {
  const auto fields = metric_fields();
  std::vector<CellSummary> cells;
  std::map<std::pair<int, std::size_t>, std::size_t> index;  // insertion order kept in cells
  std::vector<std::vector<const RunRow*>> members;
  for (const RunRow& r : runs) {
    const auto key = std::make_pair(static_cast<int>(r.functionality), r.mpr_index);
    auto [it, inserted] = index.try_emplace(key, cells.size());
    if (inserted) {
      cells.push_back({r.functionality, r.cv_mpr, 0, {}, {}});
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& m = members[c];
    cells[c].runs = m.size();
    cells[c].mean.assign(fields.size(), 0.0);
    cells[c].sd.assign(fields.size(), 0.0);
    for (std::size_t f = 0; f < fields.size(); ++f) {
      double sum = 0.0;
      for (const RunRow* r : m) sum += fields[f].get(r->metrics);
      const double mean = sum / static_cast<double>(m.size());
      double ss = 0.0;
      for (const RunRow* r : m) {
        const double d = fields[f].get(r->metrics) - mean;
        ss += d * d;
      }
      cells[c].mean[f] = mean;
      cells[c].sd[f] = m.size() > 1 ? std::sqrt(ss / static_cast<double>(m.size() - 1)) : 0.0;
    }
  }
  return cells;
}

SweepResult run_sweep(const ExperimentConfig& config, ExecutionPolicy policy) {
  config.validate();
  const LeadLibrary library = LeadLibrary::load(config);
  const std::size_t nf = config.functionalities.size();
  const std::size_t nm = config.cv_mprs.size();
  const std::size_t nr = config.replicates;
  const std::size_t total = nf * nm * nr;

  SweepResult result;
  result.synthetic_leads = library.synthetic();
  result.runs.resize(total);
  std::vector<std::string> errors(total);

  const auto one = [&](std::size_t k) {
    const std::size_t f = k / (nm * nr);
    const std::size_t m = (k / nr) % nm;
    const std::size_t r = k % nr;
    try {
      const std::uint64_t seed = run_seed(config.master_seed, m, r);
      const auto leads = library.profiles(seed, config.base.lanes, config.base.duration,
                                          config.base.dt);
      const ScenarioConfig sc = cell_scenario(config, config.functionalities[f], m, r, leads);
      RunResult res = run_scenario(sc);
      result.runs[k] = RunRow{config.functionalities[f], config.cv_mprs[m], m, r, seed,
                              res.metrics};
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  };

  const auto count = static_cast<std::int64_t>(total);
  if (policy == ExecutionPolicy::kParallel) {
    const int threads = config.workers > 0 ? config.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::int64_t k = 0; k < count; ++k) one(static_cast<std::size_t>(k));
  } else {
    for (std::int64_t k = 0; k < count; ++k) one(static_cast<std::size_t>(k));
  }
  for (std::size_t k = 0; k < total; ++k)
    if (!errors[k].empty()) throw Error("sweep run " + std::to_string(k) + " failed: " + errors[k]);

  result.cells = summarize(result.runs);
  return result;
}

void write_runs_csv(std::ostream& out, const std::vector<RunRow>& runs) {
  std::vector<std::string> header{"functionality", "cv_mpr", "cav_fraction", "chv_fraction",
                                  "replicate", "seed"};
  for (const auto& f : metric_fields()) header.emplace_back(f.name);
  csv::write_row(out, header);
  for (const RunRow& r : runs) {
    std::vector<std::string> row{std::string(to_string(r.functionality)), csv::format(r.cv_mpr),
                                 csv::format(r.cv_mpr / 2.0), csv::format(r.cv_mpr / 2.0),
                                 csv::format(r.replicate), std::to_string(r.seed)};
    for (const auto& f : metric_fields()) row.push_back(csv::format(f.get(r.metrics)));
    csv::write_row(out, row);
  }
}

void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
  std::vector<std::string> header{"functionality", "cv_mpr", "runs"};
  for (const auto& f : metric_fields()) {
    header.push_back(std::string(f.name) + "_mean");
    header.push_back(std::string(f.name) + "_std");
  }
  csv::write_row(out, header);
  for (const CellSummary& c : cells) {
    std::vector<std::string> row{std::string(to_string(c.functionality)), csv::format(c.cv_mpr),
                                 csv::format(c.runs)};
    for (std::size_t f = 0; f < c.mean.size(); ++f) {
      row.push_back(csv::format(c.mean[f]));
      row.push_back(csv::format(c.sd[f]));
    }
    csv::write_row(out, row);
  }
}

std::vector<CellSummary> read_summary_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  std::vector<CellSummary> cells;
  if (t.header.empty()) return cells;
  const std::size_t cf = t.column("functionality"), cm = t.column("cv_mpr"), cr = t.column("runs");
  std::vector<std::pair<std::size_t, std::size_t>> cols;
  for (const auto& f : metric_fields())
    cols.emplace_back(t.column(std::string(f.name) + "_mean"),
                      t.column(std::string(f.name) + "_std"));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 2;
    CellSummary c;
    try {
      c.functionality = parse_vehicle_class(row[cf]);
    } catch (const ConfigError&) {
      throw ParseError("row " + std::to_string(line) + ": unknown functionality '" + row[cf] + "'",
                       line, "functionality");
    }
    c.cv_mpr = csv::parse_double(row[cm], line, "cv_mpr");
    c.runs = static_cast<std::size_t>(csv::parse_int(row[cr], line, "runs"));
    for (std::size_t f = 0; f < cols.size(); ++f) {
      c.mean.push_back(csv::parse_double(row[cols[f].first], line, t.header[cols[f].first]));
      c.sd.push_back(csv::parse_double(row[cols[f].second], line, t.header[cols[f].second]));
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

void write_sweep_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                         const SweepResult& result) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    auto out = open("runs.csv");
    write_runs_csv(out, result.runs);
  }
  {
    auto out = open("summary.csv");
    write_summary_csv(out, result.cells);
  }
  {
    json metrics = json::array();
    for (const auto& f : metric_fields()) metrics.push_back(f.name);
    json manifest = {{"output_schema_version", kOutputSchemaVersion},
                     {"runs", result.runs.size()},
                     {"cells", result.cells.size()},
                     {"files", {"runs.csv", "summary.csv"}},
                     {"lead_source", result.synthetic_leads ? "synthetic" : "trajectory_file"},
                     {"metrics", metrics},
                     {"config", json::parse(experiment_config_to_json(config))}};
    auto out = open("manifest.json");
    out << manifest.dump(2) << "\n";
  }
}

std::vector<ComparisonRow> compare_scenarios(const std::vector<CellSummary>& a,
                                             const std::vector<CellSummary>& b) {
  std::set<VehicleClass> fa, fb;
  for (const auto& c : a) fa.insert(c.functionality);
  for (const auto& c : b) fb.insert(c.functionality);
  const bool by_mpr_only = fa != fb && fa.size() == 1 && fb.size() == 1;
  if (fa != fb && !by_mpr_only)
    throw ComparisonError("summaries cover different functionality sets");

  const auto key = [&](const CellSummary& c) {
    return by_mpr_only ? csv::format(c.cv_mpr) : cell_key(c.functionality, c.cv_mpr);
  };
  std::map<std::string, const CellSummary*> ib;
  for (const auto& c : b) ib[key(c)] = &c;
  std::set<std::string> ka;
  for (const auto& c : a) ka.insert(key(c));

  std::string missing;
  for (const auto& c : a)
    if (!ib.count(key(c))) missing += " " + key(c) + " (only in first)";
  for (const auto& c : b)
    if (!ka.count(key(c))) missing += " " + key(c) + " (only in second)";
  if (!missing.empty()) throw ComparisonError("sweep grids differ:" + missing);

  const auto fields = metric_fields();
  std::size_t util = 0;
  for (std::size_t f = 0; f < fields.size(); ++f)
    if (std::string_view(fields[f].name) == "cav_utilization") util = f;

  std::vector<ComparisonRow> out;
  for (const auto& ca : a) {
    const CellSummary& cb = *ib.at(key(ca));
    ComparisonRow row{ca.functionality, cb.functionality, ca.cv_mpr, {}, {}, {}, false};
    for (std::size_t f = 0; f < fields.size(); ++f) {
      row.delta.push_back(cb.mean[f] - ca.mean[f]);
      row.ratio.push_back(ca.mean[f] != 0.0 ? cb.mean[f] / ca.mean[f]
                                            : (cb.mean[f] == 0.0 ? 1.0 : HUGE_VAL));
      row.pooled_sd.push_back(std::sqrt(0.5 * (ca.sd[f] * ca.sd[f] + cb.sd[f] * cb.sd[f])));
    }
    const int ra = functionality_rank(ca.functionality), rb = functionality_rank(cb.functionality);
    if (rb > ra) row.utilization_order_violated = cb.mean[util] < ca.mean[util];
    if (ra > rb) row.utilization_order_violated = ca.mean[util] < cb.mean[util];
    out.push_back(std::move(row));
  }
  return out;
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  std::vector<std::string> header{"functionality_a", "functionality_b", "cv_mpr"};
  for (const auto& f : metric_fields()) {
    header.push_back(std::string(f.name) + "_delta");
    header.push_back(std::string(f.name) + "_ratio");
    header.push_back(std::string(f.name) + "_pooled_std");
  }
  header.emplace_back("utilization_order_violated");
  csv::write_row(out, header);
  for (const auto& r : rows) {
    std::vector<std::string> row{std::string(to_string(r.functionality_a)),
                                 std::string(to_string(r.functionality_b)), csv::format(r.cv_mpr)};
    for (std::size_t f = 0; f < r.delta.size(); ++f) {
      row.push_back(csv::format(r.delta[f]));
      row.push_back(csv::format(r.ratio[f]));
      row.push_back(csv::format(r.pooled_sd[f]));
    }
    row.emplace_back(r.utilization_order_violated ? "1" : "0");
    csv::write_row(out, row);
  }
}

std::vector<std::filesystem::path> emit_plot_data(const std::vector<CellSummary>& cells,
                                                  const std::vector<std::string>& metrics,
                                                  const std::filesystem::path& dir) {
  const auto fields = metric_fields();
  std::vector<std::size_t> chosen;
  if (metrics.empty()) {
    for (std::size_t f = 0; f < fields.size(); ++f) chosen.push_back(f);
  }
  for (const auto& name : metrics) {
    std::size_t f = 0;
    while (f < fields.size() && name != fields[f].name) ++f;
    if (f == fields.size()) {
      std::string avail;
      for (const auto& fl : fields) avail += std::string(avail.empty() ? "" : ", ") + fl.name;
      throw ConfigError("unknown metric '" + name + "'; available: " + avail);
    }
    chosen.push_back(f);
  }
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t f : chosen) {
    const auto path = dir / (std::string(fields[f].name) + ".csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    csv::write_row(out, {"mpr", "functionality", "mean", "std"});
    for (const auto& c : cells)
      csv::write_row(out, {csv::format(c.cv_mpr), std::string(to_string(c.functionality)),
                           csv::format(c.mean[f]), csv::format(c.sd[f])});
    written.push_back(path);
  }
  return written;
}

}  // namespace cavsim
