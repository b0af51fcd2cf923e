#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cavsim/csv.hpp"
#include "cavsim/error.hpp"
#include "cavsim/experiment.hpp"

using namespace cavsim;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            (std::string("cavsim_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny() {
  ExperimentConfig c;
  c.base.duration = 30.0;
  c.base.warmup = 5.0;
  c.base.lanes = 2;
  c.base.fleet.n_vehicles = 20;
  c.functionalities = {VehicleClass::kCAV, VehicleClass::kCAVu};
  c.cv_mprs = {0.2, 0.4};
  c.replicates = 2;
  c.master_seed = 17;
  c.workers = 2;
  return c;
}

std::size_t metric_index(const std::string& name) {
  const auto f = metric_fields();
  for (std::size_t k = 0; k < f.size(); ++k)
    if (name == f[k].name) return k;
  throw std::runtime_error("no metric " + name);
}

}  // namespace

TEST(Config, MinimalUsesDefaults) {
  const ExperimentConfig c = parse_experiment_config(R"({"schema_version": 1})");
  EXPECT_EQ(c.replicates, 100u);
  EXPECT_EQ(c.cv_mprs.size(), 7u);
  EXPECT_EQ(c.functionalities.size(), 4u);
  EXPECT_DOUBLE_EQ(c.base.dt, 0.1);
  EXPECT_EQ(c.base.lanes, 5);
}

TEST(Config, ParsesNestedValues) {
  const ExperimentConfig c = parse_experiment_config(R"({
    "schema_version": 1,
    "scenario": {"lanes": 3, "n_vehicles": 40, "controller": {"kp": 0.4},
                 "svis": {"alpha1": 0.5}, "mobil": {"politeness": 0.25}},
    "sweep": {"functionalities": ["AV", "CAVu-LC"], "cv_mprs": [0.1], "replicates": 3},
    "lead": {"trajectory_file": "us101.csv", "allow_synthetic": false}
  })");
  EXPECT_EQ(c.base.lanes, 3);
  EXPECT_EQ(c.base.fleet.n_vehicles, 40u);
  EXPECT_DOUBLE_EQ(c.base.fleet_options.controller.kp, 0.4);
  EXPECT_NEAR(c.base.svis.regions.pos_threshold, 2.0 * std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(c.base.mobil.politeness, 0.25);
  ASSERT_EQ(c.functionalities.size(), 2u);
  EXPECT_EQ(c.functionalities[1], VehicleClass::kCAVuLC);
  EXPECT_EQ(c.replicates, 3u);
  EXPECT_FALSE(c.lead.allow_synthetic);
}

TEST(Config, RejectsUnknownKeysAndBadVersions) {
  try {
    parse_experiment_config(R"({"schema_version": 1, "scenario": {"lanez": 3}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lanez"), std::string::npos);
  }
  EXPECT_THROW(parse_experiment_config(R"({"schema_version": 2})"), ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({})"), ConfigError);
  EXPECT_THROW(parse_experiment_config("{not json"), ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"schema_version": 1, "scenario": {"lanes": "x"}})"),
               ConfigError);
  EXPECT_THROW(parse_experiment_config(R"({"schema_version": 1, "sweep": {"cv_mprs": [1.5]}})"),
               ConfigError);
  EXPECT_THROW(
      parse_experiment_config(R"({"schema_version": 1, "sweep": {"functionalities": ["THV"]}})"),
      ConfigError);
}

TEST(Config, JsonRoundTrip) {
  const ExperimentConfig c = tiny();
  const std::string j = experiment_config_to_json(c);
  EXPECT_EQ(experiment_config_to_json(parse_experiment_config(j)), j);
}

TEST(Cells, EightyPercentComposition) {
  ExperimentConfig c;
  c.base.fleet.n_vehicles = 100;
  c.cv_mprs = {0.8};
  const ScenarioConfig s = cell_scenario(c, VehicleClass::kCAVu, 0, 3, {});
  EXPECT_EQ(s.fleet.automated_class, VehicleClass::kCAVu);
  EXPECT_EQ(s.seed, run_seed(c.master_seed, 0, 3));
  std::map<VehicleClass, int> n;
  for (const auto& p : compose_fleet(s.fleet, s.seed)) ++n[p.vehicle_class];
  EXPECT_EQ(n[VehicleClass::kCAVu], 40);
  EXPECT_EQ(n[VehicleClass::kCHV], 40);
  EXPECT_EQ(n[VehicleClass::kTHV], 20);
}

TEST(Cells, SeedsArePairedAcrossFunctionalities) {
  ExperimentConfig c;
  const auto a = cell_scenario(c, VehicleClass::kAV, 2, 5, {});
  const auto b = cell_scenario(c, VehicleClass::kCAVuLC, 2, 5, {});
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_NE(run_seed(1, 2, 5), run_seed(1, 5, 2));
}

TEST(Sweep, CountsRunsAndCells) {
  ExperimentConfig c = tiny();
  c.functionalities = {VehicleClass::kCAV};
  c.cv_mprs = {0.2};
  const SweepResult r = run_sweep(c);
  ASSERT_EQ(r.runs.size(), 2u);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_EQ(r.cells[0].runs, 2u);
  EXPECT_EQ(r.runs[0].replicate, 0u);
  EXPECT_EQ(r.runs[1].replicate, 1u);
  const std::size_t rms = metric_index("fleet_accel_rms");
  EXPECT_DOUBLE_EQ(r.cells[0].mean[rms],
                   0.5 * (r.runs[0].metrics.fleet.accel_rms + r.runs[1].metrics.fleet.accel_rms));
}

TEST(Sweep, ByteIdenticalOutputsAcrossReruns) {
  const TempDir tmp;
  const ExperimentConfig c = tiny();
  const SweepResult a = run_sweep(c, ExecutionPolicy::kParallel);
  const SweepResult b = run_sweep(c, ExecutionPolicy::kSerial);
  write_sweep_outputs(tmp.path() / "a", c, a);
  write_sweep_outputs(tmp.path() / "b", c, b);
  for (const char* f : {"runs.csv", "summary.csv", "manifest.json"}) {
    const std::string x = slurp(tmp.path() / "a" / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(tmp.path() / "b" / f)) << f;
  }
  const std::string header = slurp(tmp.path() / "a" / "runs.csv");
  EXPECT_EQ(header.rfind("functionality,cv_mpr,cav_fraction,chv_fraction,replicate,seed", 0),
            0u);
}

TEST(Sweep, MissingDataNamesTheFallbackFlag) {
  ExperimentConfig c = tiny();
  c.lead.trajectory_file = "/nonexistent/us101.csv";
  c.lead.allow_synthetic = false;
  try {
    run_sweep(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("allow_synthetic"), std::string::npos);
  }
  c.lead.allow_synthetic = true;
  EXPECT_TRUE(LeadLibrary::load(c).synthetic());
  EXPECT_TRUE(run_sweep(c).synthetic_leads);
}

TEST(Sweep, LoadsLeadsFromTrajectoryFile) {
  const TempDir tmp;
  std::vector<TrajectoryRecord> recs;
  for (int veh = 0; veh < 4; ++veh)
    for (int f = 0; f < 400; ++f)
      recs.push_back({veh, veh * 50 + f, veh % 2 + 1, f * 1.5, 14.0 + 0.5 * veh + 0.2 * std::sin(f / 30.0)});
  {
    std::ofstream out(tmp.path() / "traj.csv", std::ios::binary);
    write_trajectories(out, recs);
  }
  ExperimentConfig c = tiny();
  c.lead.trajectory_file = (tmp.path() / "traj.csv").string();
  const LeadLibrary lib = LeadLibrary::load(c);
  ASSERT_FALSE(lib.synthetic());
  const auto p = lib.profiles(3, 2, 30.0, 0.1);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_GE(p[0].size(), 301u);
  EXPECT_EQ(lib.profiles(3, 2, 30.0, 0.1)[1].speed, p[1].speed);
}

TEST(Summary, CsvRoundTripAndPlotData) {
  const TempDir tmp;
  const ExperimentConfig c = tiny();
  const SweepResult r = run_sweep(c);
  std::stringstream buf;
  write_summary_csv(buf, r.cells);
  const auto back = read_summary_csv(buf);
  ASSERT_EQ(back.size(), r.cells.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    EXPECT_EQ(back[k].functionality, r.cells[k].functionality);
    EXPECT_EQ(back[k].mean, r.cells[k].mean);
    EXPECT_EQ(back[k].sd, r.cells[k].sd);
  }

  const auto paths = emit_plot_data(back, {"cav_utilization"}, tmp.path());
  ASSERT_EQ(paths.size(), 1u);
  std::ifstream in(paths[0]);
  const csv::Table t = csv::read(in);
  ASSERT_EQ(t.rows.size(), r.cells.size());
  const std::size_t u = metric_index("cav_utilization");
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    EXPECT_EQ(csv::parse_double(t.rows[k][t.column("mean")], k, "mean"), r.cells[k].mean[u]);
    EXPECT_EQ(t.rows[k][t.column("functionality")], to_string(r.cells[k].functionality));
  }
  EXPECT_EQ(emit_plot_data(back, {}, tmp.path() / "all").size(), metric_fields().size());
}

TEST(Plot, EmptySummaryGivesHeaderOnlyAndUnknownMetricFails) {
  const TempDir tmp;
  const auto paths = emit_plot_data({}, {"fleet_accel_rms"}, tmp.path());
  EXPECT_EQ(slurp(paths.at(0)), "mpr,functionality,mean,std\n");
  try {
    emit_plot_data({}, {"speediness"}, tmp.path());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cav_utilization"), std::string::npos);
  }
}

TEST(Compare, SelfComparisonIsZero) {
  const SweepResult r = run_sweep(tiny());
  const auto rows = compare_scenarios(r.cells, r.cells);
  ASSERT_EQ(rows.size(), r.cells.size());
  for (const auto& row : rows) {
    for (double d : row.delta) EXPECT_EQ(d, 0.0);
    EXPECT_FALSE(row.utilization_order_violated);
  }
}

TEST(Compare, SingleFunctionalityFilesAlignOnMpr) {
  ExperimentConfig c = tiny();
  c.functionalities = {VehicleClass::kCAV};
  const SweepResult cav = run_sweep(c);
  c.functionalities = {VehicleClass::kCAVu};
  const SweepResult cavu = run_sweep(c);
  const auto rows = compare_scenarios(cav.cells, cavu.cells);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].functionality_a, VehicleClass::kCAV);
  EXPECT_EQ(rows[0].functionality_b, VehicleClass::kCAVu);
  const std::size_t u = metric_index("cav_utilization");
  for (const auto& row : rows) EXPECT_GE(row.delta[u], 0.0);
  std::ostringstream out;
  write_comparison_csv(out, rows);
  EXPECT_NE(out.str().find("cav_utilization_delta"), std::string::npos);
}

TEST(Compare, GridMismatchListsMissingCells) {
  const SweepResult r = run_sweep(tiny());
  auto fewer = r.cells;
  fewer.pop_back();
  try {
    compare_scenarios(r.cells, fewer);
    FAIL();
  } catch (const ComparisonError& e) {
    EXPECT_NE(std::string(e.what()).find("only in first"), std::string::npos);
  }
}
