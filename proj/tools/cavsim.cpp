#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "cavsim/csv.hpp"
#include "cavsim/error.hpp"
#include "cavsim/experiment.hpp"

namespace {

using namespace cavsim;

ExperimentConfig load(const std::string& path, bool synthetic) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_experiment_config(path);
  if (synthetic) c.lead.allow_synthetic = true;
  return c;
}

std::vector<CellSummary> read_summary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open summary '" + path + "'");
  return read_summary_csv(in);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-traffic highway simulator for connected automated vehicles"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  bool synthetic = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  auto* run = app.add_subcommand("run", "Run one scenario and print its metrics");
  std::string functionality = "CAVu-LC";
  double cv_mpr = 0.4;
  bool write_log = false;
  run->add_option("-c,--config", config_path, "Experiment config (JSON)");
  run->add_option("-o,--out", out_dir, "Output directory");
  run->add_option("-s,--seed", seed, "Scenario seed (overrides the derived run seed)");
  run->add_option("-f,--functionality", functionality, "AV, CAV, CAVu or CAVu-LC");
  run->add_option("-m,--cv-mpr", cv_mpr, "Connected-vehicle MPR in [0, 1]")->check(CLI::Range(0.0, 1.0));
  run->add_flag("--log", write_log, "Write the per-step trajectory log");
  run->add_flag("--synthetic", synthetic, "Fall back to synthetic lead profiles");
  run->add_option("-w,--workers", workers, "Threads for per-vehicle work (0: serial)");

  auto* sweep = app.add_subcommand("sweep", "Run the functionality x MPR x replicate grid");
  sweep->add_option("-c,--config", config_path, "Experiment config (JSON)");
  sweep->add_option("-o,--out", out_dir, "Output directory");
  sweep->add_option("-s,--seed", seed, "Master seed (overrides the config)");
  sweep->add_option("-w,--workers", workers, "Worker threads (0: OpenMP default)");
  sweep->add_flag("--synthetic", synthetic, "Fall back to synthetic lead profiles");

  auto* compare = app.add_subcommand("compare", "Per-cell deltas between two summaries");
  std::string summary_a, summary_b, compare_out;
  compare->add_option("a", summary_a, "Baseline summary.csv")->required();
  compare->add_option("b", summary_b, "Other summary.csv")->required();
  compare->add_option("-o,--out", compare_out, "Output CSV (default stdout)");

  auto* plot = app.add_subcommand("plot", "Write one tidy CSV per metric");
  std::string summary_path;
  std::vector<std::string> metrics;
  plot->add_option("summary", summary_path, "summary.csv")->required();
  plot->add_option("-m,--metric", metrics, "Metric names (default all)");
  plot->add_option("-o,--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig c = load(config_path, synthetic);
      const VehicleClass f = parse_vehicle_class(functionality);
      c.cv_mprs = {cv_mpr};
      const LeadLibrary lib = LeadLibrary::load(c);
      const std::uint64_t s = seed.value_or(run_seed(c.master_seed, 0, 0));
      ScenarioConfig sc = cell_scenario(c, f, 0, 0, lib.profiles(s, c.base.lanes, c.base.duration,
                                                                c.base.dt));
      sc.seed = s;
      sc.record_log = write_log;
      sc.policy = workers.value_or(0) > 0 ? ExecutionPolicy::kParallel : ExecutionPolicy::kSerial;
      const RunResult r = run_scenario(sc);
      nlohmann::json j;
      j["functionality"] = functionality;
      j["cv_mpr"] = cv_mpr;
      j["seed"] = s;
      j["steps_run"] = r.steps_run;
      for (const auto& field : metric_fields()) j["metrics"][field.name] = field.get(r.metrics);
      if (r.collision)
        j["collision"] = {{"step", r.collision->step},
                          {"follower", r.collision->follower},
                          {"leader", r.collision->leader},
                          {"gap", r.collision->gap}};
      std::cout << j.dump(2) << "\n";
      if (write_log) {
        auto out = open_out(std::filesystem::path(out_dir) / "trajectory_log.csv");
        r.log.write_csv(out);
      }
      return r.collision ? 3 : 0;
    }
    if (*sweep) {
      ExperimentConfig c = load(config_path, synthetic);
      if (seed) c.master_seed = *seed;
      if (workers) c.workers = *workers;
      const SweepResult r = run_sweep(c);
      write_sweep_outputs(out_dir, c, r);
      std::cerr << "wrote " << r.runs.size() << " runs and " << r.cells.size() << " cells to "
                << out_dir << "\n";
      return 0;
    }
    if (*compare) {
      const auto rows = compare_scenarios(read_summary(summary_a), read_summary(summary_b));
      if (compare_out.empty()) {
        write_comparison_csv(std::cout, rows);
      } else {
        auto out = open_out(compare_out);
        write_comparison_csv(out, rows);
      }
      std::size_t violated = 0;
      for (const auto& row : rows) violated += row.utilization_order_violated;
      if (violated) std::cerr << violated << " cell(s) violate the utilization ordering\n";
      return 0;
    }
    if (*plot) {
      for (const auto& p : emit_plot_data(read_summary(summary_path), metrics, out_dir))
        std::cerr << "wrote " << p.string() << "\n";
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
