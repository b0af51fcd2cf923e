#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <ostream>
#include <optional>
#include <string>
#include <vector>

#include "cavsim/simulation.hpp"

namespace cavsim {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kOutputSchemaVersion = 1;

/// Where lead-vehicle profiles come from.
struct LeadSource {
  std::string trajectory_file;  // empty: synthetic profiles
  bool allow_synthetic = true;  // fall back when the file is missing
  std::int64_t first_frame = std::numeric_limits<std::int64_t>::min();
  std::int64_t last_frame = std::numeric_limits<std::int64_t>::max();
};

/// A sweep over functionalities x connected-vehicle MPR x replicates. At a
/// CV MPR of m the fleet carries m/2 automated vehicles and m/2 CHVs.
struct ExperimentConfig {
  ScenarioConfig base;
  std::vector<VehicleClass> functionalities{VehicleClass::kAV, VehicleClass::kCAV,
                                            VehicleClass::kCAVu, VehicleClass::kCAVuLC};
  std::vector<double> cv_mprs{0.02, 0.06, 0.10, 0.20, 0.40, 0.60, 0.80};
  std::size_t replicates = 100;
  std::uint64_t master_seed = 2024;
  int workers = 0;  // 0: OpenMP default
  LeadSource lead;

  void validate() const;
};

/// Parses the JSON config (schema_version 1). Unknown keys are errors.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string experiment_config_to_json(const ExperimentConfig& config);

/// Seed of one replicate of one MPR cell; independent of the functionality
/// so that functionalities are compared on paired seeds.
std::uint64_t run_seed(std::uint64_t master_seed, std::size_t mpr_index, std::size_t replicate);

/// Data directory from CAVSIM_DATA_DIR, else "data".
std::filesystem::path data_directory();

/// Scenario for one run of the grid, with lead profiles resolved.
ScenarioConfig cell_scenario(const ExperimentConfig& config, VehicleClass functionality,
                             std::size_t mpr_index, std::size_t replicate,
                             const std::vector<LeadProfile>& leads_for_seed);

/// Lane-keeping source trajectories loaded once per sweep. Profiles for a
/// run are built by shuffling each lane's series with the run seed and
/// extending them to the run duration.
class LeadLibrary {
 public:
  /// Empty library (synthetic leads) when no file is configured. Throws
  /// ConfigError naming the fallback flag when the file is missing and the
  /// fallback is off.
  static LeadLibrary load(const ExperimentConfig& config);

  bool synthetic() const noexcept { return lanes_.empty(); }
  /// Empty when synthetic, otherwise one profile per scenario lane.
  std::vector<LeadProfile> profiles(std::uint64_t seed, int lanes, double duration,
                                    double dt) const;

 private:
  std::vector<std::vector<SpeedSeries>> lanes_;  // per source lane, entry order
};

struct RunRow {
  VehicleClass functionality;
  double cv_mpr;
  std::size_t mpr_index;
  std::size_t replicate;
  std::uint64_t seed;
  RunMetrics metrics;
};

struct CellSummary {
  VehicleClass functionality;
  double cv_mpr;
  std::size_t runs;
  std::vector<double> mean;  // per metric_fields() entry
  std::vector<double> sd;    // sample standard deviation (n - 1)
};

struct SweepResult {
  std::vector<RunRow> runs;        // (functionality, mpr, replicate) order
  std::vector<CellSummary> cells;  // (functionality, mpr) order
  bool synthetic_leads = false;    // no trajectory library was loaded
};

/// Runs every cell; runs are distributed over worker threads when the policy
/// is parallel, and reduced in grid order either way.
SweepResult run_sweep(const ExperimentConfig& config,
                      ExecutionPolicy policy = ExecutionPolicy::kParallel);

std::vector<CellSummary> summarize(const std::vector<RunRow>& runs);

void write_runs_csv(std::ostream& out, const std::vector<RunRow>& runs);
void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells);
std::vector<CellSummary> read_summary_csv(std::istream& in);

/// Writes runs.csv, summary.csv and manifest.json into dir.
void write_sweep_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                         const SweepResult& result);

/// Per matched cell: b - a, b / a and the pooled sd for every metric, plus
/// flags where the expected ordering is violated.
struct ComparisonRow {
  VehicleClass functionality_a;
  VehicleClass functionality_b;
  double cv_mpr;
  std::vector<double> delta;
  std::vector<double> ratio;
  std::vector<double> pooled_sd;
  bool utilization_order_violated;  // b expected >= a when b nests a
};

/// Cells align on (functionality, MPR) when both files cover the same
/// functionalities, or on MPR alone when each holds a single functionality.
/// Throws ComparisonError listing unmatched cells otherwise.
std::vector<ComparisonRow> compare_scenarios(const std::vector<CellSummary>& a,
                                             const std::vector<CellSummary>& b);
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

/// Writes one <metric>.csv (mpr, functionality, mean, std) per requested
/// metric. Empty `metrics` means all. Throws ConfigError on unknown names,
/// listing the available ones. Returns the written paths.
std::vector<std::filesystem::path> emit_plot_data(const std::vector<CellSummary>& cells,
                                                  const std::vector<std::string>& metrics,
                                                  const std::filesystem::path& dir);

/// Ordering rank of a functionality in the nesting AV < CAV < CAVu < CAVu-LC.
int functionality_rank(VehicleClass c);

}  // namespace cavsim
