#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stanav/global_planner.hpp"
#include "stanav/local_planner.hpp"
#include "stanav/terrain.hpp"
#include "stanav/traversability.hpp"

namespace stanav::sim {

using mpc::Control;
using mpc::RobotState;
using planner::CostMode;
using traversability::Baseline;
using traversability::RiskParams;
using traversability::TraversabilityMap;

/// STATE, or a baseline scorer with its trade-off weight w.
struct PlannerSpec {
  CostMode mode = CostMode::state;
  Baseline baseline = Baseline::learned_ins;
  double weight = 0.5;

  static PlannerSpec state() { return {}; }
  static PlannerSpec with_baseline(Baseline b, double w) { return {CostMode::baseline, b, w}; }

  /// "STATE", "LearnedInS(0.5)", "ManualBiped(3)", "QuadFoothold(0.5)".
  std::string name() const;
  static PlannerSpec parse(const std::string& text);

  friend bool operator==(const PlannerSpec&, const PlannerSpec&) = default;
};

/// The seven planners of the comparison: STATE plus each scorer at w = 0.5 and 3.
std::vector<PlannerSpec> default_planners();

/// Per-step fall probability sigmoid(k (delta - delta0)).
struct FallModel {
  double k = 2.0;
  double delta0 = 6.0;
  double probability(double delta) const;
};

struct EpisodeConfig {
  Pose2 start;
  Vec2 goal;
  PlannerSpec planner;
  std::uint64_t seed = 0;
  double advance_radius = 0.5;
  double waypoint_spacing = 0.5;  // the global path is resampled to at most this spacing
  double goal_radius = 0.3;
  int max_steps = 500;
  FallModel fall;
  planner::PlannerConfig plan;   // mode, baseline and weight are taken from `planner`
  mpc::MpcConfig mpc;
  mpc::LipParams lip;

  void validate() const;
};

struct StepRecord {
  RobotState state;  // after the step
  Control control;
  double delta = 0.0;
};

struct EpisodeResult {
  bool success = false;
  std::string reason;  // empty on success
  int steps = 0;
  double navigation_time = 0.0;
  double mean_instability = 0.0;
  double max_instability = 0.0;
  planner::Path path;
  std::vector<StepRecord> trajectory;
};

/// Global plan once, then per step: pick the waypoint (advance inside
/// advance_radius), solve the MPC with (v*, w*) frozen at the previous
/// prediction, execute the first control, sample the oracle instability at
/// the new pose with the realized command, and draw a fall.
/// `elevation` is the ground truth used for instability sampling; `travmap`
/// supplies the commands and scores the planners see.
EpisodeResult run_episode(const terrain::ElevationMap& elevation, const TraversabilityMap& travmap,
                          const EpisodeConfig& config);

/// Constraint pair for one MPC step at `state`.
traversability::StabilityCommand step_command(const TraversabilityMap& travmap, const PlannerSpec& planner,
                                              const RobotState& state);

// ─── Worlds ────────────────────────────────────────────────────────────────

struct World {
  std::string name;
  terrain::TerrainSpec terrain;
  Pose2 start;
  Vec2 goal;
};

/// flat, band, two-corridor, rough.
World builtin_world(const std::string& name);
std::vector<std::string> builtin_world_names();

// ─── Benchmark ─────────────────────────────────────────────────────────────

struct CellReport {
  std::string world;
  std::string planner;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::optional<double> mean_instability;  // mean over successful trials of per-trial means
  std::optional<double> max_instability;   // mean over successful trials of per-trial maxima
  std::optional<double> navigation_time;   // mean over successful trials
};

CellReport aggregate(const std::string& world, const std::string& planner, const std::vector<EpisodeResult>& trials);

struct BenchmarkConfig {
  std::vector<World> worlds;
  std::vector<PlannerSpec> planners = default_planners();
  int trials = 10;
  std::uint64_t seed = 0;
  RiskParams risk;
  EpisodeConfig episode;  // template; start, goal, planner and seed are filled per cell and trial
  unsigned threads = 0;   // travmap construction
};

struct BenchmarkReport {
  std::vector<CellReport> cells;
  std::vector<std::vector<EpisodeResult>> episodes;  // parallel to cells, in trial order
};

/// Trial t of every cell uses seed mix_seed(config.seed, t).
std::uint64_t trial_seed(std::uint64_t base, int trial);

BenchmarkReport run_benchmark(const BenchmarkConfig& config, const instability::InstabilityPredictor& model);

void write_report_csv(std::ostream& os, const BenchmarkReport& report, const BenchmarkConfig& config);
void write_report_table(std::ostream& os, const BenchmarkReport& report);
void write_trajectory(std::ostream& os, const EpisodeResult& result, const EpisodeConfig& config);

// ─── Config files ──────────────────────────────────────────────────────────

/// Line-oriented `key = value` entries grouped under `[section]` headers;
/// `#` starts a comment. Keys are addressed as "section.key".
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& is);
  static ConfigFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Throws ConfigError naming the first key outside `allowed`.
  void require_known(const std::vector<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

struct RunSettings {
  std::optional<World> world;               // [world] name = ...
  std::optional<std::string> terrain_file;  // [world] terrain = path
  std::optional<std::string> model_file;    // [model] path = ...
  EpisodeConfig episode;
  RiskParams risk;
  BenchmarkConfig benchmark;
};

/// Every key the schema accepts, "section.key".
const std::vector<std::string>& config_keys();

/// Validates names and values; errors name the offending field.
RunSettings settings_from_config(const ConfigFile& file);

/// Effective configuration as a ConfigFile-compatible text block.
void write_settings(std::ostream& os, const RunSettings& settings);

}  // namespace stanav::sim
