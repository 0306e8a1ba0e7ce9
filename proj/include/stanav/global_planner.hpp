#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stanav/traversability.hpp"

namespace stanav::planner {

using traversability::Baseline;
using traversability::TraversabilityMap;

enum class CostMode { state, baseline };

std::string to_string(CostMode mode);
CostMode parse_cost_mode(const std::string& name);

struct PlannerConfig {
  int iterations = 500;
  double steer_step = 0.5;
  double gamma = 6.0;               // near radius = min(max_radius, gamma * sqrt(ln n / n))
  double max_radius = 1.0;
  double goal_bias = 0.05;
  double goal_tolerance = 0.3;
  double spacing = 0.1;             // intermediate-point spacing along an edge
  CostMode mode = CostMode::state;
  Baseline baseline = Baseline::learned_ins;
  double weight = 0.5;              // baseline trade-off w
  std::optional<double> start_heading;
  std::vector<int> checkpoints{100, 300, 500};
  bool shortcut = true;             // prune waypoints of goal-reaching paths when that lowers the cost

  void validate() const;
};

/// Number of intermediate points on an edge of `length`: ceil(length / spacing), at least 2.
int intermediate_count(double length, double spacing);

/// Expected traversal time of the straight edge from -> to. Each of the
/// intermediate points (sub-segment midpoints) contributes dl / v*, with v*
/// taken from the yaw bin nearest the edge heading. The turn from
/// `prev_heading` to the edge heading is charged once as |dtheta| / w*, with
/// w* at the first point in the bin of `prev_heading`. A zero-length edge
/// turns in place to `heading_override` when given. Infinite when any lookup
/// is undefined.
double edge_cost_state(Vec2 from, Vec2 to, std::optional<double> prev_heading, const TraversabilityMap& map,
                       double spacing = 0.1, std::optional<double> heading_override = std::nullopt);

/// Sum over intermediate points of (1 + w / t_k) dl_k with t_k the baseline score.
double edge_cost_baseline(Vec2 from, Vec2 to, const TraversabilityMap& map, Baseline scorer, double weight,
                          double spacing = 0.1);

/// Heading of the segment from -> to; `fallback` for coincident points.
double edge_heading(Vec2 from, Vec2 to, double fallback = 0.0);

/// Draws map positions with probability proportional to a per-cell weight,
/// then jitters uniformly within the cell. Cells without data get zero weight.
class TraversabilitySampler {
 public:
  static constexpr double kWeightFloor = 0.02;

  /// Weight = bin-averaged v* / 0.5, floored at 0.02.
  explicit TraversabilitySampler(const TraversabilityMap& map);
  /// Weight = baseline score, floored at 0.02.
  TraversabilitySampler(const TraversabilityMap& map, Baseline scorer);

  Vec2 sample(std::mt19937_64& rng) const;
  /// Normalized probability of drawing cell (ix, iy).
  double probability(int ix, int iy) const;
  bool empty() const { return cumulative_.empty() || cumulative_.back() <= 0.0; }

 private:
  void finish();

  const TraversabilityMap* map_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

Vec2 sample_state(const TraversabilityMap& map, std::mt19937_64& rng);

struct PlanNode {
  Vec2 position;
  std::optional<std::size_t> parent;
  double cost = 0.0;
  std::optional<double> heading;  // heading of the edge into this node
  std::vector<std::size_t> children;
};

struct Path {
  std::vector<Vec2> waypoints;
  std::vector<double> edge_costs;
  double cost = 0.0;
  bool empty() const { return waypoints.empty(); }
};

struct Checkpoint {
  int iteration = 0;
  double best_cost = 0.0;  // +inf before the goal is first reached
};

struct PlanResult {
  bool success = false;
  Path path;
  std::vector<Checkpoint> history;
  std::size_t tree_size = 0;
};

/// RRT* over a traversability map with either expected-time or baseline
/// edge costs. Deterministic for a given (seed, config, map).
class TravRRTStar {
 public:
  TravRRTStar(const TraversabilityMap& map, Vec2 start, Vec2 goal, PlannerConfig config, std::uint64_t seed);

  /// One sample / extend / rewire round.
  void step();
  int iterations_done() const { return iterations_; }
  const std::vector<PlanNode>& tree() const { return nodes_; }

  /// Cheapest path to the goal found so far; empty before the goal is reached.
  const Path& best_path() const { return best_; }

  /// Cost of the edge parent -> child given the parent's incoming heading.
  double edge_cost(const PlanNode& parent, Vec2 to) const;
  /// Whether `p` has traversability data for the active cost mode.
  bool defined_at(Vec2 p) const;

  /// Cost of the path waypoints[0] -> ... -> waypoints[n-1] from the start heading.
  double path_cost(const std::vector<Vec2>& waypoints, std::vector<double>* edge_costs = nullptr) const;

 private:
  Vec2 draw();
  std::size_t nearest(Vec2 p) const;
  std::vector<std::size_t> near(Vec2 p) const;
  bool is_ancestor(std::size_t maybe_ancestor, std::size_t node) const;
  bool try_rewire(std::size_t node, std::size_t new_parent);
  void update_best(std::size_t node);
  Path shortcut(std::vector<Vec2> waypoints) const;

  const TraversabilityMap* map_;
  Vec2 goal_;
  PlannerConfig config_;
  std::mt19937_64 rng_;
  std::optional<TraversabilitySampler> sampler_;
  std::vector<PlanNode> nodes_;
  Path best_;
  std::vector<double> offered_;  // node cost when last considered as a goal connection
  int iterations_ = 0;
};

/// Runs config.iterations rounds and records the best cost at each checkpoint.
/// Throws ParameterError when start or goal has no traversability data.
PlanResult plan(Vec2 start, Vec2 goal, const PlannerConfig& config, const TraversabilityMap& map,
                std::uint64_t seed);

/// `# PATH v1` header, then `mode`, `baseline`, `weight`, `seed`, `cost`,
/// `waypoints <n>` and n lines `x y edge_cost` (edge into the waypoint, 0 for the first).
void write_path(std::ostream& os, const Path& path, const PlannerConfig& config, std::uint64_t seed);
Path read_path(std::istream& is);
void save_path(const std::string& file, const Path& path, const PlannerConfig& config, std::uint64_t seed);
Path load_path(const std::string& file);

}  // namespace stanav::planner
