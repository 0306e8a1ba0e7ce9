#include <algorithm>
#include <cmath>
#include <limits>

#include "stanav/global_planner.hpp"

namespace stanav::planner {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCoincident = 1e-9;
constexpr double kImprovement = 1e-12;
}  // namespace

std::string to_string(CostMode mode) { return mode == CostMode::state ? "state" : "baseline"; }

CostMode parse_cost_mode(const std::string& name) {
  if (name == "state" || name == "STATE") return CostMode::state;
  if (name == "baseline") return CostMode::baseline;
  throw ParameterError("unknown cost mode '" + name + "'");
}

void PlannerConfig::validate() const {
  if (iterations < 1) throw ParameterError("planner: iterations must be >= 1");
  if (!(spacing > 0.0)) throw ParameterError("planner: spacing must be > 0");
  if (!(steer_step > 0.0)) throw ParameterError("planner: steer_step must be > 0");
  if (!(gamma > 0.0) || !(max_radius > 0.0)) throw ParameterError("planner: near radius parameters must be > 0");
  if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) throw ParameterError("planner: goal_bias must lie in [0, 1]");
  if (!(goal_tolerance >= 0.0)) throw ParameterError("planner: goal_tolerance must be >= 0");
  if (!(weight >= 0.0)) throw ParameterError("planner: weight must be >= 0");
}

int intermediate_count(double length, double spacing) {
  return std::max(2, int(std::ceil(length / spacing - 1e-9)));
}

double edge_heading(Vec2 from, Vec2 to, double fallback) {
  const Vec2 d = to - from;
  if (norm(d) < kCoincident) return fallback;
  return std::atan2(d.y, d.x);
}

double edge_cost_state(Vec2 from, Vec2 to, std::optional<double> prev_heading, const TraversabilityMap& map,
                       double spacing, std::optional<double> heading_override) {
  const double length = distance(from, to);
  const double heading =
      length < kCoincident ? heading_override.value_or(prev_heading.value_or(0.0)) : edge_heading(from, to);

  double cost = 0.0;
  Vec2 first = from;
  if (length >= kCoincident) {
    const int n = intermediate_count(length, spacing);
    const double dl = length / n;
    for (int k = 0; k < n; ++k) {
      const Vec2 p = from + (to - from) * ((k + 0.5) / n);
      if (k == 0) first = p;
      const auto cmd = map.command_at(p, heading);
      if (!cmd) return kInf;
      cost += dl / cmd->v_star;
    }
  }
  if (prev_heading) {
    const double turn = std::abs(wrap_angle(heading - *prev_heading));
    if (turn > 0.0) {
      const auto cmd = map.command_at(first, *prev_heading);
      if (!cmd) return kInf;
      cost += turn / cmd->w_star;
    }
  }
  return cost;
}

double edge_cost_baseline(Vec2 from, Vec2 to, const TraversabilityMap& map, Baseline scorer, double weight,
                          double spacing) {
  const double length = distance(from, to);
  if (length < kCoincident) return 0.0;
  const int n = intermediate_count(length, spacing);
  const double dl = length / n;
  double cost = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto t = map.score_at(scorer, from + (to - from) * ((k + 0.5) / n));
    if (!t) return kInf;
    cost += (1.0 + weight / *t) * dl;
  }
  return cost;
}

// ─── Sampling ──────────────────────────────────────────────────────────────

TraversabilitySampler::TraversabilitySampler(const TraversabilityMap& map) : map_(&map) {
  weights_.reserve(std::size_t(map.width()) * std::size_t(map.height()));
  for (int iy = 0; iy < map.height(); ++iy)
    for (int ix = 0; ix < map.width(); ++ix) {
      const double v = map.mean_v_star(ix, iy);
      weights_.push_back(std::isfinite(v) ? std::max(kWeightFloor, v / traversability::kMaxV) : 0.0);
    }
  finish();
}

TraversabilitySampler::TraversabilitySampler(const TraversabilityMap& map, Baseline scorer) : map_(&map) {
  weights_.reserve(std::size_t(map.width()) * std::size_t(map.height()));
  for (int iy = 0; iy < map.height(); ++iy)
    for (int ix = 0; ix < map.width(); ++ix)
      weights_.push_back(map.score_defined(scorer, ix, iy) ? std::max(kWeightFloor, map.score(scorer, ix, iy)) : 0.0);
  finish();
}

void TraversabilitySampler::finish() {
  cumulative_.resize(weights_.size());
  double total = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) cumulative_[k] = total += weights_[k];
}

double TraversabilitySampler::probability(int ix, int iy) const {
  if (empty()) return 0.0;
  return weights_[std::size_t(iy) * std::size_t(map_->width()) + std::size_t(ix)] / cumulative_.back();
}

Vec2 TraversabilitySampler::sample(std::mt19937_64& rng) const {
  if (empty()) throw ParameterError("sampler: traversability map has no defined cells");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  // Skip zero-weight cells that share the cumulative value.
  while (weights_[std::size_t(it - cumulative_.begin())] <= 0.0) ++it;
  const std::size_t cell = std::size_t(it - cumulative_.begin());
  const int ix = int(cell % std::size_t(map_->width()));
  const int iy = int(cell / std::size_t(map_->width()));
  const double h = map_->resolution();
  const Vec2 c = map_->node_position(ix, iy);
  const double jx = (unit(rng) - 0.5) * h;
  const double jy = (unit(rng) - 0.5) * h;
  return {c.x + jx, c.y + jy};
}

Vec2 sample_state(const TraversabilityMap& map, std::mt19937_64& rng) { return TraversabilitySampler(map).sample(rng); }

// ─── TravRRT* ──────────────────────────────────────────────────────────────

TravRRTStar::TravRRTStar(const TraversabilityMap& map, Vec2 start, Vec2 goal, PlannerConfig config,
                         std::uint64_t seed)
    : map_(&map), goal_(goal), config_(std::move(config)), rng_(mix_seed(seed, 0x7217)) {
  config_.validate();
  if (config_.mode == CostMode::state)
    sampler_.emplace(map);
  else
    sampler_.emplace(map, config_.baseline);
  nodes_.push_back(PlanNode{start, std::nullopt, 0.0, config_.start_heading, {}});
  update_best(0);
}

double TravRRTStar::edge_cost(const PlanNode& parent, Vec2 to) const {
  if (config_.mode == CostMode::state) return edge_cost_state(parent.position, to, parent.heading, *map_, config_.spacing);
  return edge_cost_baseline(parent.position, to, *map_, config_.baseline, config_.weight, config_.spacing);
}

double TravRRTStar::path_cost(const std::vector<Vec2>& waypoints, std::vector<double>* edge_costs) const {
  if (edge_costs) edge_costs->clear();
  double total = 0.0;
  PlanNode cursor{waypoints.empty() ? Vec2{} : waypoints.front(), std::nullopt, 0.0, config_.start_heading, {}};
  for (std::size_t k = 1; k < waypoints.size(); ++k) {
    const double c = edge_cost(cursor, waypoints[k]);
    if (edge_costs) edge_costs->push_back(c);
    total += c;
    cursor.heading = edge_heading(cursor.position, waypoints[k], cursor.heading.value_or(0.0));
    cursor.position = waypoints[k];
  }
  return total;
}

Vec2 TravRRTStar::draw() {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng_) < config_.goal_bias) return goal_;
  return sampler_->sample(rng_);
}

std::size_t TravRRTStar::nearest(Vec2 p) const {
  std::size_t best = 0;
  double best_d = kInf;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const double d = distance(nodes_[k].position, p);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

std::vector<std::size_t> TravRRTStar::near(Vec2 p) const {
  const double n = double(nodes_.size() + 1);
  const double radius = std::min(config_.max_radius, config_.gamma * std::sqrt(std::log(n) / n));
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k)
    if (distance(nodes_[k].position, p) <= radius) out.push_back(k);
  return out;
}

bool TravRRTStar::is_ancestor(std::size_t maybe_ancestor, std::size_t node) const {
  for (std::optional<std::size_t> k = node; k; k = nodes_[*k].parent)
    if (*k == maybe_ancestor) return true;
  return false;
}

bool TravRRTStar::try_rewire(std::size_t node, std::size_t new_parent) {
  if (node == 0 || is_ancestor(node, new_parent)) return false;
  const PlanNode& np = nodes_[new_parent];
  if (distance(np.position, nodes_[node].position) < kCoincident) return false;
  const double cost = np.cost + edge_cost(np, nodes_[node].position);
  if (!(cost < nodes_[node].cost - kImprovement)) return false;

  // Costs of edges leaving `node` depend on its incoming heading; reject
  // rewires that would make any child (and hence its subtree) more expensive.
  PlanNode moved = nodes_[node];
  moved.cost = cost;
  moved.heading = edge_heading(np.position, moved.position);
  std::vector<double> child_costs;
  for (std::size_t c : moved.children) {
    const double cc = cost + edge_cost(moved, nodes_[c].position);
    if (!(cc <= nodes_[c].cost + kImprovement)) return false;
    child_costs.push_back(cc);
  }

  auto& siblings = nodes_[*nodes_[node].parent].children;
  siblings.erase(std::find(siblings.begin(), siblings.end(), node));
  nodes_[new_parent].children.push_back(node);
  nodes_[node].parent = new_parent;
  nodes_[node].cost = moved.cost;
  nodes_[node].heading = moved.heading;

  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < moved.children.size(); ++i) {
    nodes_[moved.children[i]].cost = child_costs[i];
    stack.push_back(moved.children[i]);
  }
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    for (std::size_t c : nodes_[k].children) {
      nodes_[c].cost = nodes_[k].cost + edge_cost(nodes_[k], nodes_[c].position);
      stack.push_back(c);
    }
  }
  return true;
}

void TravRRTStar::update_best(std::size_t node) {
  if (distance(nodes_[node].position, goal_) > config_.goal_tolerance + kCoincident) return;
  if (offered_.size() <= node) offered_.resize(node + 1, kInf);
  if (offered_[node] == nodes_[node].cost) return;
  offered_[node] = nodes_[node].cost;

  std::vector<Vec2> waypoints;
  for (std::optional<std::size_t> k = node; k; k = nodes_[*k].parent) waypoints.push_back(nodes_[*k].position);
  std::reverse(waypoints.begin(), waypoints.end());
  if (distance(waypoints.back(), goal_) >= kCoincident) waypoints.push_back(goal_);
  if (!std::isfinite(path_cost(waypoints))) return;
  Path candidate = shortcut(std::move(waypoints));
  if (best_.empty() || candidate.cost < best_.cost - kImprovement) best_ = std::move(candidate);
}

Path TravRRTStar::shortcut(std::vector<Vec2> waypoints) const {
  double cost = path_cost(waypoints);
  if (config_.shortcut) {
    for (std::size_t i = 0; i + 2 < waypoints.size(); ++i) {
      for (std::size_t j = waypoints.size() - 1; j >= i + 2; --j) {
        std::vector<Vec2> trial(waypoints.begin(), waypoints.begin() + std::ptrdiff_t(i) + 1);
        trial.insert(trial.end(), waypoints.begin() + std::ptrdiff_t(j), waypoints.end());
        const double c = path_cost(trial);
        if (c < cost - kImprovement) {
          waypoints = std::move(trial);
          cost = c;
          break;
        }
      }
    }
  }
  Path out;
  out.cost = path_cost(waypoints, &out.edge_costs);
  out.waypoints = std::move(waypoints);
  return out;
}

void TravRRTStar::step() {
  ++iterations_;
  const Vec2 target = draw();
  const std::size_t from = nearest(target);
  const double d = distance(nodes_[from].position, target);
  if (d < kCoincident) return;
  const Vec2 p = d > config_.steer_step ? nodes_[from].position + (target - nodes_[from].position) * (config_.steer_step / d)
                                        : target;

  auto candidates = near(p);
  if (std::find(candidates.begin(), candidates.end(), from) == candidates.end()) candidates.push_back(from);
  std::optional<std::size_t> parent;
  double best_cost = kInf;
  for (std::size_t k : candidates) {
    if (distance(nodes_[k].position, p) < kCoincident) return;
    const double c = nodes_[k].cost + edge_cost(nodes_[k], p);
    if (c < best_cost) {
      best_cost = c;
      parent = k;
    }
  }
  if (!parent) return;

  const std::size_t added = nodes_.size();
  nodes_.push_back(PlanNode{p, parent, best_cost, edge_heading(nodes_[*parent].position, p), {}});
  nodes_[*parent].children.push_back(added);

  // Cascade: every node that got cheaper offers itself as a parent to its own neighbours.
  std::vector<std::size_t> improved{added};
  for (std::size_t head = 0; head < improved.size(); ++head) {
    const std::size_t u = improved[head];
    for (std::size_t k : near(nodes_[u].position))
      if (k != u && k != nodes_[u].parent && try_rewire(k, u)) improved.push_back(k);
  }

  for (std::size_t k = 0; k < nodes_.size(); ++k) update_best(k);
}

bool TravRRTStar::defined_at(Vec2 p) const {
  const auto node = map_->nearest_node(p);
  if (!node) return false;
  if (config_.mode == CostMode::baseline) return map_->score_defined(config_.baseline, (*node)[0], (*node)[1]);
  for (int b = 0; b < traversability::kYawBins; ++b)
    if (map_->defined((*node)[0], (*node)[1], b)) return true;
  return false;
}

PlanResult plan(Vec2 start, Vec2 goal, const PlannerConfig& config, const TraversabilityMap& map,
                std::uint64_t seed) {
  config.validate();
  PlanResult result;
  if (distance(start, goal) < kCoincident) {
    result.success = true;
    result.path = Path{{start}, {}, 0.0};
    result.tree_size = 1;
    for (int c : config.checkpoints) result.history.push_back({c, 0.0});
    return result;
  }
  TravRRTStar rrt(map, start, goal, config, seed);
  if (!rrt.defined_at(start)) throw ParameterError("planner: start lies outside the traversability map");
  if (!rrt.defined_at(goal)) throw ParameterError("planner: goal lies outside the traversability map");

  std::vector<int> checkpoints = config.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  auto next = checkpoints.begin();
  for (int it = 1; it <= config.iterations; ++it) {
    rrt.step();
    for (; next != checkpoints.end() && *next <= it; ++next)
      result.history.push_back({*next, rrt.best_path().empty() ? kInf : rrt.best_path().cost});
  }
  result.success = !rrt.best_path().empty();
  result.path = rrt.best_path();
  result.tree_size = rrt.tree().size();
  return result;
}

}  // namespace stanav::planner
