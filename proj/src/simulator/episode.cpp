#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "stanav/instability.hpp"
#include "stanav/simulator.hpp"

namespace stanav::sim {

std::string PlannerSpec::name() const {
  if (mode == CostMode::state) return "STATE";
  const char* label = baseline == Baseline::learned_ins    ? "LearnedInS"
                      : baseline == Baseline::manual_biped ? "ManualBiped"
                                                           : "QuadFoothold";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s(%g)", label, weight);
  return buf;
}

PlannerSpec PlannerSpec::parse(const std::string& text) {
  if (text == "STATE" || text == "state") return state();
  const auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')')
    throw ParameterError("planner '" + text + "': expected STATE or <Baseline>(<w>)");
  const Baseline b = traversability::parse_baseline(text.substr(0, open));
  const std::string arg = text.substr(open + 1, text.size() - open - 2);
  std::size_t used = 0;
  double w = 0.0;
  try {
    w = std::stod(arg, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != arg.size() || !std::isfinite(w) || w < 0.0)
    throw ParameterError("planner '" + text + "': weight must be a number >= 0");
  return with_baseline(b, w);
}

std::vector<PlannerSpec> default_planners() {
  std::vector<PlannerSpec> out{PlannerSpec::state()};
  for (double w : {0.5, 3.0})
    for (Baseline b : {Baseline::learned_ins, Baseline::manual_biped, Baseline::quad_foothold})
      out.push_back(PlannerSpec::with_baseline(b, w));
  return out;
}

double FallModel::probability(double delta) const { return 1.0 / (1.0 + std::exp(-k * (delta - delta0))); }

void EpisodeConfig::validate() const {
  if (!std::isfinite(start.x) || !std::isfinite(start.y) || !std::isfinite(start.yaw) || !std::isfinite(goal.x) ||
      !std::isfinite(goal.y))
    throw ParameterError("episode: start and goal must be finite");
  if (!(advance_radius > 0.0)) throw ParameterError("episode: advance_radius must be > 0");
  if (!(waypoint_spacing > 0.0)) throw ParameterError("episode: waypoint_spacing must be > 0");
  if (!(goal_radius > 0.0)) throw ParameterError("episode: goal_radius must be > 0");
  if (max_steps < 1) throw ParameterError("episode: max_steps must be >= 1");
  if (!(fall.k >= 0.0) || !std::isfinite(fall.delta0)) throw ParameterError("episode: fall model needs k >= 0");
  if (planner.mode == CostMode::baseline && !(planner.weight >= 0.0))
    throw ParameterError("episode: baseline weight must be >= 0");
  mpc.validate();
  lip.validate();
}

traversability::StabilityCommand step_command(const TraversabilityMap& travmap, const PlannerSpec& planner,
                                              const RobotState& state) {
  using traversability::Command;
  if (planner.mode == CostMode::state)
    return travmap.command_at(state.position(), state.phi).value_or(traversability::StabilityCommand{});
  const double t = travmap.score_at(planner.baseline, state.position()).value_or(traversability::kScoreFloor);
  return {t * Command::kMaxV, t * Command::kMaxW};
}

namespace {

EpisodeResult finish(EpisodeResult r, const EpisodeConfig& config) {
  r.navigation_time = r.steps * config.lip.T;
  if (!r.trajectory.empty()) {
    double sum = 0.0, worst = r.trajectory.front().delta;
    for (const auto& s : r.trajectory) {
      sum += s.delta;
      worst = std::max(worst, s.delta);
    }
    r.mean_instability = sum / double(r.trajectory.size());
    r.max_instability = worst;
  }
  return r;
}

/// Inserts evenly spaced points so no two consecutive waypoints are more
/// than `spacing` apart.
std::vector<Vec2> densify(const std::vector<Vec2>& path, double spacing) {
  std::vector<Vec2> out;
  if (path.empty()) return out;
  out.push_back(path.front());
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Vec2 a = path[i - 1], b = path[i];
    const int n = std::max(1, int(std::ceil(distance(a, b) / spacing - 1e-9)));
    for (int k = 1; k <= n; ++k) out.push_back(a + (double(k) / n) * (b - a));
  }
  return out;
}

EpisodeResult failed(EpisodeResult r, std::string reason, const EpisodeConfig& config) {
  r.success = false;
  r.reason = std::move(reason);
  return finish(std::move(r), config);
}

}  // namespace

EpisodeResult run_episode(const terrain::ElevationMap& elevation, const TraversabilityMap& travmap,
                          const EpisodeConfig& config) {
  config.validate();
  EpisodeResult result;
  RobotState state{config.start.x, config.start.y, wrap_angle(config.start.yaw), 0.0};
  if (distance(state.position(), config.goal) <= config.goal_radius) {
    result.success = true;
    result.path.waypoints = {state.position()};
    result.path.edge_costs = {0.0};
    return finish(std::move(result), config);
  }

  planner::PlannerConfig pc = config.plan;
  pc.mode = config.planner.mode;
  pc.baseline = config.planner.baseline;
  pc.weight = config.planner.weight;
  pc.start_heading = state.phi;
  try {
    const auto plan = planner::plan(state.position(), config.goal, pc, travmap, mix_seed(config.seed, 1));
    if (!plan.success) return failed(std::move(result), "planning failed: goal not reached", config);
    result.path = plan.path;
  } catch (const ParameterError& e) {
    return failed(std::move(result), std::string("planning failed: ") + e.what(), config);
  }

  const auto wps = densify(result.path.waypoints, config.waypoint_spacing);
  std::size_t target = std::min<std::size_t>(1, wps.size() - 1);
  const std::uint64_t noise_stream = mix_seed(config.seed, 2);
  std::mt19937_64 fall_rng(mix_seed(config.seed, 3));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const int steps = config.mpc.horizon + 1;
  std::vector<RobotState> predicted;  // previous solve's rollout

  for (;;) {
    if (distance(state.position(), config.goal) <= config.goal_radius) {
      result.success = true;
      break;
    }
    if (result.steps == config.max_steps) return failed(std::move(result), "step budget exhausted", config);

    while (target + 1 < wps.size() && distance(state.position(), wps[target]) < config.advance_radius) ++target;
    const Vec2 from = wps[target - 1], to = wps[target];
    const Vec2 seg = to - from;
    const double heading = norm(seg) > 0.0 ? std::atan2(seg.y, seg.x) : state.phi;
    const mpc::Waypoint waypoint{to.x, to.y, heading};

    std::vector<traversability::StabilityCommand> commands;
    commands.reserve(std::size_t(steps));
    for (int q = 0; q < steps; ++q) {
      const RobotState& at = predicted.empty() ? state : predicted[std::size_t(std::min(q + 1, steps))];
      commands.push_back(step_command(travmap, config.planner, at));
    }

    const auto solved = mpc::mpc_solve(state, waypoint, commands, config.mpc, config.lip);
    const Control u = solved.controls.front();
    const double dx = mpc::lip_displacement(state.v_loc, u.u_f, config.lip);
    state = mpc::lip_step(state, u, config.lip);
    predicted = solved.states;
    ++result.steps;

    const auto patch = terrain::try_extract_patch(elevation, Pose2{state.x, state.y, state.phi});
    if (!patch) return failed(std::move(result), "left the known map", config);
    const instability::Command executed{std::abs(dx) / config.lip.T, std::abs(u.u_dphi) / config.lip.T};
    const double delta =
        instability::oracle_instability(*patch, executed, mix_seed(noise_stream, std::uint64_t(result.steps)));
    result.trajectory.push_back({state, u, delta});
    if (uniform(fall_rng) < config.fall.probability(delta)) return failed(std::move(result), "fall", config);
  }
  return finish(std::move(result), config);
}

}  // namespace stanav::sim
