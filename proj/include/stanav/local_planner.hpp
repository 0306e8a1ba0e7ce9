#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "stanav/common.hpp"
#include "stanav/traversability.hpp"

namespace stanav::mpc {

using traversability::StabilityCommand;

struct RobotState {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  double v_loc = 0.0;

  Vec2 position() const { return {x, y}; }
};

struct Control {
  double u_f = 0.0;
  double u_dphi = 0.0;

  static constexpr double kMaxStep = 0.6;
  static constexpr double kMaxTurn = 0.5;
};

struct LipParams {
  double T = 0.4;
  double H = 0.9;
  double g = 9.81;

  double omega() const;
  void validate() const;
};

/// One walking step of the sagittal LIP, rotated into the world frame by
/// the pre-step heading. The heading is wrapped after the increment.
RobotState lip_step(const RobotState& state, const Control& control, const LipParams& params = {});

/// Local displacement of one step: v sinh(wT)/w + (1 - cosh(wT)) u_f.
double lip_displacement(double v_loc, double u_f, const LipParams& params = {});
/// Velocity after one step: cosh(wT) v - w sinh(wT) u_f.
double lip_velocity(double v_loc, double u_f, const LipParams& params = {});

struct MpcConfig {
  int horizon = 5;  // N; the solve optimizes N + 1 controls
  double w_goal = 1.0;
  double w_phi = 5.0;
  double w_reg = 0.1;
  double box_penalty = 1e4;  // quadratic penalty on |u_f| beyond Control::kMaxStep
  int max_iterations = 200;
  double tolerance = 1e-6;   // projected-gradient infinity norm
  bool record_trace = false;

  void validate() const;
};

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
};

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  double projected_gradient = 0.0;
  double max_violation = 0.0;
};

struct MpcResult {
  std::vector<Control> controls;     // N + 1
  std::vector<RobotState> states;    // N + 2, states[0] = x0
  double objective = 0.0;            // penalized objective at the solution
  bool converged = false;
  int iterations = 0;
  double projected_gradient = 0.0;
  std::vector<TraceRow> trace;
};

/// The horizon problem in reduced form. Decision vector z holds the
/// post-step velocities v_1..v_{N+1} followed by the heading changes
/// d_0..d_N; footstep lengths follow from the LIP velocity map. Step q is
/// constrained by |v_{q+1}| / v*_q + |d_q| / (w*_q T) <= 1.
class MpcProblem {
 public:
  MpcProblem(const RobotState& x0, const Waypoint& goal, std::vector<StabilityCommand> commands, const MpcConfig& config,
             const LipParams& params);

  std::size_t dimension() const { return std::size_t(2 * (n_ + 1)); }
  int steps() const { return n_ + 1; }

  double objective(std::span<const double> z) const;
  /// Objective and its analytic gradient.
  double objective(std::span<const double> z, std::span<double> gradient) const;

  /// Euclidean projection onto the per-step constraint diamonds.
  void project(std::span<double> z) const;
  /// Largest positive constraint residual over the steps.
  double max_violation(std::span<const double> z) const;

  std::vector<Control> controls(std::span<const double> z) const;
  std::vector<RobotState> rollout(std::span<const double> z) const;
  /// Decision vector reproducing a control sequence.
  std::vector<double> encode(std::span<const Control> controls) const;

 private:
  RobotState x0_;
  Waypoint goal_;
  std::vector<StabilityCommand> commands_;
  MpcConfig config_;
  LipParams params_;
  int n_;
  double cosh_, sinh_, omega_;
};

/// Spectral projected gradient with Armijo backtracking, started from the
/// zero-control sequence (projected when it violates the constraints).
/// `commands` holds one (v*, w*) per step, or a single pair for all steps.
MpcResult mpc_solve(const RobotState& x0, const Waypoint& goal, const std::vector<StabilityCommand>& commands,
                    const MpcConfig& config = {}, const LipParams& params = {});

/// `# MPCTRACE v1` then `iteration,objective,projected_gradient,max_violation`.
void write_trace(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace stanav::mpc
