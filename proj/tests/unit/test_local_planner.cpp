#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "stanav/local_planner.hpp"

using namespace stanav;
using namespace stanav::mpc;

namespace {

struct Phase {
  double x, v;
};

/// RK4 on x'' = w^2 (x - u_f) from x = 0 over [0, T].
Phase integrate_lip(double v0, double u_f, const LipParams& p, double h = 1e-4) {
  const double w2 = p.g / p.H;
  const int steps = int(std::lround(p.T / h));
  h = p.T / steps;
  double x = 0.0, v = v0;
  for (int i = 0; i < steps; ++i) {
    const double k1x = v, k1v = w2 * (x - u_f);
    const double k2x = v + 0.5 * h * k1v, k2v = w2 * (x + 0.5 * h * k1x - u_f);
    const double k3x = v + 0.5 * h * k2v, k3v = w2 * (x + 0.5 * h * k2x - u_f);
    const double k4x = v + h * k3v, k4v = w2 * (x + h * k3x - u_f);
    x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  }
  return {x, v};
}

double orbital_energy(double x, double v, double u_f, double w) { return 0.5 * v * v - 0.5 * w * w * (x - u_f) * (x - u_f); }

double relative_gradient_error(const MpcProblem& problem, const std::vector<double>& z) {
  std::vector<double> g(z.size());
  problem.objective(z, g);
  const double h = 1e-6;
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto up = z, down = z;
    up[i] += h;
    down[i] -= h;
    const double fd = (problem.objective(up) - problem.objective(down)) / (2 * h);
    diff += (fd - g[i]) * (fd - g[i]);
    na += g[i] * g[i];
    nn += fd * fd;
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

double terminal_error(const MpcResult& r, const Waypoint& goal) {
  return std::hypot(r.states.back().x - goal.x, r.states.back().y - goal.y);
}

}  // namespace

TEST(Lip, FixedPoint) {
  const RobotState s{1.0, 2.0, 0.3, 0.0};
  const auto next = lip_step(s, {}, {});
  EXPECT_EQ(next.x, s.x);
  EXPECT_EQ(next.y, s.y);
  EXPECT_EQ(next.phi, s.phi);
  EXPECT_EQ(next.v_loc, 0.0);
}

TEST(Lip, WorkedStepMatchesIntegration) {
  const LipParams p{0.4, 0.9, 9.81};
  EXPECT_NEAR(p.omega(), 3.3015, 1e-4);
  const double arg = p.omega() * p.T;
  const auto next = lip_step({0, 0, 0, 0.3}, {0.0, 0.0}, p);
  EXPECT_NEAR(next.x, 0.3 * std::sinh(arg) / p.omega(), 1e-15);
  EXPECT_NEAR(next.v_loc, 0.3 * std::cosh(arg), 1e-15);
  const auto oracle = integrate_lip(0.3, 0.0, p);
  EXPECT_NEAR(next.x, oracle.x, 1e-8);
  EXPECT_NEAR(next.v_loc, oracle.v, 1e-8);
}

TEST(Lip, TurnOnlyChangesHeading) {
  const auto next = lip_step({1, 1, 0.1, 0}, {0.0, 0.2}, {});
  EXPECT_EQ(next.x, 1.0);
  EXPECT_EQ(next.y, 1.0);
  EXPECT_NEAR(next.phi, 0.3, 1e-15);
}

TEST(Lip, ClosedFormMatchesRk4AndConservesEnergy) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> v(-1, 1), u(-0.6, 0.6), T(0.2, 0.6), H(0.6, 1.2);
  for (int k = 0; k < 200; ++k) {
    const LipParams p{T(rng), H(rng), 9.81};
    const double v0 = v(rng), uf = u(rng);
    const auto oracle = integrate_lip(v0, uf, p);
    const double dx = lip_displacement(v0, uf, p), v1 = lip_velocity(v0, uf, p);
    ASSERT_NEAR(dx, oracle.x, 1e-8);
    ASSERT_NEAR(v1, oracle.v, 1e-8);
    ASSERT_NEAR(orbital_energy(dx, v1, uf, p.omega()), orbital_energy(0.0, v0, uf, p.omega()), 1e-10);
  }
}

TEST(Lip, WorldStepLengthEqualsLocalDisplacement) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> a(-3, 3), v(-1, 1), u(-0.6, 0.6);
  for (int k = 0; k < 100; ++k) {
    const RobotState s{a(rng), a(rng), a(rng), v(rng)};
    const Control c{u(rng), 0.1};
    const auto n = lip_step(s, c);
    EXPECT_NEAR(std::hypot(n.x - s.x, n.y - s.y), std::abs(lip_displacement(s.v_loc, c.u_f)), 1e-14);
  }
}

TEST(Lip, RejectsBadParameters) {
  EXPECT_THROW((LipParams{0.0, 0.9, 9.81}).validate(), ParameterError);
  EXPECT_THROW((LipParams{0.4, -1.0, 9.81}).validate(), ParameterError);
}

TEST(Mpc, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-3, 3), ang(-3, 3), vel(-0.5, 0.5), cmd(0.05, 0.5), z(-0.6, 0.6);
  for (int k = 0; k < 50; ++k) {
    const RobotState x0{pos(rng), pos(rng), ang(rng), vel(rng)};
    const Waypoint goal{pos(rng), pos(rng), ang(rng)};
    std::vector<StabilityCommand> cmds;
    for (int q = 0; q < 6; ++q) cmds.push_back({cmd(rng), 1.5 * cmd(rng)});
    const MpcProblem problem(x0, goal, cmds, MpcConfig{}, LipParams{});
    std::vector<double> zz(problem.dimension());
    for (auto& e : zz) e = z(rng);
    EXPECT_LE(relative_gradient_error(problem, zz), 1e-4) << "instance " << k;
  }
}

TEST(Mpc, GradientIncludesBoxPenalty) {
  const MpcProblem problem({0, 0, 0, 2.0}, {3, 0, 0}, {{0.5, 0.75}}, MpcConfig{}, LipParams{});
  std::vector<double> z{-1.5, 1.2, -0.9, 0.8, 0.1, 0.0, 0.7, -0.6, 0.2, 0.0, 0.0, 0.1};
  EXPECT_GT(problem.objective(z), 1e3);
  EXPECT_LE(relative_gradient_error(problem, z), 1e-4);
}

TEST(Mpc, AtWaypointReturnsZeroControls) {
  const auto r = mpc_solve({1, 2, 0.4, 0.0}, {1, 2, 0.4}, {{0.45, 0.75}});
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.objective, 1e-10);
  for (const auto& c : r.controls) {
    EXPECT_EQ(c.u_f, 0.0);
    EXPECT_EQ(c.u_dphi, 0.0);
  }
}

TEST(Mpc, ResultSatisfiesConstraintsAndDynamics) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(-2, 2), ang(-3, 3), vel(-0.3, 0.3), cmd(0.05, 0.5);
  const LipParams params;
  for (int k = 0; k < 40; ++k) {
    const RobotState x0{pos(rng), pos(rng), ang(rng), vel(rng)};
    const Waypoint goal{pos(rng), pos(rng), ang(rng)};
    std::vector<StabilityCommand> cmds;
    for (int q = 0; q < 6; ++q) cmds.push_back({cmd(rng), 1.5 * cmd(rng)});
    const auto r = mpc_solve(x0, goal, cmds, MpcConfig{}, params);
    ASSERT_EQ(r.controls.size(), 6u);
    ASSERT_EQ(r.states.size(), 7u);
    RobotState s = x0;
    for (std::size_t q = 0; q < r.controls.size(); ++q) {
      const auto& c = r.controls[q];
      const auto next = lip_step(s, c, params);
      EXPECT_NEAR(next.x, r.states[q + 1].x, 1e-12);
      EXPECT_NEAR(next.y, r.states[q + 1].y, 1e-12);
      EXPECT_NEAR(next.v_loc, r.states[q + 1].v_loc, 1e-12);
      s = next;
      const double residual =
          std::abs(next.v_loc) / cmds[q].v_star + std::abs(c.u_dphi) / (cmds[q].w_star * params.T) - 1.0;
      EXPECT_LE(residual, 1e-6) << "instance " << k << " step " << q;
      EXPECT_LE(std::abs(c.u_f), Control::kMaxStep + 1e-3);
      EXPECT_LE(std::abs(c.u_dphi), Control::kMaxTurn);
    }
    EXPECT_TRUE(r.converged || r.iterations == MpcConfig{}.max_iterations);
  }
}

TEST(Mpc, NeverWorseThanStandingStill) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(-2, 2), ang(-3, 3);
  for (int k = 0; k < 30; ++k) {
    const RobotState x0{pos(rng), pos(rng), ang(rng), 0.0};
    const Waypoint goal{pos(rng), pos(rng), ang(rng)};
    const MpcProblem problem(x0, goal, {{0.3, 0.5}}, MpcConfig{}, LipParams{});
    const double still = problem.objective(std::vector<double>(problem.dimension(), 0.0));
    EXPECT_LE(mpc_solve(x0, goal, {{0.3, 0.5}}).objective, still + 1e-12);
  }
}

TEST(Mpc, GenerousCommandsGetCloser) {
  const Waypoint goal{2.0, 0.0, 0.0};
  const auto fast = mpc_solve({0, 0, 0, 0}, goal, {{0.5, 0.75}});
  const auto slow = mpc_solve({0, 0, 0, 0}, goal, {{0.1, 0.15}});
  EXPECT_LT(terminal_error(fast, goal), terminal_error(slow, goal));
  EXPECT_GT(fast.states.back().x, 0.0);
}

TEST(Mpc, TranslationInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(-2, 2), ang(-3, 3), shift(-50, 50);
  for (int k = 0; k < 20; ++k) {
    const RobotState x0{pos(rng), pos(rng), ang(rng), 0.1};
    const Waypoint goal{pos(rng), pos(rng), ang(rng)};
    const double sx = shift(rng), sy = shift(rng);
    const auto a = mpc_solve(x0, goal, {{0.4, 0.6}});
    const auto b = mpc_solve({x0.x + sx, x0.y + sy, x0.phi, x0.v_loc}, {goal.x + sx, goal.y + sy, goal.phi}, {{0.4, 0.6}});
    for (std::size_t q = 0; q < a.controls.size(); ++q) {
      EXPECT_NEAR(a.controls[q].u_f, b.controls[q].u_f, 1e-8);
      EXPECT_NEAR(a.controls[q].u_dphi, b.controls[q].u_dphi, 1e-8);
    }
  }
}

TEST(Mpc, TighteningCommandsNeverLowersObjective) {
  const RobotState x0{0, 0, 0, 0};
  const Waypoint goal{1.5, 0.8, 0.6};
  double previous = 0.0;
  for (double scale : {1.0, 0.8, 0.6, 0.4, 0.2, 0.05}) {
    const auto r = mpc_solve(x0, goal, {{0.5 * scale, 0.75 * scale}});
    EXPECT_GE(r.objective, previous - 1e-9) << scale;
    previous = r.objective;
  }
}

TEST(Mpc, PerStepCommandsAndValidation) {
  EXPECT_THROW(mpc_solve({}, {1, 0, 0}, {{0.5, 0.75}, {0.5, 0.75}}), ParameterError);
  EXPECT_THROW(mpc_solve({}, {1, 0, 0}, {{0.0, 0.75}}), ParameterError);
  MpcConfig bad;
  bad.horizon = 0;
  EXPECT_THROW(mpc_solve({}, {1, 0, 0}, {{0.5, 0.75}}, bad), ParameterError);
}

TEST(Mpc, TraceExport) {
  MpcConfig config;
  config.record_trace = true;
  const auto r = mpc_solve({0, 0, 0, 0}, {1, 1, 0.5}, {{0.4, 0.6}}, config);
  ASSERT_FALSE(r.trace.empty());
  EXPECT_EQ(r.trace.front().iteration, 0);
  for (std::size_t k = 1; k < r.trace.size(); ++k) EXPECT_LE(r.trace[k].objective, r.trace[k - 1].objective);
  std::ostringstream os;
  write_trace(os, r.trace);
  EXPECT_EQ(os.str().rfind("# MPCTRACE v1\niteration,objective,projected_gradient,max_violation\n", 0), 0u);
}
