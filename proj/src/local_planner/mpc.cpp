#include <algorithm>
#include <cmath>
#include <ostream>

#include "stanav/local_planner.hpp"

namespace stanav::mpc {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Projection of (v, d) onto {|v| / a + |d| / b <= 1}.
void project_diamond(double& v, double& d, double a, double b) {
  const double av = std::abs(v), ad = std::abs(d);
  if (av / a + ad / b <= 1.0) return;
  const double na = 1.0 / a, nb = 1.0 / b;
  const double t = (av * na + ad * nb - 1.0) / (na * na + nb * nb);
  double pv = av - t * na, pd = ad - t * nb;
  if (pv < 0.0) {
    pv = 0.0;
    pd = b;
  } else if (pd < 0.0) {
    pv = a;
    pd = 0.0;
  }
  v = std::copysign(pv, v);
  d = std::copysign(pd, d);
}

/// Quadratic penalty on |x| beyond `limit`; adds d/dx to `grad`.
double box_penalty(double x, double limit, double weight, double& grad) {
  const double excess = std::abs(x) - limit;
  if (excess <= 0.0) {
    grad = 0.0;
    return 0.0;
  }
  grad = 2.0 * weight * excess * (x < 0.0 ? -1.0 : 1.0);
  return weight * excess * excess;
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 1) throw ParameterError("mpc: horizon must be >= 1");
  if (w_goal < 0.0 || w_phi < 0.0 || w_reg < 0.0) throw ParameterError("mpc: weights must be >= 0");
  if (box_penalty < 0.0) throw ParameterError("mpc: box_penalty must be >= 0");
  if (max_iterations < 1) throw ParameterError("mpc: max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw ParameterError("mpc: tolerance must be > 0");
}

MpcProblem::MpcProblem(const RobotState& x0, const Waypoint& goal, std::vector<StabilityCommand> commands,
                       const MpcConfig& config, const LipParams& params)
    : x0_(x0), goal_(goal), config_(config), params_(params), n_(config.horizon) {
  config.validate();
  params.validate();
  if (commands.size() == 1) commands.assign(std::size_t(n_ + 1), commands.front());
  if (commands.size() != std::size_t(n_ + 1))
    throw ParameterError("mpc: expected 1 or N + 1 = " + std::to_string(n_ + 1) + " command pairs");
  for (const auto& c : commands)
    if (!(c.v_star >= traversability::kFloorV) || !(c.w_star >= traversability::kFloorW))
      throw ParameterError("mpc: commands must be >= 0.001");
  if (!std::isfinite(x0.x) || !std::isfinite(x0.y) || !std::isfinite(x0.phi) || !std::isfinite(x0.v_loc))
    throw ParameterError("mpc: initial state must be finite");
  commands_ = std::move(commands);
  omega_ = params.omega();
  cosh_ = std::cosh(omega_ * params.T);
  sinh_ = std::sinh(omega_ * params.T);
}

double MpcProblem::objective(std::span<const double> z) const {
  std::vector<double> scratch(dimension());
  return objective(z, scratch);
}

double MpcProblem::objective(std::span<const double> z, std::span<double> grad) const {
  const int steps = n_ + 1;
  const double ws = omega_ * sinh_;
  const double k = (cosh_ - 1.0) / ws;  // displacement = k (v_q + v_{q+1})

  const auto ns = std::size_t(steps);
  std::vector<double> v(ns + 1), phi(ns + 1), dx(ns);
  v[0] = x0_.v_loc;
  phi[0] = x0_.phi;
  for (int q = 0; q < steps; ++q) {
    v[std::size_t(q + 1)] = z[std::size_t(q)];
    phi[std::size_t(q + 1)] = phi[std::size_t(q)] + z[std::size_t(steps + q)];
  }
  double x = x0_.x, y = x0_.y;
  for (int q = 0; q < steps; ++q) {
    dx[std::size_t(q)] = k * (v[std::size_t(q)] + v[std::size_t(q + 1)]);
    x += dx[std::size_t(q)] * std::cos(phi[std::size_t(q)]);
    y += dx[std::size_t(q)] * std::sin(phi[std::size_t(q)]);
  }
  const double ex = x - goal_.x, ey = y - goal_.y;
  const double ephi = wrap_angle(phi[std::size_t(steps)] - goal_.phi);
  double f = config_.w_goal * (ex * ex + ey * ey) + config_.w_phi * ephi * ephi;
  for (int q = 0; q < steps; ++q) {
    const double d = z[std::size_t(steps + q)];
    f += config_.w_reg * (v[std::size_t(q)] * v[std::size_t(q)] + d * d);
  }

  std::fill(grad.begin(), grad.end(), 0.0);
  const double gx = 2.0 * config_.w_goal * ex, gy = 2.0 * config_.w_goal * ey;
  for (int j = 1; j <= steps; ++j) {
    double c = std::cos(phi[std::size_t(j - 1)]), s = std::sin(phi[std::size_t(j - 1)]);
    if (j <= n_) {
      c += std::cos(phi[std::size_t(j)]);
      s += std::sin(phi[std::size_t(j)]);
      grad[std::size_t(j - 1)] += 2.0 * config_.w_reg * v[std::size_t(j)];
    }
    grad[std::size_t(j - 1)] += k * (gx * c + gy * s);
  }
  double suffix = 0.0;  // sum over q > i of dx_q (-gx sin phi_q + gy cos phi_q)
  for (int i = n_; i >= 0; --i) {
    grad[std::size_t(steps + i)] += suffix + 2.0 * config_.w_phi * ephi + 2.0 * config_.w_reg * z[std::size_t(steps + i)];
    suffix += dx[std::size_t(i)] * (-gx * std::sin(phi[std::size_t(i)]) + gy * std::cos(phi[std::size_t(i)]));
  }

  if (config_.box_penalty > 0.0) {
    for (int q = 0; q < steps; ++q) {
      const double u = (cosh_ * v[std::size_t(q)] - v[std::size_t(q + 1)]) / ws;
      double du = 0.0;
      f += box_penalty(u, Control::kMaxStep, config_.box_penalty, du);
      if (q > 0) grad[std::size_t(q - 1)] += du * cosh_ / ws;
      grad[std::size_t(q)] -= du / ws;
      double dd = 0.0;
      f += box_penalty(z[std::size_t(steps + q)], Control::kMaxTurn, config_.box_penalty, dd);
      grad[std::size_t(steps + q)] += dd;
    }
  }
  return f;
}

void MpcProblem::project(std::span<double> z) const {
  const int steps = n_ + 1;
  for (int q = 0; q < steps; ++q) {
    const auto& c = commands_[std::size_t(q)];
    project_diamond(z[std::size_t(q)], z[std::size_t(steps + q)], c.v_star, c.w_star * params_.T);
  }
}

double MpcProblem::max_violation(std::span<const double> z) const {
  const int steps = n_ + 1;
  double worst = 0.0;
  for (int q = 0; q < steps; ++q) {
    const auto& c = commands_[std::size_t(q)];
    const double r =
        std::abs(z[std::size_t(q)]) / c.v_star + std::abs(z[std::size_t(steps + q)]) / (c.w_star * params_.T) - 1.0;
    worst = std::max(worst, r);
  }
  return worst;
}

std::vector<Control> MpcProblem::controls(std::span<const double> z) const {
  const int steps = n_ + 1;
  std::vector<Control> out;
  double v = x0_.v_loc;
  for (int q = 0; q < steps; ++q) {
    const double next = z[std::size_t(q)];
    out.push_back({(cosh_ * v - next) / (omega_ * sinh_), z[std::size_t(steps + q)]});
    v = next;
  }
  return out;
}

std::vector<RobotState> MpcProblem::rollout(std::span<const double> z) const {
  std::vector<RobotState> states{x0_};
  for (const auto& u : controls(z)) states.push_back(lip_step(states.back(), u, params_));
  return states;
}

std::vector<double> MpcProblem::encode(std::span<const Control> controls) const {
  const int steps = n_ + 1;
  std::vector<double> z(dimension());
  double v = x0_.v_loc;
  for (int q = 0; q < steps; ++q) {
    v = cosh_ * v - omega_ * sinh_ * controls[std::size_t(q)].u_f;
    z[std::size_t(q)] = v;
    z[std::size_t(steps + q)] = controls[std::size_t(q)].u_dphi;
  }
  return z;
}

MpcResult mpc_solve(const RobotState& x0, const Waypoint& goal, const std::vector<StabilityCommand>& commands,
                    const MpcConfig& config, const LipParams& params) {
  const MpcProblem problem(x0, goal, commands, config, params);
  const std::size_t n = problem.dimension();

  std::vector<double> z = problem.encode(std::vector<Control>(std::size_t(problem.steps())));
  problem.project(z);
  std::vector<double> g(n), trial(n), g_trial(n), step(n);
  double f = problem.objective(z, g);

  auto projected_gradient = [&]() {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] - g[i];
    problem.project(p);
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(p[i] - z[i]));
    return m;
  };

  MpcResult result;
  double gmax = 0.0;
  for (double gi : g) gmax = std::max(gmax, std::abs(gi));
  double alpha = gmax > 0.0 ? 1.0 / gmax : 1.0;
  double pg = projected_gradient();
  int it = 0;
  for (;; ++it) {
    if (config.record_trace) result.trace.push_back({it, f, pg, problem.max_violation(z)});
    if (pg <= config.tolerance) {
      result.converged = true;
      break;
    }
    if (it == config.max_iterations) break;

    double a = alpha, f_trial = f;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = z[i] - a * g[i];
      problem.project(trial);
      for (std::size_t i = 0; i < n; ++i) step[i] = trial[i] - z[i];
      f_trial = problem.objective(trial, g_trial);
      if (f_trial <= f + 1e-4 * dot(g, step)) {
        accepted = true;
        break;
      }
      a *= 0.5;
    }
    if (!accepted) break;  // no descent left at machine precision

    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ss += step[i] * step[i];
      sy += step[i] * (g_trial[i] - g[i]);
    }
    alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : std::min(1e10, 10.0 * a);
    z.swap(trial);
    g.swap(g_trial);
    f = f_trial;
    pg = projected_gradient();
  }

  result.iterations = it;
  result.projected_gradient = pg;
  result.objective = f;
  result.controls = problem.controls(z);
  result.states = problem.rollout(z);
  return result;
}

void write_trace(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "# MPCTRACE v1\niteration,objective,projected_gradient,max_violation\n";
  for (const auto& r : trace) os << r.iteration << ',' << r.objective << ',' << r.projected_gradient << ',' << r.max_violation << '\n';
}

}  // namespace stanav::mpc
