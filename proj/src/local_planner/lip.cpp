#include <cmath>

#include "stanav/local_planner.hpp"

namespace stanav::mpc {

double LipParams::omega() const { return std::sqrt(g / H); }

void LipParams::validate() const {
  if (!(T > 0.0)) throw ParameterError("lip: step duration T must be > 0");
  if (!(H > 0.0)) throw ParameterError("lip: CoM height H must be > 0");
  if (!(g > 0.0)) throw ParameterError("lip: gravity g must be > 0");
}

double lip_displacement(double v_loc, double u_f, const LipParams& params) {
  const double w = params.omega();
  return v_loc * std::sinh(w * params.T) / w + (1.0 - std::cosh(w * params.T)) * u_f;
}

double lip_velocity(double v_loc, double u_f, const LipParams& params) {
  const double w = params.omega();
  return std::cosh(w * params.T) * v_loc - w * std::sinh(w * params.T) * u_f;
}

RobotState lip_step(const RobotState& s, const Control& u, const LipParams& params) {
  const double dx = lip_displacement(s.v_loc, u.u_f, params);
  return {s.x + dx * std::cos(s.phi), s.y + dx * std::sin(s.phi), wrap_angle(s.phi + u.u_dphi),
          lip_velocity(s.v_loc, u.u_f, params)};
}

}  // namespace stanav::mpc
