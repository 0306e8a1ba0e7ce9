#include <cmath>
#include <numbers>

#include "stanav/traversability.hpp"

namespace stanav::traversability {

void RiskParams::validate() const {
  if (!(delta_limit > 0.0)) throw ParameterError("risk: delta_limit must be > 0");
  if (!(alpha > 0.5 && alpha < 1.0)) throw ParameterError("risk: alpha must lie in (0.5, 1)");
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("normal quantile: probability must lie in (0, 1)");
  // Acklam (2003), rational approximations on the central and tail regions.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p == 0.5) return 0.0;
  // Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double var_gaussian(const InstabilityEstimate& est, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("VaR: alpha must lie in (0, 1)");
  if (est.sigma == 0.0) return est.mean;
  return est.mean + normal_quantile(alpha) * est.sigma;
}

std::array<double, kSweepSteps + 1> linear_sweep() {
  std::array<double, kSweepSteps + 1> g{};
  for (int k = 0; k <= kSweepSteps; ++k) g[std::size_t(k)] = kStepV * (kSweepSteps - k);
  return g;
}

std::array<double, kSweepSteps + 1> angular_sweep() {
  std::array<double, kSweepSteps + 1> g{};
  for (int k = 0; k <= kSweepSteps; ++k) g[std::size_t(k)] = kStepW * (kSweepSteps - k);
  return g;
}

StabilityCommand stability_aware_command(const InstabilityPredictor& model, const PatchFeatures& features,
                                         const RiskParams& risk) {
  const double z = normal_quantile(risk.alpha);
  auto safe = [&](Command cmd) {
    const InstabilityEstimate est = model.predict(features, cmd);
    return est.mean + z * est.sigma < risk.delta_limit;
  };
  StabilityCommand out{kFloorV, kFloorW};
  for (double v : linear_sweep())
    if (safe({v, 0.0})) {
      out.v_star = v;
      break;
    }
  for (double w : angular_sweep())
    if (safe({0.0, w})) {
      out.w_star = w;
      break;
    }
  // A swept zero means the robot may stand but not move: use the floor.
  if (out.v_star == 0.0) out.v_star = kFloorV;
  if (out.w_star == 0.0) out.w_star = kFloorW;
  return out;
}

StabilityCommand stability_aware_command(const InstabilityPredictor& model, const Patch& patch,
                                         const RiskParams& risk) {
  return stability_aware_command(model, terrain::patch_features(patch), risk);
}

}  // namespace stanav::traversability
