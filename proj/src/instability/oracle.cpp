#include <cmath>
#include <random>

#include "stanav/instability.hpp"

namespace stanav::instability {

void Command::validate() const {
  if (!std::isfinite(v) || !std::isfinite(w)) throw ParameterError("command: non-finite velocity");
  if (std::abs(v) > kMaxV + 1e-12) throw ParameterError("command: |v| exceeds 0.5 m/s");
  if (std::abs(w) > kMaxW + 1e-12) throw ParameterError("command: |w| exceeds 0.75 rad/s");
}

double oracle_mean(const PatchFeatures& f, Command cmd) {
  const double v = std::abs(cmd.v);
  const double w = std::abs(cmd.w);
  const double terrain = 8.0 * std::abs(f.sagittal_slope) + 6.0 * std::abs(f.lateral_slope) + 25.0 * f.height_std;
  return 1.0 + 3.0 * v + 1.2 * w + terrain * (0.5 + v) + 4.0 * f.max_gradient * v;
}

double oracle_sigma(const PatchFeatures& f, Command cmd) {
  return 0.2 + 0.5 * f.height_std + 0.3 * std::abs(cmd.v);
}

double oracle_instability(const PatchFeatures& f, Command cmd, std::uint64_t noise_seed) {
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double z = normal(rng);
  return oracle_mean(f, cmd) + oracle_sigma(f, cmd) * z;
}

double oracle_instability(const Patch& patch, Command cmd, std::uint64_t noise_seed) {
  return oracle_instability(terrain::patch_features(patch), cmd, noise_seed);
}

InstabilityEstimate OracleModel::predict(const PatchFeatures& features, Command cmd) const {
  return {oracle_mean(features, cmd), oracle_sigma(features, cmd)};
}

InstabilityEstimate predict(const InstabilityPredictor& model, const Patch& patch, Command cmd) {
  return model.predict(terrain::patch_features(patch), cmd);
}

}  // namespace stanav::instability
