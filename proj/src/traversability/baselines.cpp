#include <algorithm>
#include <cmath>
#include <numbers>

#include "stanav/traversability.hpp"

namespace stanav::traversability {

namespace {

constexpr double kManualMaxSlope = 20.0 * std::numbers::pi / 180.0;
constexpr double kManualMaxStep = 0.08;
constexpr double kFootholdDecay = 0.05;
constexpr int kFootholdRadius = 2;

/// Largest |dh| to a 4-neighbour.
double max_neighbour_step(const Patch& p, int i, int j) {
  double d = 0.0;
  const int n = p.nodes;
  const double h = p.at(i, j);
  if (i > 0) d = std::max(d, std::abs(p.at(i - 1, j) - h));
  if (i + 1 < n) d = std::max(d, std::abs(p.at(i + 1, j) - h));
  if (j > 0) d = std::max(d, std::abs(p.at(i, j - 1) - h));
  if (j + 1 < n) d = std::max(d, std::abs(p.at(i, j + 1) - h));
  return d;
}

}  // namespace

std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::learned_ins: return "learned_ins";
    case Baseline::manual_biped: return "manual_biped";
    case Baseline::quad_foothold: return "quad_foothold";
  }
  return "learned_ins";
}

Baseline parse_baseline(const std::string& name) {
  if (name == "learned_ins" || name == "LearnedInS") return Baseline::learned_ins;
  if (name == "manual_biped" || name == "ManualBiped") return Baseline::manual_biped;
  if (name == "quad_foothold" || name == "QuadFoothold") return Baseline::quad_foothold;
  throw ParameterError("unknown baseline '" + name + "'");
}

double manual_biped_score(const Patch& p) {
  const int n = p.nodes;
  if (n < 2) return 1.0;
  const double r = p.resolution;
  std::size_t ok = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int i0 = std::max(i - 1, 0), i1 = std::min(i + 1, n - 1);
      const int j0 = std::max(j - 1, 0), j1 = std::min(j + 1, n - 1);
      const double gx = (p.at(i1, j) - p.at(i0, j)) / ((i1 - i0) * r);
      const double gy = (p.at(i, j1) - p.at(i, j0)) / ((j1 - j0) * r);
      const bool slope_ok = std::atan(std::hypot(gx, gy)) <= kManualMaxSlope;
      const bool step_ok = max_neighbour_step(p, i, j) <= kManualMaxStep;
      if (slope_ok && step_ok) ++ok;
    }
  }
  return std::max(kScoreFloor, double(ok) / double(n * n));
}

double quad_foothold_score(const Patch& p) {
  const int n = p.nodes;
  std::vector<double> disc(std::size_t(n) * std::size_t(n));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) disc[std::size_t(j * n + i)] = max_neighbour_step(p, i, j);

  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      double worst = 0.0;
      for (int dj = -kFootholdRadius; dj <= kFootholdRadius; ++dj)
        for (int di = -kFootholdRadius; di <= kFootholdRadius; ++di) {
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
          const double weight = 1.0 - std::hypot(double(di), double(dj)) / (kFootholdRadius + 1.0);
          worst = std::max(worst, weight * disc[std::size_t(jj * n + ii)]);
        }
      total += std::exp(-worst / kFootholdDecay);
    }
  }
  return std::max(kScoreFloor, total / double(n * n));
}

double learned_ins_calibration(const InstabilityPredictor& model, const RiskParams& risk) {
  return var_gaussian(model.predict(PatchFeatures{}, {kMaxV, 0.0}), risk.alpha);
}

double learned_ins_score(const InstabilityPredictor& model, const Patch& patch, const RiskParams& risk,
                         double calibration) {
  const double var = var_gaussian(instability::predict(model, patch, {kMaxV, 0.0}), risk.alpha);
  if (!(var > 0.0)) return 1.0;
  return std::clamp(calibration / var, kScoreFloor, 1.0);
}

}  // namespace stanav::traversability
