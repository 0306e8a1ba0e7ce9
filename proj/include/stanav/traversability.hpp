#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stanav/instability.hpp"
#include "stanav/terrain.hpp"

namespace stanav::traversability {

using instability::Command;
using instability::InstabilityEstimate;
using instability::InstabilityPredictor;
using terrain::ElevationMap;
using terrain::Patch;
using terrain::PatchFeatures;

// Command sweep: a_max = (0.5 m/s, 0.75 rad/s) downward to zero in steps of
// (0.05, 0.075); commands that fail even at zero get the 0.001 floor.
inline constexpr double kMaxV = 0.5;
inline constexpr double kMaxW = 0.75;
inline constexpr double kStepV = 0.05;
inline constexpr double kStepW = 0.075;
inline constexpr double kFloorV = 0.001;
inline constexpr double kFloorW = 0.001;
inline constexpr int kSweepSteps = 10;

struct RiskParams {
  double delta_limit = 3.0;
  double alpha = 0.97;

  void validate() const;
};

struct StabilityCommand {
  double v_star = kFloorV;
  double w_star = kFloorW;
  friend bool operator==(const StabilityCommand&, const StabilityCommand&) = default;
};

/// Standard normal quantile. Acklam's rational approximation (relative
/// error < 1.2e-9) followed by one Halley step on erfc.
double normal_quantile(double p);

/// Gaussian value at risk: mean + z_alpha * sigma. Throws for alpha outside (0, 1).
double var_gaussian(const InstabilityEstimate& est, double alpha);

/// Sweep grids, largest first, zero last.
std::array<double, kSweepSteps + 1> linear_sweep();
std::array<double, kSweepSteps + 1> angular_sweep();

/// Largest swept v with VaR(p(m, [v, 0])) < delta_limit, and independently
/// the largest w with VaR(p(m, [0, w])) < delta_limit.
StabilityCommand stability_aware_command(const InstabilityPredictor& model, const PatchFeatures& features,
                                         const RiskParams& risk);
StabilityCommand stability_aware_command(const InstabilityPredictor& model, const Patch& patch, const RiskParams& risk);

// ─── Baseline traversability scores, all in [0.01, 1] ──────────────────────

enum class Baseline { learned_ins = 0, manual_biped = 1, quad_foothold = 2 };
inline constexpr int kBaselineCount = 3;
inline constexpr double kScoreFloor = 0.01;

std::string to_string(Baseline b);
Baseline parse_baseline(const std::string& name);

/// Fraction of samples whose local slope is <= 20 deg and whose largest
/// height difference to a 4-neighbour is <= 0.08 m.
double manual_biped_score(const Patch& patch);

/// Mean of exp(-d / 0.05 m) where d is the largest 4-neighbour height
/// discontinuity within two samples, weighted by 1 - distance / 3.
double quad_foothold_score(const Patch& patch);

/// VaR at command (0.5, 0) on a flat patch; normalizes learned_ins_score.
double learned_ins_calibration(const InstabilityPredictor& model, const RiskParams& risk);
/// min(1, calibration / VaR(p(m, [0.5, 0]))), floored at 0.01.
double learned_ins_score(const InstabilityPredictor& model, const Patch& patch, const RiskParams& risk,
                         double calibration);

// ─── Map ───────────────────────────────────────────────────────────────────

inline constexpr int kYawBins = 8;
double bin_yaw(int bin);
int nearest_yaw_bin(double yaw);

/// Per-node stability-aware commands for 8 yaw bins plus per-node baseline
/// scores. Geometry mirrors the source elevation map. Undefined entries hold NaN.
class TraversabilityMap {
 public:
  TraversabilityMap() = default;
  TraversabilityMap(Vec2 origin, double resolution, int width, int height);
  static TraversabilityMap like(const ElevationMap& map);
  /// Every node and bin set to `cmd`, every score to `score`.
  static TraversabilityMap uniform(Vec2 origin, double resolution, int width, int height, StabilityCommand cmd,
                                   double score = 1.0);

  Vec2 origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }
  bool in_grid(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }
  Vec2 node_position(int ix, int iy) const { return {origin_.x + ix * resolution_, origin_.y + iy * resolution_}; }
  std::optional<std::array<int, 2>> nearest_node(Vec2 p) const;

  bool defined(int ix, int iy, int bin) const;
  StabilityCommand command(int ix, int iy, int bin) const;
  void set_command(int ix, int iy, int bin, StabilityCommand cmd);
  void clear_command(int ix, int iy, int bin);

  bool score_defined(Baseline b, int ix, int iy) const;
  double score(Baseline b, int ix, int iy) const;
  void set_score(Baseline b, int ix, int iy, double t);

  /// Mean v* over the node's defined bins, NaN when none is defined.
  double mean_v_star(int ix, int iy) const;

  /// Nearest node, nearest yaw bin.
  std::optional<StabilityCommand> command_at(Vec2 p, double yaw) const;
  std::optional<double> score_at(Baseline b, Vec2 p) const;

 private:
  std::size_t cell(int ix, int iy) const { return std::size_t(iy) * std::size_t(width_) + std::size_t(ix); }

  Vec2 origin_{};
  double resolution_ = terrain::kDefaultResolution;
  int width_ = 0;
  int height_ = 0;
  std::vector<double> v_star_;  // [cell * kYawBins + bin]
  std::vector<double> w_star_;
  std::array<std::vector<double>, kBaselineCount> scores_;
};

struct BuildOptions {
  bool baselines = true;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Evaluates every (node, yaw bin) whose rotated patch footprint fits in the
/// known map. Output is independent of the thread count.
TraversabilityMap build_traversability_map(const ElevationMap& map, const InstabilityPredictor& model,
                                           const RiskParams& risk, const BuildOptions& options = {});

/// `# TRAVMAP v1 <width> <height> <resolution> <x0> <y0> <bins>` then a CSV
/// header and one row per node: ix, iy, v0, w0, ..., v7, w7, learned_ins,
/// manual_biped, quad_foothold. `nan` marks undefined entries.
void write_travmap(std::ostream& os, const TraversabilityMap& map);
TraversabilityMap read_travmap(std::istream& is);
void save_travmap(const std::string& path, const TraversabilityMap& map);
TraversabilityMap load_travmap(const std::string& path);

/// P2 heatmap of bin-averaged v*: gray = round(255 (v - 0.001) / (0.5 - 0.001)),
/// clamped; undefined nodes are 0. Top row is the largest y.
void write_v_star_pgm(std::ostream& os, const TraversabilityMap& map);

}  // namespace stanav::traversability
