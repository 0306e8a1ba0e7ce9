#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stanav/common.hpp"

namespace stanav::terrain {

/// Side length of the robot-centric patch fed to the instability model.
inline constexpr double kPatchSide = 0.64;
inline constexpr double kDefaultResolution = 0.04;

// ─── ElevationMap ──────────────────────────────────────────────────────────

/// 2.5D height grid. Heights are sampled at grid nodes: node (ix, iy) sits at
/// origin + (ix, iy) * resolution. Unknown nodes hold NaN.
class ElevationMap {
 public:
  ElevationMap() = default;
  ElevationMap(Vec2 origin, double resolution, int width, int height, double fill = 0.0);

  Vec2 origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return heights_.size(); }

  double at(int ix, int iy) const { return heights_[index(ix, iy)]; }
  void set(int ix, int iy, double h) { heights_[index(ix, iy)] = h; }
  void set_unknown(int ix, int iy);
  bool known(int ix, int iy) const;
  bool in_grid(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }

  std::span<const double> heights() const { return heights_; }

  Vec2 node_position(int ix, int iy) const;
  /// Continuous grid coordinates (node units) of a world point.
  Vec2 world_to_grid(Vec2 p) const;
  Vec2 grid_to_world(Vec2 g) const;
  /// Nearest node, if the point lies within half a cell of the grid.
  std::optional<std::array<int, 2>> nearest_node(Vec2 p) const;

  /// Bilinear height; nullopt when any of the four supporting nodes is
  /// outside the grid or unknown.
  std::optional<double> interpolate(Vec2 p) const;

  /// World-space extent covered by the nodes.
  Vec2 max_corner() const { return grid_to_world({double(width_ - 1), double(height_ - 1)}); }

 private:
  std::size_t index(int ix, int iy) const { return std::size_t(iy) * std::size_t(width_) + std::size_t(ix); }

  Vec2 origin_{};
  double resolution_ = kDefaultResolution;
  int width_ = 0;
  int height_ = 0;
  std::vector<double> heights_;
};

// ─── Terrain generation ────────────────────────────────────────────────────

enum class TerrainKind { flat, slope, steps, rough, ramp_corridor };

struct Rect {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
  bool contains(Vec2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
};

/// One additive terrain component. Fields not used by `kind` are ignored.
struct TerrainLayer {
  TerrainKind kind = TerrainKind::flat;
  double angle = 0.0;       // slope / ramp inclination, rad
  double direction = 0.0;   // ascent heading for slope / steps / ramp, rad
  double rise = 0.0;        // steps
  double run = 0.0;         // steps
  double amplitude = 0.0;   // rough: target height std, m
  double correlation_length = 0.0;  // rough: Gaussian smoothing sigma, m
  double start = 0.0;       // ramp: distance along direction where the incline begins
  double length = 0.0;      // ramp: horizontal length of the incline
  std::optional<Rect> region;  // layer applies only inside this rectangle
};

/// Composite terrain: heights are the sum of all layers (none = flat).
struct TerrainSpec {
  double size_x = 10.0;
  double size_y = 10.0;
  double resolution = kDefaultResolution;
  Vec2 origin{};
  std::uint64_t seed = 0;
  std::vector<TerrainLayer> layers;

  void validate() const;
};

ElevationMap generate_terrain(const TerrainSpec& spec);

TerrainKind parse_terrain_kind(const std::string& name);
std::string to_string(TerrainKind kind);

// ─── Patches ───────────────────────────────────────────────────────────────

/// Robot-centric, yaw-aligned height patch. Sample (i, j) lies at patch-local
/// ((i - c) * res, (j - c) * res) with i along the sagittal (forward) axis,
/// j along the lateral (left) axis and c the center index. Heights are
/// relative to the pose height, so the center sample is exactly 0.
struct Patch {
  double side = kPatchSide;
  double resolution = kDefaultResolution;
  double yaw = 0.0;
  int nodes = 0;  // per side; always odd
  std::vector<double> samples;  // samples[j * nodes + i]

  double at(int i, int j) const { return samples[std::size_t(j) * std::size_t(nodes) + std::size_t(i)]; }
  double& at(int i, int j) { return samples[std::size_t(j) * std::size_t(nodes) + std::size_t(i)]; }
  int center_index() const { return nodes / 2; }
  double center() const { return at(center_index(), center_index()); }

  /// All-zero patch with the default geometry (flat terrain).
  static Patch zeros(double resolution = kDefaultResolution, double side = kPatchSide);
};

/// Number of nodes per side for a patch at the given resolution.
int patch_nodes(double resolution, double side = kPatchSide);

/// Samples the rotated 0.64 m footprint with bilinear interpolation.
/// Throws OutOfBoundsError when the footprint leaves the known region.
Patch extract_patch(const ElevationMap& map, Pose2 pose, double side = kPatchSide);

/// Non-throwing variant used by batch map construction.
std::optional<Patch> try_extract_patch(const ElevationMap& map, Pose2 pose, double side = kPatchSide);

struct PatchFeatures {
  double sagittal_slope = 0.0;  // mean forward height gradient (signed)
  double lateral_slope = 0.0;   // mean leftward height gradient (signed)
  double height_std = 0.0;
  double height_range = 0.0;
  double max_gradient = 0.0;    // max |dh| / res between 4-neighbours

  static constexpr std::size_t kCount = 5;
  std::array<double, kCount> to_array() const {
    return {sagittal_slope, lateral_slope, height_std, height_range, max_gradient};
  }
  static PatchFeatures from_array(const std::array<double, kCount>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }
};

PatchFeatures patch_features(const Patch& patch);

// ─── File formats ──────────────────────────────────────────────────────────

/// `ELEV v1 <width> <height> <resolution> <x0> <y0>` then row-major heights
/// (row iy = 0 first); `nan` marks unknown nodes.
void write_elevation(std::ostream& os, const ElevationMap& map);
ElevationMap read_elevation(std::istream& is);
void save_elevation(const std::string& path, const ElevationMap& map);
ElevationMap load_elevation(const std::string& path);

/// Plain PGM (P2). Gray = round(255 * (h - min) / (max - min)) over known
/// nodes (0 when the map is constant); unknown nodes are 0. The top image
/// row is the largest y.
void write_pgm(std::ostream& os, const ElevationMap& map);

struct MapSummary {
  double min = 0.0, max = 0.0, mean = 0.0, stddev = 0.0;
  std::size_t known = 0;
};
MapSummary summarize(const ElevationMap& map);

}  // namespace stanav::terrain
