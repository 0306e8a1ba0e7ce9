#include <algorithm>
#include <cmath>

#include "stanav/terrain.hpp"

namespace stanav::terrain {

int patch_nodes(double resolution, double side) {
  if (!(resolution > 0.0) || !(side > 0.0)) throw ParameterError("patch: resolution and side must be > 0");
  int cells = std::max(2, int(std::lround(side / resolution)));
  if (cells % 2 != 0) ++cells;  // odd node count keeps an exact center sample
  return cells + 1;
}

Patch Patch::zeros(double resolution, double side) {
  Patch p;
  p.side = side;
  p.nodes = patch_nodes(resolution, side);
  p.resolution = side / double(p.nodes - 1);
  p.samples.assign(std::size_t(p.nodes) * std::size_t(p.nodes), 0.0);
  return p;
}

std::optional<Patch> try_extract_patch(const ElevationMap& map, Pose2 pose, double side) {
  Patch patch = Patch::zeros(map.resolution(), side);
  patch.yaw = pose.yaw;
  const auto base = map.interpolate(pose.position());
  if (!base) return std::nullopt;

  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  const int mid = patch.center_index();
  for (int j = 0; j < patch.nodes; ++j) {
    const double ly = (j - mid) * patch.resolution;
    for (int i = 0; i < patch.nodes; ++i) {
      if (i == mid && j == mid) {
        patch.at(i, j) = 0.0;
        continue;
      }
      const double lx = (i - mid) * patch.resolution;
      const Vec2 w{pose.x + c * lx - s * ly, pose.y + s * lx + c * ly};
      const auto h = map.interpolate(w);
      if (!h) return std::nullopt;
      patch.at(i, j) = *h - *base;
    }
  }
  return patch;
}

Patch extract_patch(const ElevationMap& map, Pose2 pose, double side) {
  auto patch = try_extract_patch(map, pose, side);
  if (!patch)
    throw OutOfBoundsError("patch footprint at (" + std::to_string(pose.x) + ", " + std::to_string(pose.y) +
                           ") leaves the known map region");
  return *std::move(patch);
}

PatchFeatures patch_features(const Patch& patch) {
  PatchFeatures f;
  const int n = patch.nodes;
  if (n < 2) return f;
  const double res = patch.resolution;

  double sag = 0.0, lat = 0.0, gmax = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const double d = (patch.at(i + 1, j) - patch.at(i, j)) / res;
      sag += d;
      gmax = std::max(gmax, std::abs(d));
    }
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double d = (patch.at(i, j + 1) - patch.at(i, j)) / res;
      lat += d;
      gmax = std::max(gmax, std::abs(d));
    }
  const double pairs = double(n) * double(n - 1);
  f.sagittal_slope = sag / pairs;
  f.lateral_slope = lat / pairs;
  f.max_gradient = gmax;

  double mean = 0.0, lo = patch.samples.front(), hi = patch.samples.front();
  for (double h : patch.samples) {
    mean += h;
    lo = std::min(lo, h);
    hi = std::max(hi, h);
  }
  mean /= double(patch.samples.size());
  double var = 0.0;
  for (double h : patch.samples) var += (h - mean) * (h - mean);
  f.height_std = std::sqrt(var / double(patch.samples.size()));
  f.height_range = hi - lo;
  return f;
}

}  // namespace stanav::terrain
