#include <numbers>

#include "stanav/simulator.hpp"

namespace stanav::sim {

namespace {

using terrain::Rect;
using terrain::TerrainKind;
using terrain::TerrainLayer;

constexpr double kWorldResolution = 0.1;
constexpr double kDeg = std::numbers::pi / 180.0;

terrain::TerrainSpec base(double sx, double sy, std::uint64_t seed) {
  terrain::TerrainSpec spec;
  spec.size_x = sx;
  spec.size_y = sy;
  spec.resolution = kWorldResolution;
  spec.seed = seed;
  return spec;
}

TerrainLayer rough(double amplitude, double correlation, std::optional<Rect> region = std::nullopt) {
  TerrainLayer l;
  l.kind = TerrainKind::rough;
  l.amplitude = amplitude;
  l.correlation_length = correlation;
  l.region = region;
  return l;
}

TerrainLayer ramp(double angle, double start, double length, Rect region) {
  TerrainLayer l;
  l.kind = TerrainKind::ramp_corridor;
  l.angle = angle;
  l.start = start;
  l.length = length;
  l.region = region;
  return l;
}

}  // namespace

std::vector<std::string> builtin_world_names() { return {"flat", "band", "two-corridor", "rough"}; }

World builtin_world(const std::string& name) {
  World w;
  w.name = name;
  if (name == "flat") {
    w.terrain = base(10.0, 10.0, 1);
    w.start = {1.0, 1.0, std::numbers::pi / 4.0};
    w.goal = {9.0, 9.0};
  } else if (name == "band") {
    // A rough strip across the map, passable only through a smooth 3 m gap.
    w.terrain = base(10.0, 10.0, 2);
    w.terrain.layers.push_back(rough(0.25, 0.1, Rect{4.5, 0.0, 5.5, 3.5}));
    w.terrain.layers.push_back(rough(0.25, 0.1, Rect{4.5, 6.5, 5.5, 10.0}));
    w.start = {2.0, 2.0, 0.0};
    w.goal = {8.0, 2.0};
  } else if (name == "two-corridor") {
    // Direct route over a smooth 16 degree hill bounded by a cliff, or a
    // longer detour through the flat corridor along the bottom edge.
    w.terrain = base(12.0, 10.0, 3);
    const Rect hill{4.0, 4.0, 8.0, 10.0};
    w.terrain.layers.push_back(ramp(16.0 * kDeg, 4.0, 2.0, hill));
    w.terrain.layers.push_back(ramp(-16.0 * kDeg, 6.0, 2.0, hill));
    w.start = {1.5, 6.5, 0.0};
    w.goal = {10.5, 6.5};
  } else if (name == "rough") {
    w.terrain = base(8.0, 8.0, 4);
    w.terrain.layers.push_back(rough(0.02, 0.3));
    w.start = {1.0, 1.0, std::numbers::pi / 4.0};
    w.goal = {7.0, 7.0};
  } else {
    throw ParameterError("unknown world '" + name + "' (expected flat, band, two-corridor or rough)");
  }
  return w;
}

}  // namespace stanav::sim
