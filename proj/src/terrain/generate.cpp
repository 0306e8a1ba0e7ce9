#include <algorithm>
#include <cmath>
#include <random>

#include "stanav/terrain.hpp"

namespace stanav::terrain {

namespace {

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

void validate_layer(const TerrainLayer& l) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  switch (l.kind) {
    case TerrainKind::flat:
      break;
    case TerrainKind::slope:
    case TerrainKind::ramp_corridor:
      if (!(std::abs(l.angle) < half_pi)) throw ParameterError("terrain: slope angle must lie in (-pi/2, pi/2)");
      if (l.kind == TerrainKind::ramp_corridor && !positive(l.length))
        throw ParameterError("terrain: ramp length must be > 0");
      break;
    case TerrainKind::steps:
      if (!positive(l.rise) || !positive(l.run)) throw ParameterError("terrain: steps rise and run must be > 0");
      break;
    case TerrainKind::rough:
      if (!positive(l.amplitude) || !positive(l.correlation_length))
        throw ParameterError("terrain: rough amplitude and correlation length must be > 0");
      break;
  }
  if (l.region && !(l.region->x_max > l.region->x_min && l.region->y_max > l.region->y_min))
    throw ParameterError("terrain: layer region must have positive area");
}

double along(Vec2 p, double direction) { return p.x * std::cos(direction) + p.y * std::sin(direction); }

/// Unit-variance correlated noise: iid normals blurred by a separable Gaussian.
std::vector<double> smoothed_noise(int width, int height, double sigma_cells, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> raw(std::size_t(width) * std::size_t(height));
  for (double& v : raw) v = normal(rng);
  if (sigma_cells < 1e-3) return raw;

  const int radius = std::max(1, int(std::ceil(3.0 * sigma_cells)));
  std::vector<double> kernel(std::size_t(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) kernel[std::size_t(k + radius)] = std::exp(-0.5 * k * k / (sigma_cells * sigma_cells));

  auto blur = [&](const std::vector<double>& in, bool horizontal) {
    std::vector<double> out(in.size());
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double acc = 0.0, wsum = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = horizontal ? x + k : x;
          const int yy = horizontal ? y : y + k;
          if (xx < 0 || yy < 0 || xx >= width || yy >= height) continue;
          const double w = kernel[std::size_t(k + radius)];
          acc += w * in[std::size_t(yy) * std::size_t(width) + std::size_t(xx)];
          wsum += w;
        }
        out[std::size_t(y) * std::size_t(width) + std::size_t(x)] = acc / wsum;
      }
    }
    return out;
  };
  return blur(blur(raw, true), false);
}

}  // namespace

void TerrainSpec::validate() const {
  if (!positive(size_x) || !positive(size_y)) throw ParameterError("terrain: extent must be > 0");
  if (!positive(resolution)) throw ParameterError("terrain: resolution must be > 0");
  if (resolution > std::min(size_x, size_y)) throw ParameterError("terrain: resolution exceeds extent");
  for (const auto& l : layers) validate_layer(l);
}

ElevationMap generate_terrain(const TerrainSpec& spec) {
  spec.validate();
  const int width = int(std::lround(spec.size_x / spec.resolution)) + 1;
  const int height = int(std::lround(spec.size_y / spec.resolution)) + 1;
  ElevationMap map(spec.origin, spec.resolution, width, height, 0.0);

  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const TerrainLayer& l = spec.layers[li];
    auto inside = [&](Vec2 p) { return !l.region || l.region->contains(p); };

    if (l.kind == TerrainKind::rough) {
      std::vector<double> noise =
          smoothed_noise(width, height, l.correlation_length / spec.resolution, mix_seed(spec.seed, li));
      // Normalize over the nodes the layer covers so the requested amplitude
      // is the realized height standard deviation.
      double sum = 0.0, sum_sq = 0.0;
      std::size_t count = 0;
      for (int iy = 0; iy < height; ++iy)
        for (int ix = 0; ix < width; ++ix)
          if (inside(map.node_position(ix, iy))) {
            sum += noise[std::size_t(iy) * std::size_t(width) + std::size_t(ix)];
            ++count;
          }
      if (count == 0) continue;
      const double mean = sum / double(count);
      for (int iy = 0; iy < height; ++iy)
        for (int ix = 0; ix < width; ++ix)
          if (inside(map.node_position(ix, iy))) {
            const double d = noise[std::size_t(iy) * std::size_t(width) + std::size_t(ix)] - mean;
            sum_sq += d * d;
          }
      const double stddev = std::sqrt(sum_sq / double(count));
      const double scale = stddev > 0.0 ? l.amplitude / stddev : 0.0;
      for (int iy = 0; iy < height; ++iy)
        for (int ix = 0; ix < width; ++ix) {
          const Vec2 p = map.node_position(ix, iy);
          if (!inside(p)) continue;
          const double n = noise[std::size_t(iy) * std::size_t(width) + std::size_t(ix)];
          map.set(ix, iy, map.at(ix, iy) + (n - mean) * scale);
        }
      continue;
    }

    for (int iy = 0; iy < height; ++iy) {
      for (int ix = 0; ix < width; ++ix) {
        const Vec2 p = map.node_position(ix, iy);
        if (!inside(p)) continue;
        double dh = 0.0;
        switch (l.kind) {
          case TerrainKind::flat:
          case TerrainKind::rough:
            break;
          case TerrainKind::slope:
            dh = std::tan(l.angle) * along(p, l.direction);
            break;
          case TerrainKind::steps:
            dh = l.rise * std::floor(along(p, l.direction) / l.run);
            break;
          case TerrainKind::ramp_corridor:
            dh = std::tan(l.angle) * std::clamp(along(p, l.direction) - l.start, 0.0, l.length);
            break;
        }
        map.set(ix, iy, map.at(ix, iy) + dh);
      }
    }
  }
  return map;
}

TerrainKind parse_terrain_kind(const std::string& name) {
  if (name == "flat") return TerrainKind::flat;
  if (name == "slope") return TerrainKind::slope;
  if (name == "steps") return TerrainKind::steps;
  if (name == "rough") return TerrainKind::rough;
  if (name == "ramp" || name == "ramp-corridor" || name == "ramp_corridor") return TerrainKind::ramp_corridor;
  throw ParameterError("unknown terrain kind '" + name + "'");
}

std::string to_string(TerrainKind kind) {
  switch (kind) {
    case TerrainKind::flat: return "flat";
    case TerrainKind::slope: return "slope";
    case TerrainKind::steps: return "steps";
    case TerrainKind::rough: return "rough";
    case TerrainKind::ramp_corridor: return "ramp-corridor";
  }
  return "flat";
}

}  // namespace stanav::terrain
