#include <cmath>
#include <numbers>
#include <random>

#include "stanav/instability.hpp"

namespace stanav::instability {

Dataset sample_oracle_dataset(std::span<const terrain::ElevationMap> maps, std::size_t samples, std::uint64_t seed) {
  Dataset data;
  if (samples == 0) return data;
  if (maps.empty()) throw ParameterError("dataset: no terrain maps");
  data.reserve(samples);
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::uniform_int_distribution<std::size_t> pick(0, maps.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> mode(0, 2);
  // Patch corners reach side/sqrt(2) from the pose at any yaw.
  const double margin = terrain::kPatchSide / std::sqrt(2.0) + 1e-6;

  std::size_t attempts = 0;
  while (data.size() < samples) {
    if (++attempts > samples * 100 + 1000) throw ParameterError("dataset: terrain maps too small for a patch");
    const terrain::ElevationMap& map = maps[pick(rng)];
    const Vec2 lo = map.origin() + Vec2{margin, margin};
    const Vec2 hi = map.max_corner() - Vec2{margin, margin};
    const double u = unit(rng), v = unit(rng), a = unit(rng);
    if (!(hi.x > lo.x && hi.y > lo.y)) continue;
    const Pose2 pose{lo.x + u * (hi.x - lo.x), lo.y + v * (hi.y - lo.y), (2.0 * a - 1.0) * std::numbers::pi};
    const auto patch = terrain::try_extract_patch(map, pose);
    if (!patch) continue;

    Command cmd;
    const int m = mode(rng);
    const double cv = unit(rng) * Command::kMaxV, cw = unit(rng) * Command::kMaxW;
    if (m != 1) cmd.v = cv;
    if (m != 0) cmd.w = cw;
    const auto f = terrain::patch_features(*patch);
    const std::uint64_t row = data.size();
    data.push_back({f, cmd, oracle_instability(f, cmd, mix_seed(seed, 2 * row + 1))});
  }
  return data;
}

std::vector<terrain::TerrainSpec> training_terrains(std::uint64_t seed, double size) {
  using terrain::TerrainKind;
  using terrain::TerrainLayer;
  std::vector<terrain::TerrainSpec> specs;
  auto base = [&](std::uint64_t s) {
    terrain::TerrainSpec spec;
    spec.size_x = spec.size_y = size;
    spec.seed = mix_seed(seed, s);
    return spec;
  };
  constexpr double deg = std::numbers::pi / 180.0;

  specs.push_back(base(0));
  for (int k = 0; k < 4; ++k) {
    auto spec = base(1 + std::uint64_t(k));
    TerrainLayer l;
    l.kind = TerrainKind::slope;
    l.angle = (5.0 + 5.0 * k) * deg;
    l.direction = k * 0.9;
    spec.layers.push_back(l);
    specs.push_back(spec);
  }
  for (int k = 0; k < 3; ++k) {
    auto spec = base(10 + std::uint64_t(k));
    TerrainLayer l;
    l.kind = TerrainKind::steps;
    l.rise = 0.04 + 0.04 * k;
    l.run = 0.3;
    l.direction = k * 1.3;
    spec.layers.push_back(l);
    specs.push_back(spec);
  }
  const double amps[] = {0.01, 0.03, 0.06, 0.1};
  const double corrs[] = {0.4, 0.25, 0.15};
  int k = 0;
  for (double amp : amps)
    for (double corr : corrs) {
      auto spec = base(20 + std::uint64_t(k++));
      TerrainLayer l;
      l.kind = TerrainKind::rough;
      l.amplitude = amp;
      l.correlation_length = corr;
      spec.layers.push_back(l);
      specs.push_back(spec);
    }
  return specs;
}

}  // namespace stanav::instability
