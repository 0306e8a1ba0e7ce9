#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "stanav/traversability.hpp"

namespace stanav::traversability {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double bin_yaw(int bin) { return wrap_angle(bin * (2.0 * std::numbers::pi / kYawBins)); }

int nearest_yaw_bin(double yaw) {
  const double step = 2.0 * std::numbers::pi / kYawBins;
  int b = int(std::lround(wrap_angle(yaw) / step)) % kYawBins;
  return b < 0 ? b + kYawBins : b;
}

TraversabilityMap::TraversabilityMap(Vec2 origin, double resolution, int width, int height)
    : origin_(origin), resolution_(resolution), width_(width), height_(height) {
  if (!(resolution > 0.0) || width < 1 || height < 1) throw ParameterError("traversability map: invalid geometry");
  const std::size_t cells = std::size_t(width) * std::size_t(height);
  v_star_.assign(cells * kYawBins, kNaN);
  w_star_.assign(cells * kYawBins, kNaN);
  for (auto& s : scores_) s.assign(cells, kNaN);
}

TraversabilityMap TraversabilityMap::like(const ElevationMap& map) {
  return TraversabilityMap(map.origin(), map.resolution(), map.width(), map.height());
}

TraversabilityMap TraversabilityMap::uniform(Vec2 origin, double resolution, int width, int height,
                                             StabilityCommand cmd, double score) {
  TraversabilityMap m(origin, resolution, width, height);
  std::fill(m.v_star_.begin(), m.v_star_.end(), cmd.v_star);
  std::fill(m.w_star_.begin(), m.w_star_.end(), cmd.w_star);
  for (auto& s : m.scores_) std::fill(s.begin(), s.end(), score);
  return m;
}

std::optional<std::array<int, 2>> TraversabilityMap::nearest_node(Vec2 p) const {
  const int ix = int(std::lround((p.x - origin_.x) / resolution_));
  const int iy = int(std::lround((p.y - origin_.y) / resolution_));
  if (!in_grid(ix, iy)) return std::nullopt;
  return std::array<int, 2>{ix, iy};
}

bool TraversabilityMap::defined(int ix, int iy, int bin) const {
  return in_grid(ix, iy) && std::isfinite(v_star_[cell(ix, iy) * kYawBins + std::size_t(bin)]);
}

StabilityCommand TraversabilityMap::command(int ix, int iy, int bin) const {
  const std::size_t k = cell(ix, iy) * kYawBins + std::size_t(bin);
  return {v_star_[k], w_star_[k]};
}

void TraversabilityMap::set_command(int ix, int iy, int bin, StabilityCommand cmd) {
  const std::size_t k = cell(ix, iy) * kYawBins + std::size_t(bin);
  v_star_[k] = cmd.v_star;
  w_star_[k] = cmd.w_star;
}

void TraversabilityMap::clear_command(int ix, int iy, int bin) { set_command(ix, iy, bin, {kNaN, kNaN}); }

bool TraversabilityMap::score_defined(Baseline b, int ix, int iy) const {
  return in_grid(ix, iy) && std::isfinite(scores_[std::size_t(b)][cell(ix, iy)]);
}

double TraversabilityMap::score(Baseline b, int ix, int iy) const { return scores_[std::size_t(b)][cell(ix, iy)]; }

void TraversabilityMap::set_score(Baseline b, int ix, int iy, double t) { scores_[std::size_t(b)][cell(ix, iy)] = t; }

double TraversabilityMap::mean_v_star(int ix, int iy) const {
  double sum = 0.0;
  int n = 0;
  for (int b = 0; b < kYawBins; ++b)
    if (defined(ix, iy, b)) {
      sum += command(ix, iy, b).v_star;
      ++n;
    }
  return n ? sum / n : kNaN;
}

std::optional<StabilityCommand> TraversabilityMap::command_at(Vec2 p, double yaw) const {
  const auto node = nearest_node(p);
  if (!node) return std::nullopt;
  const int bin = nearest_yaw_bin(yaw);
  if (!defined((*node)[0], (*node)[1], bin)) return std::nullopt;
  return command((*node)[0], (*node)[1], bin);
}

std::optional<double> TraversabilityMap::score_at(Baseline b, Vec2 p) const {
  const auto node = nearest_node(p);
  if (!node || !score_defined(b, (*node)[0], (*node)[1])) return std::nullopt;
  return score(b, (*node)[0], (*node)[1]);
}

// ─── Construction ──────────────────────────────────────────────────────────

TraversabilityMap build_traversability_map(const ElevationMap& map, const InstabilityPredictor& model,
                                           const RiskParams& risk, const BuildOptions& options) {
  risk.validate();
  TraversabilityMap out = TraversabilityMap::like(map);
  const double calibration = options.baselines ? learned_ins_calibration(model, risk) : 0.0;

  auto process_rows = [&](int row_begin, int row_end) {
    for (int iy = row_begin; iy < row_end; ++iy) {
      for (int ix = 0; ix < map.width(); ++ix) {
        const Vec2 p = map.node_position(ix, iy);
        for (int b = 0; b < kYawBins; ++b) {
          const auto patch = terrain::try_extract_patch(map, {p.x, p.y, bin_yaw(b)});
          if (!patch) continue;
          out.set_command(ix, iy, b, stability_aware_command(model, *patch, risk));
          if (b == 0 && options.baselines) {
            out.set_score(Baseline::learned_ins, ix, iy, learned_ins_score(model, *patch, risk, calibration));
            out.set_score(Baseline::manual_biped, ix, iy, manual_biped_score(*patch));
            out.set_score(Baseline::quad_foothold, ix, iy, quad_foothold_score(*patch));
          }
        }
      }
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, unsigned(map.height()));
  if (threads <= 1) {
    process_rows(0, map.height());
    return out;
  }
  // Rows are disjoint, so every entry is written by exactly one thread.
  std::vector<std::jthread> pool;
  const int chunk = (map.height() + int(threads) - 1) / int(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const int begin = int(t) * chunk;
    const int end = std::min(map.height(), begin + chunk);
    if (begin < end) pool.emplace_back(process_rows, begin, end);
  }
  return out;
}

// ─── I/O ───────────────────────────────────────────────────────────────────

void write_travmap(std::ostream& os, const TraversabilityMap& map) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", map.resolution(), map.origin().x, map.origin().y);
  os << "# TRAVMAP v1 " << map.width() << ' ' << map.height() << ' ' << buf << ' ' << kYawBins << '\n';
  os << "ix,iy";
  for (int b = 0; b < kYawBins; ++b) os << ",v" << b << ",w" << b;
  os << ",learned_ins,manual_biped,quad_foothold\n";
  auto put = [&](double v) {
    if (std::isfinite(v)) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    } else {
      os << ",nan";
    }
  };
  for (int iy = 0; iy < map.height(); ++iy)
    for (int ix = 0; ix < map.width(); ++ix) {
      os << ix << ',' << iy;
      for (int b = 0; b < kYawBins; ++b) {
        const auto c = map.command(ix, iy, b);
        put(c.v_star);
        put(c.w_star);
      }
      for (int k = 0; k < kBaselineCount; ++k) put(map.score(Baseline(k), ix, iy));
      os << '\n';
    }
}

TraversabilityMap read_travmap(std::istream& is) {
  std::string hash, magic, version;
  int width = 0, height = 0, bins = 0;
  double res = 0.0, x0 = 0.0, y0 = 0.0;
  if (!(is >> hash >> magic >> version) || hash != "#" || magic != "TRAVMAP" || version != "v1")
    throw ParseError("travmap: expected header '# TRAVMAP v1'");
  if (!(is >> width >> height >> res >> x0 >> y0 >> bins) || width < 1 || height < 1 || !(res > 0.0))
    throw ParseError("travmap: malformed header");
  if (bins != kYawBins) throw ParseError("travmap: expected " + std::to_string(kYawBins) + " yaw bins");
  std::string line;
  std::getline(is, line);
  skip_comment_lines(is);
  std::getline(is, line);  // column names
  TraversabilityMap map({x0, y0}, res, width, height);
  const std::size_t columns = 2 + 2 * kYawBins + kBaselineCount;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::vector<double> cells;
    for (std::string cell; std::getline(ss, cell, ',');) {
      if (cell == "nan") {
        cells.push_back(kNaN);
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw ParseError("travmap: bad value '" + cell + "'");
      cells.push_back(v);
    }
    if (cells.size() != columns) throw ParseError("travmap: wrong column count");
    const int ix = int(cells[0]), iy = int(cells[1]);
    if (!map.in_grid(ix, iy)) throw ParseError("travmap: node index out of range");
    for (int b = 0; b < kYawBins; ++b) map.set_command(ix, iy, b, {cells[2 + 2 * std::size_t(b)], cells[3 + 2 * std::size_t(b)]});
    for (int k = 0; k < kBaselineCount; ++k) map.set_score(Baseline(k), ix, iy, cells[2 + 2 * kYawBins + std::size_t(k)]);
    ++rows;
  }
  if (rows != std::size_t(width) * std::size_t(height)) throw ParseError("travmap: expected one row per node");
  return map;
}

void save_travmap(const std::string& path, const TraversabilityMap& map) {
  std::ofstream os(path);
  if (!os) throw ParameterError("cannot open '" + path + "' for writing");
  write_travmap(os, map);
}

TraversabilityMap load_travmap(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open travmap '" + path + "'");
  return read_travmap(is);
}

void write_v_star_pgm(std::ostream& os, const TraversabilityMap& map) {
  os << "P2\n" << map.width() << ' ' << map.height() << "\n255\n";
  for (int iy = map.height() - 1; iy >= 0; --iy)
    for (int ix = 0; ix < map.width(); ++ix) {
      const double v = map.mean_v_star(ix, iy);
      int gray = 0;
      if (std::isfinite(v)) gray = int(std::lround(255.0 * std::clamp((v - kFloorV) / (kMaxV - kFloorV), 0.0, 1.0)));
      os << gray << (ix + 1 == map.width() ? '\n' : ' ');
    }
}

}  // namespace stanav::traversability
