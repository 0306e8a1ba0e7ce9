#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "stanav/terrain.hpp"

namespace stanav::terrain {

ElevationMap::ElevationMap(Vec2 origin, double resolution, int width, int height, double fill)
    : origin_(origin), resolution_(resolution), width_(width), height_(height) {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) throw ParameterError("elevation map: resolution must be > 0");
  if (width < 1 || height < 1) throw ParameterError("elevation map: width and height must be >= 1");
  heights_.assign(std::size_t(width) * std::size_t(height), fill);
}

void ElevationMap::set_unknown(int ix, int iy) { heights_[index(ix, iy)] = std::numeric_limits<double>::quiet_NaN(); }

bool ElevationMap::known(int ix, int iy) const { return in_grid(ix, iy) && std::isfinite(heights_[index(ix, iy)]); }

Vec2 ElevationMap::node_position(int ix, int iy) const {
  return {origin_.x + ix * resolution_, origin_.y + iy * resolution_};
}

Vec2 ElevationMap::world_to_grid(Vec2 p) const {
  return {(p.x - origin_.x) / resolution_, (p.y - origin_.y) / resolution_};
}

Vec2 ElevationMap::grid_to_world(Vec2 g) const {
  return {origin_.x + g.x * resolution_, origin_.y + g.y * resolution_};
}

std::optional<std::array<int, 2>> ElevationMap::nearest_node(Vec2 p) const {
  const Vec2 g = world_to_grid(p);
  const int ix = int(std::lround(g.x));
  const int iy = int(std::lround(g.y));
  if (!in_grid(ix, iy)) return std::nullopt;
  return std::array<int, 2>{ix, iy};
}

std::optional<double> ElevationMap::interpolate(Vec2 p) const {
  const Vec2 g = world_to_grid(p);
  // Tolerate rounding right at the last node.
  constexpr double eps = 1e-9;
  if (!(g.x >= -eps && g.y >= -eps && g.x <= width_ - 1 + eps && g.y <= height_ - 1 + eps)) return std::nullopt;
  int ix = std::clamp(int(std::floor(g.x)), 0, std::max(width_ - 2, 0));
  int iy = std::clamp(int(std::floor(g.y)), 0, std::max(height_ - 2, 0));
  const double fx = std::clamp(g.x - ix, 0.0, 1.0);
  const double fy = std::clamp(g.y - iy, 0.0, 1.0);
  const int ix1 = std::min(ix + 1, width_ - 1);
  const int iy1 = std::min(iy + 1, height_ - 1);

  // Nodes carrying zero weight may be unknown without affecting the result.
  auto fetch = [&](int x, int y, double w) -> std::optional<double> {
    const double h = heights_[index(x, y)];
    if (w == 0.0) return 0.0;
    if (!std::isfinite(h)) return std::nullopt;
    return w * h;
  };
  double sum = 0.0;
  for (auto term : {fetch(ix, iy, (1 - fx) * (1 - fy)), fetch(ix1, iy, fx * (1 - fy)), fetch(ix, iy1, (1 - fx) * fy),
                    fetch(ix1, iy1, fx * fy)}) {
    if (!term) return std::nullopt;
    sum += *term;
  }
  return sum;
}

// ─── I/O ───────────────────────────────────────────────────────────────────

void write_elevation(std::ostream& os, const ElevationMap& map) {
  std::ostringstream hdr;
  hdr.precision(17);
  hdr << "ELEV v1 " << map.width() << ' ' << map.height() << ' ' << map.resolution() << ' ' << map.origin().x << ' '
      << map.origin().y << '\n';
  os << hdr.str();
  char buf[32];
  for (int iy = 0; iy < map.height(); ++iy) {
    for (int ix = 0; ix < map.width(); ++ix) {
      const double h = map.at(ix, iy);
      if (std::isfinite(h)) {
        std::snprintf(buf, sizeof buf, "%.17g", h);
        os << buf;
      } else {
        os << "nan";
      }
      os << (ix + 1 == map.width() ? '\n' : ' ');
    }
  }
}

ElevationMap read_elevation(std::istream& is) {
  std::string magic, version;
  int width = 0, height = 0;
  double res = 0.0, x0 = 0.0, y0 = 0.0;
  if (!(is >> magic >> version) || magic != "ELEV" || version != "v1")
    throw ParseError("elevation file: expected header 'ELEV v1'");
  if (!(is >> width >> height >> res >> x0 >> y0)) throw ParseError("elevation file: malformed header");
  if (width < 1 || height < 1 || !(res > 0.0)) throw ParseError("elevation file: invalid dimensions");
  skip_comment_lines(is);
  is.clear(is.rdstate() & ~std::ios::failbit);
  ElevationMap map({x0, y0}, res, width, height);
  std::string tok;
  for (int iy = 0; iy < height; ++iy) {
    for (int ix = 0; ix < width; ++ix) {
      if (!(is >> tok)) throw ParseError("elevation file: truncated height data");
      if (tok == "nan" || tok == "NaN" || tok == "-nan") {
        map.set_unknown(ix, iy);
        continue;
      }
      char* end = nullptr;
      const double h = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0' || !std::isfinite(h))
        throw ParseError("elevation file: bad height token '" + tok + "'");
      map.set(ix, iy, h);
    }
  }
  if (is >> tok) throw ParseError("elevation file: trailing data after " + std::to_string(width * height) + " heights");
  return map;
}

void save_elevation(const std::string& path, const ElevationMap& map) {
  std::ofstream os(path);
  if (!os) throw ParameterError("cannot open '" + path + "' for writing");
  write_elevation(os, map);
  if (!os) throw ParameterError("failed writing '" + path + "'");
}

ElevationMap load_elevation(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open elevation file '" + path + "'");
  return read_elevation(is);
}

MapSummary summarize(const ElevationMap& map) {
  MapSummary s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0, sum_sq = 0.0;
  for (double h : map.heights()) {
    if (!std::isfinite(h)) continue;
    ++s.known;
    s.min = std::min(s.min, h);
    s.max = std::max(s.max, h);
    sum += h;
  }
  if (s.known == 0) return {};
  s.mean = sum / double(s.known);
  for (double h : map.heights())
    if (std::isfinite(h)) sum_sq += (h - s.mean) * (h - s.mean);
  s.stddev = std::sqrt(sum_sq / double(s.known));
  return s;
}

void write_pgm(std::ostream& os, const ElevationMap& map) {
  const MapSummary s = summarize(map);
  const double span = s.max - s.min;
  os << "P2\n" << map.width() << ' ' << map.height() << "\n255\n";
  for (int iy = map.height() - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < map.width(); ++ix) {
      const double h = map.at(ix, iy);
      int gray = 0;
      if (std::isfinite(h) && span > 0.0) gray = int(std::lround(255.0 * (h - s.min) / span));
      os << gray << (ix + 1 == map.width() ? '\n' : ' ');
    }
  }
}

}  // namespace stanav::terrain
