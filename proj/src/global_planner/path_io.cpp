#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "stanav/global_planner.hpp"

namespace stanav::planner {

namespace {
std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_path(std::ostream& os, const Path& path, const PlannerConfig& config, std::uint64_t seed) {
  os << "# PATH v1\n";
  os << "mode " << to_string(config.mode) << '\n';
  os << "baseline " << traversability::to_string(config.baseline) << '\n';
  os << "weight " << num(config.weight) << '\n';
  os << "seed " << seed << '\n';
  os << "cost " << num(path.cost) << '\n';
  os << "waypoints " << path.waypoints.size() << '\n';
  for (std::size_t k = 0; k < path.waypoints.size(); ++k)
    os << num(path.waypoints[k].x) << ' ' << num(path.waypoints[k].y) << ' '
       << num(k == 0 ? 0.0 : path.edge_costs.at(k - 1)) << '\n';
}

Path read_path(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "# PATH v1") throw ParseError("path: expected header '# PATH v1'");
  Path path;
  std::size_t count = 0;
  bool have_count = false;
  while (!have_count && std::getline(is, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "cost") {
      if (!(ss >> path.cost)) throw ParseError("path: malformed cost");
    } else if (key == "waypoints") {
      if (!(ss >> count)) throw ParseError("path: malformed waypoint count");
      have_count = true;
    }
  }
  if (!have_count) throw ParseError("path: missing 'waypoints' line");
  for (std::size_t k = 0; k < count; ++k) {
    double x = 0.0, y = 0.0, c = 0.0;
    if (!(is >> x >> y >> c)) throw ParseError("path: expected " + std::to_string(count) + " waypoints");
    path.waypoints.push_back({x, y});
    if (k > 0) path.edge_costs.push_back(c);
  }
  return path;
}

void save_path(const std::string& file, const Path& path, const PlannerConfig& config, std::uint64_t seed) {
  std::ofstream os(file);
  if (!os) throw ParameterError("cannot open '" + file + "' for writing");
  write_path(os, path, config, seed);
}

Path load_path(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw ParseError("cannot open path '" + file + "'");
  return read_path(is);
}

}  // namespace stanav::planner
