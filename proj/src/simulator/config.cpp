#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "stanav/simulator.hpp"

namespace stanav::sim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v))
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

std::vector<double> to_tuple(const std::string& key, const std::string& text, std::size_t min_n, std::size_t max_n) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(to_double(key, part));
  if (out.size() < min_n || out.size() > max_n)
    throw ConfigError(key + ": expected " + std::to_string(min_n) +
                      (min_n == max_n ? "" : " or " + std::to_string(max_n)) + " comma-separated numbers");
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Runs `check`, reporting a ParameterError as a ConfigError on `section`.
template <typename F>
void checked(const std::string& section, F&& check) {
  try {
    check();
  } catch (const ParameterError& e) {
    throw ConfigError("[" + section + "] " + e.what());
  }
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& is) {
  ConfigFile cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' outside a section");
    cfg.values_[section + "." + key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in);
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void ConfigFile::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown config field '" + key + "'");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "world.name",          "world.terrain",         "world.start",          "world.goal",
      "planner.mode",        "planner.iterations",    "planner.steer_step",   "planner.gamma",
      "planner.max_radius",  "planner.goal_bias",     "planner.goal_tolerance", "planner.spacing",
      "planner.shortcut",    "risk.delta_limit",      "risk.alpha",           "mpc.horizon",
      "mpc.w_goal",          "mpc.w_phi",             "mpc.w_reg",            "mpc.box_penalty",
      "mpc.max_iterations",  "mpc.tolerance",         "lip.T",                "lip.H",
      "lip.g",               "episode.seed",          "episode.advance_radius", "episode.goal_radius",
      "episode.max_steps",   "episode.fall_k",        "episode.fall_delta0",  "benchmark.worlds",
      "benchmark.planners",  "benchmark.trials",      "benchmark.seed",       "benchmark.threads",
      "model.path"};
  return keys;
}

RunSettings settings_from_config(const ConfigFile& file) {
  file.require_known(config_keys());
  RunSettings s;
  auto& ep = s.episode;
  auto get = [&](const std::string& key) { return file.get(key); };
  auto number = [&](const std::string& key, double& out) {
    if (auto v = get(key)) out = to_double(key, *v);
  };
  auto integer = [&](const std::string& key, int& out) {
    if (auto v = get(key)) {
      const long long n = to_integer(key, *v);
      if (n < -2147483647LL || n > 2147483647LL) throw ConfigError(key + ": out of range");
      out = int(n);
    }
  };
  auto seed = [&](const std::string& key, std::uint64_t& out) {
    if (auto v = get(key)) {
      const long long n = to_integer(key, *v);
      if (n < 0) throw ConfigError(key + ": must be >= 0");
      out = std::uint64_t(n);
    }
  };

  // [world]
  if (auto name = get("world.name")) {
    try {
      s.world = builtin_world(*name);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("world.name: ") + e.what());
    }
    ep.start = s.world->start;
    ep.goal = s.world->goal;
  }
  if (auto path = get("world.terrain")) {
    if (s.world) throw ConfigError("world.terrain: conflicts with world.name");
    s.terrain_file = *path;
  }
  if (auto v = get("world.start")) {
    const auto t = to_tuple("world.start", *v, 2, 3);
    ep.start = {t[0], t[1], t.size() == 3 ? t[2] : 0.0};
    if (s.world) s.world->start = ep.start;
  }
  if (auto v = get("world.goal")) {
    const auto t = to_tuple("world.goal", *v, 2, 2);
    ep.goal = {t[0], t[1]};
    if (s.world) s.world->goal = ep.goal;
  }

  // [planner]
  if (auto v = get("planner.mode")) {
    try {
      ep.planner = PlannerSpec::parse(*v);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("planner.mode: ") + e.what());
    }
  }
  integer("planner.iterations", ep.plan.iterations);
  number("planner.steer_step", ep.plan.steer_step);
  number("planner.gamma", ep.plan.gamma);
  number("planner.max_radius", ep.plan.max_radius);
  number("planner.goal_bias", ep.plan.goal_bias);
  number("planner.goal_tolerance", ep.plan.goal_tolerance);
  number("planner.spacing", ep.plan.spacing);
  if (auto v = get("planner.shortcut")) {
    if (*v == "true" || *v == "1")
      ep.plan.shortcut = true;
    else if (*v == "false" || *v == "0")
      ep.plan.shortcut = false;
    else
      throw ConfigError("planner.shortcut: expected true or false, got '" + *v + "'");
  }
  std::erase_if(ep.plan.checkpoints, [&](int c) { return c >= ep.plan.iterations; });
  ep.plan.checkpoints.push_back(ep.plan.iterations);
  checked("planner", [&] { ep.plan.validate(); });

  // [risk]
  number("risk.delta_limit", s.risk.delta_limit);
  number("risk.alpha", s.risk.alpha);
  checked("risk", [&] { s.risk.validate(); });

  // [mpc], [lip]
  integer("mpc.horizon", ep.mpc.horizon);
  number("mpc.w_goal", ep.mpc.w_goal);
  number("mpc.w_phi", ep.mpc.w_phi);
  number("mpc.w_reg", ep.mpc.w_reg);
  number("mpc.box_penalty", ep.mpc.box_penalty);
  integer("mpc.max_iterations", ep.mpc.max_iterations);
  number("mpc.tolerance", ep.mpc.tolerance);
  checked("mpc", [&] { ep.mpc.validate(); });
  number("lip.T", ep.lip.T);
  number("lip.H", ep.lip.H);
  number("lip.g", ep.lip.g);
  checked("lip", [&] { ep.lip.validate(); });

  // [episode]
  seed("episode.seed", ep.seed);
  number("episode.advance_radius", ep.advance_radius);
  number("episode.goal_radius", ep.goal_radius);
  integer("episode.max_steps", ep.max_steps);
  number("episode.fall_k", ep.fall.k);
  number("episode.fall_delta0", ep.fall.delta0);
  checked("episode", [&] { ep.validate(); });

  // [benchmark]
  auto& bench = s.benchmark;
  if (auto v = get("benchmark.worlds")) {
    for (const auto& name : split(*v, ',')) {
      try {
        bench.worlds.push_back(builtin_world(name));
      } catch (const ParameterError& e) {
        throw ConfigError(std::string("benchmark.worlds: ") + e.what());
      }
    }
    if (bench.worlds.empty()) throw ConfigError("benchmark.worlds: empty list");
  } else if (s.world) {
    bench.worlds = {*s.world};
  }
  if (auto v = get("benchmark.planners")) {
    bench.planners.clear();
    for (const auto& name : split(*v, ',')) {
      try {
        bench.planners.push_back(PlannerSpec::parse(name));
      } catch (const ParameterError& e) {
        throw ConfigError(std::string("benchmark.planners: ") + e.what());
      }
    }
    if (bench.planners.empty()) throw ConfigError("benchmark.planners: empty list");
  }
  integer("benchmark.trials", bench.trials);
  if (bench.trials < 1) throw ConfigError("benchmark.trials: must be >= 1");
  seed("benchmark.seed", bench.seed);
  if (auto v = get("benchmark.threads")) {
    const long long n = to_integer("benchmark.threads", *v);
    if (n < 0 || n > 1024) throw ConfigError("benchmark.threads: must lie in [0, 1024]");
    bench.threads = unsigned(n);
  }
  bench.risk = s.risk;
  bench.episode = ep;

  if (auto v = get("model.path")) s.model_file = *v;
  return s;
}

void write_settings(std::ostream& os, const RunSettings& s) {
  const auto& ep = s.episode;
  os << "[world]\n";
  if (s.world) os << "name = " << s.world->name << '\n';
  if (s.terrain_file) os << "terrain = " << *s.terrain_file << '\n';
  os << "start = " << num(ep.start.x) << ", " << num(ep.start.y) << ", " << num(ep.start.yaw) << '\n';
  os << "goal = " << num(ep.goal.x) << ", " << num(ep.goal.y) << '\n';
  os << "\n[planner]\nmode = " << ep.planner.name() << "\niterations = " << ep.plan.iterations
     << "\nsteer_step = " << num(ep.plan.steer_step) << "\ngamma = " << num(ep.plan.gamma)
     << "\nmax_radius = " << num(ep.plan.max_radius) << "\ngoal_bias = " << num(ep.plan.goal_bias)
     << "\ngoal_tolerance = " << num(ep.plan.goal_tolerance) << "\nspacing = " << num(ep.plan.spacing)
     << "\nshortcut = " << (ep.plan.shortcut ? "true" : "false") << '\n';
  os << "\n[risk]\ndelta_limit = " << num(s.risk.delta_limit) << "\nalpha = " << num(s.risk.alpha) << '\n';
  os << "\n[mpc]\nhorizon = " << ep.mpc.horizon << "\nw_goal = " << num(ep.mpc.w_goal) << "\nw_phi = "
     << num(ep.mpc.w_phi) << "\nw_reg = " << num(ep.mpc.w_reg) << "\nbox_penalty = " << num(ep.mpc.box_penalty)
     << "\nmax_iterations = " << ep.mpc.max_iterations << "\ntolerance = " << num(ep.mpc.tolerance) << '\n';
  os << "\n[lip]\nT = " << num(ep.lip.T) << "\nH = " << num(ep.lip.H) << "\ng = " << num(ep.lip.g) << '\n';
  os << "\n[episode]\nseed = " << ep.seed << "\nadvance_radius = " << num(ep.advance_radius)
     << "\ngoal_radius = " << num(ep.goal_radius) << "\nmax_steps = " << ep.max_steps
     << "\nfall_k = " << num(ep.fall.k) << "\nfall_delta0 = " << num(ep.fall.delta0) << '\n';
  const auto& b = s.benchmark;
  os << "\n[benchmark]\n";
  if (!b.worlds.empty()) {
    os << "worlds = ";
    for (std::size_t i = 0; i < b.worlds.size(); ++i) os << (i ? ", " : "") << b.worlds[i].name;
    os << '\n';
  }
  os << "planners = ";
  for (std::size_t i = 0; i < b.planners.size(); ++i) os << (i ? ", " : "") << b.planners[i].name();
  os << "\ntrials = " << b.trials << "\nseed = " << b.seed << "\nthreads = " << b.threads << '\n';
  if (s.model_file) os << "\n[model]\npath = " << *s.model_file << '\n';
}

}  // namespace stanav::sim
