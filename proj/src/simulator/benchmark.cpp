#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "stanav/instability.hpp"
#include "stanav/simulator.hpp"

namespace stanav::sim {

CellReport aggregate(const std::string& world, const std::string& planner, const std::vector<EpisodeResult>& trials) {
  CellReport c;
  c.world = world;
  c.planner = planner;
  c.trials = int(trials.size());
  double mean_sum = 0.0, max_sum = 0.0, time_sum = 0.0;
  for (const auto& t : trials) {
    if (!t.success) continue;
    ++c.successes;
    mean_sum += t.mean_instability;
    max_sum += t.max_instability;
    time_sum += t.navigation_time;
  }
  c.success_rate = c.trials > 0 ? double(c.successes) / double(c.trials) : 0.0;
  if (c.successes > 0) {
    const double n = c.successes;
    c.mean_instability = mean_sum / n;
    c.max_instability = max_sum / n;
    c.navigation_time = time_sum / n;
  }
  return c;
}

std::uint64_t trial_seed(std::uint64_t base, int trial) { return mix_seed(base, std::uint64_t(trial)); }

BenchmarkReport run_benchmark(const BenchmarkConfig& config, const instability::InstabilityPredictor& model) {
  if (config.trials < 1) throw ParameterError("benchmark: trials must be >= 1");
  if (config.worlds.empty() || config.planners.empty())
    throw ParameterError("benchmark: needs at least one world and one planner");
  config.risk.validate();

  BenchmarkReport report;
  for (const auto& world : config.worlds) {
    const auto elevation = terrain::generate_terrain(world.terrain);
    const auto travmap = traversability::build_traversability_map(elevation, model, config.risk,
                                                                   {.baselines = true, .threads = config.threads});
    for (const auto& planner : config.planners) {
      std::vector<EpisodeResult> results(std::size_t(config.trials));
      auto run = [&](std::size_t t) {
        EpisodeConfig ec = config.episode;
        ec.start = world.start;
        ec.goal = world.goal;
        ec.planner = planner;
        ec.seed = trial_seed(config.seed, int(t));
        results[t] = run_episode(elevation, travmap, ec);
      };
      unsigned workers = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
      workers = std::min<unsigned>(workers, unsigned(config.trials));
      if (workers <= 1) {
        for (std::size_t t = 0; t < results.size(); ++t) run(t);
      } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < workers; ++k)
          pool.emplace_back([&] {
            for (std::size_t t = next++; t < results.size(); t = next++) run(t);
          });
      }
      report.cells.push_back(aggregate(world.name, planner.name(), results));
      report.episodes.push_back(std::move(results));
    }
  }
  return report;
}

namespace {

std::string fmt(std::optional<double> v, int precision = 4) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *v;
  return os.str();
}

std::string csv_field(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& os, const BenchmarkReport& report, const BenchmarkConfig& config) {
  os << "# BENCH v1 seed=" << config.seed << " trials=" << config.trials << " delta_limit=" << config.risk.delta_limit
     << " alpha=" << config.risk.alpha << '\n';
  os << "world,planner,trials,successes,success_rate,mean_instability,max_instability,navigation_time\n";
  for (const auto& c : report.cells)
    os << c.world << ',' << c.planner << ',' << c.trials << ',' << c.successes << ',' << csv_field(c.success_rate)
       << ',' << csv_field(c.mean_instability) << ',' << csv_field(c.max_instability) << ','
       << csv_field(c.navigation_time) << '\n';
}

void write_report_table(std::ostream& os, const BenchmarkReport& report) {
  const std::vector<std::string> head{"world", "planner", "success", "mean inst.", "max inst.", "nav. time [s]"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : report.cells) {
    std::ostringstream rate;
    rate << c.successes << '/' << c.trials << " (" << std::fixed << std::setprecision(0) << 100.0 * c.success_rate
         << "%)";
    rows.push_back({c.world, c.planner, rate.str(), fmt(c.mean_instability, 3), fmt(c.max_instability, 3),
                    fmt(c.navigation_time, 1)});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) width[i] = head[i].size();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i > 0) os << "  ";
      if (i < 2)
        os << std::left << std::setw(int(width[i])) << r[i];
      else
        os << std::right << std::setw(int(width[i])) << r[i];
    }
    os << std::left << '\n';
  };
  line(head);
  std::size_t total = 2 * (head.size() - 1);
  for (auto w : width) total += w;
  os << std::string(total, '-') << '\n';
  for (const auto& r : rows) line(r);
}

void write_trajectory(std::ostream& os, const EpisodeResult& result, const EpisodeConfig& config) {
  char buf[256];
  os << "# TRAJ v1 seed=" << config.seed << " planner=" << config.planner.name() << '\n';
  std::snprintf(buf, sizeof buf, "# start=%.17g,%.17g,%.17g goal=%.17g,%.17g\n", config.start.x, config.start.y,
                config.start.yaw, config.goal.x, config.goal.y);
  os << buf;
  std::snprintf(buf, sizeof buf, "# success=%d steps=%d navigation_time=%.17g mean=%.17g max=%.17g\n",
                int(result.success), result.steps, result.navigation_time, result.mean_instability,
                result.max_instability);
  os << buf;
  if (!result.reason.empty()) os << "# reason=" << result.reason << '\n';
  os << "step,x,y,phi,v_loc,u_f,u_dphi,delta\n";
  for (std::size_t i = 0; i < result.trajectory.size(); ++i) {
    const auto& s = result.trajectory[i];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i + 1, s.state.x, s.state.y,
                  s.state.phi, s.state.v_loc, s.control.u_f, s.control.u_dphi, s.delta);
    os << buf;
  }
}

}  // namespace stanav::sim
