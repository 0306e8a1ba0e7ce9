#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "stanav/global_planner.hpp"
#include "stanav/instability.hpp"
#include "stanav/local_planner.hpp"
#include "stanav/simulator.hpp"
#include "stanav/terrain.hpp"
#include "stanav/traversability.hpp"

namespace stanav::cli {

namespace {

namespace fs = std::filesystem;
using instability::InstabilityPredictor;
using traversability::TraversabilityMap;

/// Bad command-line input that CLI11 cannot detect on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir = ".";
  bool quiet = false;
};

class Context {
 public:
  Context(const Globals& g, std::vector<std::string> argv, std::ostream& out, std::ostream& err)
      : globals(g), argv_(std::move(argv)), out_(out), err_(err), null_(nullptr) {}

  std::ostream& info() { return globals.quiet ? null_ : out_; }
  std::ostream& error() { return err_; }

  /// Resolves `name` against --out-dir and creates missing directories.
  fs::path output(const std::string& name) const {
    fs::path p(name);
    if (p.is_relative()) p = fs::path(globals.out_dir) / p;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
  }

  /// `# command:` and `# seed:` lines, plus the effective settings when given.
  std::string provenance(std::uint64_t seed, const sim::RunSettings* settings = nullptr) const {
    std::ostringstream os;
    os << "# command:";
    for (const auto& a : argv_) os << ' ' << a;
    os << "\n# seed: " << seed << '\n';
    if (settings) {
      std::ostringstream block;
      sim::write_settings(block, *settings);
      std::istringstream lines(block.str());
      for (std::string line; std::getline(lines, line);)
        if (!line.empty()) os << "# " << line << '\n';
    }
    return os.str();
  }

  Globals globals;
  sim::RunSettings settings;

 private:
  std::vector<std::string> argv_;
  std::ostream& out_;
  std::ostream& err_;
  std::ostream null_;
};

/// Writes `body` to `path`, inserting `meta` after its first line.
void write_file(const fs::path& path, const std::string& body, const std::string& meta = "") {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot open '" + path.string() + "' for writing");
  const auto eol = body.find('\n');
  if (meta.empty() || eol == std::string::npos) {
    os << body;
  } else {
    os << body.substr(0, eol + 1) << meta << body.substr(eol + 1);
  }
  if (!os) throw UsageError("failed writing '" + path.string() + "'");
}

std::vector<double> parse_numbers(const std::string& flag, const std::string& text, std::size_t min_n,
                                  std::size_t max_n) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used == 0 || used != item.size() || !std::isfinite(v))
      throw UsageError(flag + ": expected comma-separated numbers, got '" + text + "'");
    out.push_back(v);
  }
  if (out.size() < min_n || out.size() > max_n)
    throw UsageError(flag + ": expected " + std::to_string(min_n) +
                     (min_n == max_n ? "" : " to " + std::to_string(max_n)) + " numbers, got '" + text + "'");
  return out;
}

Pose2 parse_pose(const std::string& flag, const std::string& text) {
  const auto v = parse_numbers(flag, text, 2, 3);
  return {v[0], v[1], v.size() == 3 ? v[2] : 0.0};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::unique_ptr<InstabilityPredictor> load_predictor(const std::optional<std::string>& path) {
  if (!path) return std::make_unique<instability::OracleModel>();
  return std::make_unique<instability::InstabilityModel>(instability::load_model(*path));
}

std::string fixed(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// ─── PPM overlays ──────────────────────────────────────────────────────────

using Rgb = std::array<int, 3>;
constexpr Rgb kPathColor{255, 0, 0};
constexpr Rgb kTrajectoryColor{255, 200, 0};
constexpr Rgb kStartColor{0, 255, 0};
constexpr Rgb kGoalColor{0, 128, 255};

/// Travmap-aligned RGB raster; pixel (ix, iy) is node (ix, iy).
class Overlay {
 public:
  explicit Overlay(const TraversabilityMap& map) : map_(map), px_(std::size_t(map.width()) * map.height()) {
    for (int iy = 0; iy < map.height(); ++iy)
      for (int ix = 0; ix < map.width(); ++ix) {
        const double v = map.mean_v_star(ix, iy);
        const int g = std::isnan(v) ? 0 : int(std::lround(255.0 * std::clamp(v / 0.5, 0.0, 1.0)));
        at(ix, iy) = {g, g, g};
      }
  }

  void polyline(const std::vector<Vec2>& pts, Rgb color) {
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == 0) {
        mark(pts[0], color);
        continue;
      }
      const double len = distance(pts[k - 1], pts[k]);
      const int n = std::max(1, int(std::ceil(len / (0.25 * map_.resolution()))));
      for (int i = 0; i <= n; ++i) mark(pts[k - 1] + (double(i) / n) * (pts[k] - pts[k - 1]), color);
    }
  }

  void marker(Vec2 p, Rgb color) {
    const double r = map_.resolution();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) mark({p.x + dx * r, p.y + dy * r}, color);
  }

  void write(std::ostream& os) const {
    os << "P3\n" << map_.width() << ' ' << map_.height() << "\n255\n";
    for (int iy = map_.height() - 1; iy >= 0; --iy) {
      for (int ix = 0; ix < map_.width(); ++ix) {
        const auto& c = px_[std::size_t(iy) * map_.width() + ix];
        os << (ix ? " " : "") << c[0] << ' ' << c[1] << ' ' << c[2];
      }
      os << '\n';
    }
  }

 private:
  Rgb& at(int ix, int iy) { return px_[std::size_t(iy) * map_.width() + ix]; }
  void mark(Vec2 p, Rgb color) {
    if (const auto node = map_.nearest_node(p)) at((*node)[0], (*node)[1]) = color;
  }

  const TraversabilityMap& map_;
  std::vector<Rgb> px_;
};

void write_overlay(const fs::path& path, const TraversabilityMap& map, const std::vector<Vec2>& plan,
                   const std::vector<Vec2>& trajectory, Vec2 start, Vec2 goal) {
  Overlay img(map);
  img.polyline(plan, kPathColor);
  img.polyline(trajectory, kTrajectoryColor);
  img.marker(start, kStartColor);
  img.marker(goal, kGoalColor);
  std::ostringstream os;
  img.write(os);
  write_file(path, os.str());
}

// ─── Shared world handling ─────────────────────────────────────────────────

struct WorldOptions {
  std::string world;
  std::string terrain;
  std::string travmap;
  std::string model;
  double delta_limit = 0.0;
  double alpha = 0.0;
  unsigned threads = 0;
  CLI::Option* delta_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;

  void add(CLI::App* cmd, bool with_travmap) {
    cmd->add_option("--world", world, "Built-in world: flat, band, two-corridor, rough");
    cmd->add_option("--terrain", terrain, "Elevation file (ELEV v1)");
    if (with_travmap) cmd->add_option("--travmap", travmap, "Reuse a travmap instead of building one");
    cmd->add_option("--model", model, "Instability model file (INSTAB v1); default: ground-truth oracle");
    delta_opt = cmd->add_option("--delta-limit", delta_limit, "Instability threshold");
    alpha_opt = cmd->add_option("--alpha", alpha, "VaR confidence level");
    cmd->add_option("--threads", threads, "Worker threads for travmap construction (0 = all cores)");
  }

  void apply_risk(sim::RunSettings& s) const {
    if (delta_opt && delta_opt->count()) s.risk.delta_limit = delta_limit;
    if (alpha_opt && alpha_opt->count()) s.risk.alpha = alpha;
    s.risk.validate();
  }

  std::optional<std::string> model_path(const sim::RunSettings& s) const {
    if (!model.empty()) return model;
    return s.model_file;
  }
};

struct LoadedWorld {
  std::string name;
  terrain::ElevationMap elevation;
  std::optional<sim::World> builtin;
};

LoadedWorld load_world(const WorldOptions& w, const sim::RunSettings& s, std::uint64_t seed_for_builtin,
                       bool seed_given) {
  LoadedWorld out;
  if (!w.world.empty() && !w.terrain.empty()) throw UsageError("--world and --terrain are mutually exclusive");
  if (!w.world.empty() || (w.terrain.empty() && s.world)) {
    out.builtin = w.world.empty() ? *s.world : sim::builtin_world(w.world);
    if (!w.world.empty() && s.world && s.world->name == w.world) out.builtin = *s.world;
    if (seed_given) out.builtin->terrain.seed = seed_for_builtin;
    out.name = out.builtin->name;
    out.elevation = terrain::generate_terrain(out.builtin->terrain);
    return out;
  }
  const std::string path = !w.terrain.empty() ? w.terrain : s.terrain_file.value_or("");
  if (path.empty()) throw UsageError("no world given: use --world, --terrain or a [world] config section");
  out.name = fs::path(path).stem().string();
  out.elevation = terrain::load_elevation(path);
  return out;
}

TraversabilityMap travmap_for(const WorldOptions& w, const terrain::ElevationMap& elevation,
                              const sim::RunSettings& s) {
  if (!w.travmap.empty()) return traversability::load_travmap(w.travmap);
  const auto model = load_predictor(w.model_path(s));
  return traversability::build_traversability_map(elevation, *model, s.risk, {.baselines = true, .threads = w.threads});
}

// ─── Subcommands ───────────────────────────────────────────────────────────

struct GenTerrain {
  std::string world;
  std::string kind = "flat";
  double size_x = 10.0, size_y = 10.0, resolution = terrain::kDefaultResolution;
  double angle_deg = 10.0, direction_deg = 0.0;
  double rise = 0.1, run = 0.3;
  double amplitude = 0.05, correlation = 0.2;
  double ramp_start = 2.0, ramp_length = 4.0;
  std::string out = "terrain.elev";
  std::string pgm;

  void add(CLI::App& app, std::function<int()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("gen-terrain", "Generate an elevation map");
    cmd->add_option("--world", world, "Use the terrain of a built-in world");
    cmd->add_option("--kind", kind, "flat, slope, steps, rough or ramp")->capture_default_str();
    cmd->add_option("--size-x", size_x, "Extent along x [m]")->capture_default_str();
    cmd->add_option("--size-y", size_y, "Extent along y [m]")->capture_default_str();
    cmd->add_option("--resolution", resolution, "Grid spacing [m]")->capture_default_str();
    cmd->add_option("--angle", angle_deg, "Slope or ramp angle [deg]")->capture_default_str();
    cmd->add_option("--direction", direction_deg, "Ascent direction [deg]")->capture_default_str();
    cmd->add_option("--rise", rise, "Step rise [m]")->capture_default_str();
    cmd->add_option("--run", run, "Step run [m]")->capture_default_str();
    cmd->add_option("--amplitude", amplitude, "Rough height std [m]")->capture_default_str();
    cmd->add_option("--correlation", correlation, "Rough correlation length [m]")->capture_default_str();
    cmd->add_option("--ramp-start", ramp_start, "Distance where the ramp begins [m]")->capture_default_str();
    cmd->add_option("--ramp-length", ramp_length, "Horizontal ramp length [m]")->capture_default_str();
    cmd->add_option("-o,--out", out, "Output elevation file")->capture_default_str();
    cmd->add_option("--pgm", pgm, "Also write a PGM height image");
    cmd->callback([&] { action = [&] { return execute(ctx); }; });
  }

  int execute(Context& ctx) {
    terrain::TerrainSpec spec;
    std::string description;
    const std::string world_name = !world.empty() ? world : (ctx.settings.world ? ctx.settings.world->name : "");
    if (!world_name.empty()) {
      spec = sim::builtin_world(world_name).terrain;
      if (ctx.globals.seed) spec.seed = *ctx.globals.seed;
      description = "world=" + world_name;
    } else {
      spec.size_x = size_x;
      spec.size_y = size_y;
      spec.resolution = resolution;
      spec.seed = ctx.globals.seed.value_or(0);
      terrain::TerrainLayer layer;
      layer.kind = terrain::parse_terrain_kind(kind);
      constexpr double deg = std::numbers::pi / 180.0;
      layer.angle = angle_deg * deg;
      layer.direction = direction_deg * deg;
      layer.rise = rise;
      layer.run = run;
      layer.amplitude = amplitude;
      layer.correlation_length = correlation;
      layer.start = ramp_start;
      layer.length = ramp_length;
      if (layer.kind != terrain::TerrainKind::flat) spec.layers.push_back(layer);
      std::ostringstream d;
      d << "kind=" << terrain::to_string(layer.kind) << " size=" << size_x << 'x' << size_y
        << " resolution=" << resolution;
      switch (layer.kind) {
        case terrain::TerrainKind::slope: d << " angle_deg=" << angle_deg << " direction_deg=" << direction_deg; break;
        case terrain::TerrainKind::steps: d << " rise=" << rise << " run=" << run << " direction_deg=" << direction_deg; break;
        case terrain::TerrainKind::rough: d << " amplitude=" << amplitude << " correlation=" << correlation; break;
        case terrain::TerrainKind::ramp_corridor:
          d << " angle_deg=" << angle_deg << " direction_deg=" << direction_deg << " start=" << ramp_start
            << " length=" << ramp_length;
          break;
        case terrain::TerrainKind::flat: break;
      }
      description = d.str();
    }
    const auto map = terrain::generate_terrain(spec);
    std::ostringstream body;
    terrain::write_elevation(body, map);
    const auto path = ctx.output(out);
    write_file(path, body.str(), ctx.provenance(spec.seed) + "# terrain: " + description + '\n');
    if (!pgm.empty()) {
      std::ostringstream img;
      terrain::write_pgm(img, map);
      write_file(ctx.output(pgm), img.str());
    }
    const auto s = terrain::summarize(map);
    auto& os = ctx.info();
    os << "grid " << map.width() << " x " << map.height() << " nodes, resolution " << map.resolution() << " m\n"
       << "height min " << fixed(s.min, 4) << " max " << fixed(s.max, 4) << " mean " << fixed(s.mean, 4) << " std "
       << fixed(s.stddev, 4) << " m\n"
       << "known nodes " << s.known << "\nwrote " << path.string() << '\n';
    return kExitOk;
  }
};

struct MakeDataset {
  std::vector<std::string> terrains;
  std::size_t samples = 1000;
  double terrain_size = 4.0;
  std::string out = "dataset.csv";

  void add(CLI::App& app, std::function<int()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("make-dataset", "Sample oracle-labelled training rows");
    cmd->add_option("--terrain", terrains, "Elevation files (default: generated training terrains)");
    cmd->add_option("-n,--samples", samples, "Number of rows")->capture_default_str();
    cmd->add_option("--terrain-size", terrain_size, "Side of the generated training terrains [m]")
        ->capture_default_str();
    cmd->add_option("-o,--out", out, "Output CSV")->capture_default_str();
    cmd->callback([&] { action = [&] { return execute(ctx); }; });
  }

  int execute(Context& ctx) {
    const std::uint64_t seed = ctx.globals.seed.value_or(0);
    std::vector<terrain::ElevationMap> maps;
    if (terrains.empty()) {
      for (const auto& spec : instability::training_terrains(seed, terrain_size))
        maps.push_back(terrain::generate_terrain(spec));
    } else {
      for (const auto& t : terrains) maps.push_back(terrain::load_elevation(t));
    }
    const auto data = instability::sample_oracle_dataset(maps, samples, seed);
    std::ostringstream body;
    instability::write_dataset(body, data);
    std::ostringstream meta;
    meta << ctx.provenance(seed) << "# samples: " << samples << " terrains: " << maps.size() << '\n';
    const auto path = ctx.output(out);
    write_file(path, body.str(), meta.str());
    ctx.info() << "wrote " << data.size() << " rows from " << maps.size() << " terrains to " << path.string() << '\n';
    return kExitOk;
  }
};

struct Train {
  std::string dataset;
  int phases = 2;
  int epochs = 10;
  int epochs_phase2 = 20;
  double lr = 1e-2;
  double lr_phase2 = 1e-3;
  int batch = 16;
  std::string hidden = "32,32";
  std::string out = "model.txt";

  void add(CLI::App& app, std::function<int()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("train", "Train the instability model (MSE, then Gaussian NLL)");
    cmd->add_option("--dataset", dataset, "Dataset CSV")->required();
    cmd->add_option("--phases", phases, "1 = mean only, 2 = mean and sigma")->check(CLI::Range(1, 2))->capture_default_str();
    cmd->add_option("--epochs", epochs, "Phase-1 epochs")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--epochs-phase2", epochs_phase2, "Phase-2 epochs")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--lr", lr, "Phase-1 learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--lr-phase2", lr_phase2, "Phase-2 learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--batch", batch, "Minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--hidden", hidden, "Hidden layer widths")->capture_default_str();
    cmd->add_option("-o,--out", out, "Output model file")->capture_default_str();
    cmd->callback([&] { action = [&] { return execute(ctx); }; });
  }

  int execute(Context& ctx) {
    const std::uint64_t seed = ctx.globals.seed.value_or(0);
    std::vector<int> widths{instability::InstabilityModel::kInputs};
    for (double h : parse_numbers("--hidden", hidden, 1, 16)) {
      if (h < 1 || h != std::floor(h)) throw UsageError("--hidden: widths must be positive integers");
      widths.push_back(int(h));
    }
    widths.push_back(1);

    std::ifstream in(dataset);
    if (!in) throw UsageError("cannot open dataset '" + dataset + "'");
    const auto data = instability::read_dataset(in);
    auto model = instability::InstabilityModel::initialized(seed, widths);
    auto& os = ctx.info();
    const auto r1 = instability::train_phase1(model, data, {epochs, lr, batch, seed});
    os << "phase 1 initial loss " << r1.initial_loss << '\n';
    for (std::size_t e = 0; e < r1.epoch_loss.size(); ++e)
      os << "phase 1 epoch " << e + 1 << " loss " << r1.epoch_loss[e] << '\n';
    if (phases == 2) {
      const auto r2 = instability::train_phase2(model, data, {epochs_phase2, lr_phase2, batch, seed});
      os << "phase 2 initial loss " << r2.initial_loss << '\n';
      for (std::size_t e = 0; e < r2.epoch_loss.size(); ++e)
        os << "phase 2 epoch " << e + 1 << " loss " << r2.epoch_loss[e] << '\n';
      os << "picp " << instability::picp(model, data) << '\n';
    }
    os << "rmse " << instability::rmse(model, data) << '\n';

    std::ostringstream body;
    instability::write_model(body, model);
    std::ostringstream meta;
    meta << ctx.provenance(seed) << "# dataset: " << dataset << " rows: " << data.size() << " phases: " << phases
         << " epochs: " << epochs << ',' << epochs_phase2 << " lr: " << lr << ',' << lr_phase2 << " batch: " << batch
         << '\n';
    const auto path = ctx.output(out);
    write_file(path, body.str(), meta.str());
    os << "wrote " << path.string() << '\n';
    return kExitOk;
  }
};

struct AnalyzeFeatures {
  std::string log;
  int horizon = 2;
  std::string out;

  void add(CLI::App& app, std::function<int()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("analyze-features", "Rank gait features by how well they predict falls");
    cmd->add_option("--log", log, "Gait log CSV (time,marker,fall,<features>...)")->required();
    cmd->add_option("--horizon", horizon, "Cycles after a labelled cycle that still count")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("-o,--out", out, "Also write the report as CSV");
    cmd->callback([&] { action = [&] { return execute(ctx); }; });
  }

  int execute(Context& ctx) {
    std::ifstream in(log);
    if (!in) throw UsageError("cannot open gait log '" + log + "'");
    const auto records = instability::parse_gait_cycles(instability::read_gait_log(in), horizon);
    if (records.empty()) throw UsageError("gait log '" + log + "' contains no complete gait cycle");
    const auto reports = instability::analyze_features(records);
    int falls = 0;
    for (const auto& r : records) falls += r.fallover;

    std::size_t name_width = 7;
    for (const auto& r : reports) name_width = std::max(name_width, r.name.size());
    auto& os = ctx.info();
    os << records.size() << " gait cycles, " << falls << " labelled fall\n";
    os << std::left << std::setw(int(name_width)) << "feature" << "  " << std::right << std::setw(12)
       << "McFadden R2" << "  " << std::setw(8) << "AUC" << '\n';
    for (const auto& r : reports)
      os << std::left << std::setw(int(name_width)) << r.name << "  " << std::right << std::setw(12)
         << fixed(r.fit.mcfadden_r2, 4) << "  " << std::setw(8) << fixed(r.fit.auc, 4) << '\n';
    if (!out.empty()) {
      std::ostringstream csv;
      csv << "# FEATURES v1\n" << ctx.provenance(0) << "feature,mcfadden_r2,auc,intercept,slope\n";
      for (const auto& r : reports) {
        char buf[160];
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g\n", r.fit.mcfadden_r2, r.fit.auc, r.fit.intercept,
                      r.fit.slope);
        csv << r.name << buf;
      }
      write_file(ctx.output(out), csv.str());
    }
    return kExitOk;
  }
};

struct Travmap {
  WorldOptions world;
  std::string out = "travmap.csv";
  std::string pgm = "v_star.pgm";

  void add(CLI::App& app, std::function<int()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("travmap", "Build the stability-aware command velocity map");
    world.add(cmd, false);
    cmd->add_option("-o,--out", out, "Output travmap")->capture_default_str();
    cmd->add_option("--pgm", pgm, "Heatmap of bin-averaged v*")->capture_default_str();
    cmd->callback([&] { action = [&] { return execute(ctx); }; });
  }

  int execute(Context& ctx) {
    auto& s = ctx.settings;
    world.apply_risk(s);
    const auto loaded = load_world(world, s, ctx.globals.seed.value_or(0), bool(ctx.globals.seed));
    const auto map = travmap_for(world, loaded.elevation, s);

    std::ostringstream body;
    traversability::write_travmap(body, map);
    std::ostringstream meta;
    meta << ctx.provenance(loaded.builtin ? loaded.builtin->terrain.seed : ctx.globals.seed.value_or(0))
         << "# world: " << loaded.name << " delta_limit: " << s.risk.delta_limit << " alpha: " << s.risk.alpha
         << " model: " << world.model_path(s).value_or("oracle") << '\n';
    const auto path = ctx.output(out);
    write_file(path, body.str(), meta.str());
    std::ostringstream img;
    traversability::write_v_star_pgm(img, map);
    write_file(ctx.output(pgm), img.str());

    std::size_t defined = 0, total = 0;
    double sum = 0.0, lo = 1.0, hi = 0.0;
    for (int iy = 0; iy < map.height(); ++iy)
      for (int ix = 0; ix < map.width(); ++ix)
        for (int b = 0; b < traversability::kYawBins; ++b) {
          ++total;
          if (!map.defined(ix, iy, b)) continue;
          ++defined;
          const double v = map.command(ix, iy, b).v_star;
          sum += v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
    auto& os = ctx.info();
    os << "travmap " << map.width() << " x " << map.height() << " nodes, " << defined << '/' << total
       << " (node, yaw) entries defined\n";
    if (defined > 0)
      os << "v* min " << fixed(lo, 3) << " mean " << fixed(sum / double(defined), 3) << " max " << fixed(hi, 3)
         << " m/s\n";
    os << "wrote " << path.string() << '\n';
    return kExitOk;
  }
};

struct PlannerOptions {
  std::string planner;
  std::string start;
  std::string goal;
  int iterations = 0;
  CLI::Option* iterations_opt = nullptr;

  void add(CLI::App* cmd) {
    cmd->add_option("--planner", planner, "STATE, LearnedInS(w), ManualBiped(w) or QuadFoothold(w)");
    cmd->add_option("--start", start, "Start pose x,y[,yaw]");
    cmd->add_option("--goal", goal, "Goal position x,y");
    iterations_opt = cmd->add_option("--iterations", iterations, "TravRRT* iterations");
  }

  void apply(sim::EpisodeConfig& ep) const {
    if (!planner.empty()) ep.planner = sim::PlannerSpec::parse(planner);
    if (!start.empty()) ep.start = parse_pose("--start", start);
    if (!goal.empty()) {
      const auto g = parse_numbers("--goal", goal, 2, 2);
      ep.goal = {g[0], g[1]};
    }
    if (iterations_opt && iterations_opt->count()) {
      ep.plan.iterations = iterations;
      std::erase_if(ep.plan.checkpoints, [&](int c) { return c >= iterations; });
      ep.plan.checkpoints.push_back(iterations);
    }
    ep.plan.validate();
  }
};

struct Plan {
  std::string travmap;
  PlannerOptions planner;
  std::string out = "path.txt";
  std::string ppm = "path.ppm";

  void add(CLI::App& app, std::function<int()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("plan", "Plan a global path with TravRRT*");
    cmd->add_option("--travmap", travmap, "Travmap file")->required();
    planner.add(cmd);
    cmd->add_option("-o,--out", out, "Output path file")->capture_default_str();
    cmd->add_option("--ppm", ppm, "Overlay image")->capture_default_str();
    cmd->callback([&] { action = [&] { return execute(ctx); }; });
  }

  int execute(Context& ctx) {
    auto& ep = ctx.settings.episode;
    planner.apply(ep);
    if (!ctx.settings.world && planner.start.empty()) throw UsageError("plan: --start is required");
    if (!ctx.settings.world && planner.goal.empty()) throw UsageError("plan: --goal is required");
    const std::uint64_t seed = ctx.globals.seed.value_or(ep.seed);
    const auto map = traversability::load_travmap(travmap);

    planner::PlannerConfig pc = ep.plan;
    pc.mode = ep.planner.mode;
    pc.baseline = ep.planner.baseline;
    pc.weight = ep.planner.weight;
    const bool yaw_given = planner.start.empty() ? bool(ctx.settings.world)
                                                 : std::count(planner.start.begin(), planner.start.end(), ',') == 2;
    if (yaw_given) pc.start_heading = ep.start.yaw;
    planner::PlanResult result;
    try {
      result = planner::plan(ep.start.position(), ep.goal, pc, map, seed);
    } catch (const ParameterError& e) {
      ctx.error() << "planning failed: " << e.what() << '\n';
      return kExitFailure;
    }
    auto& os = ctx.info();
    for (const auto& c : result.history)
      os << "iteration " << c.iteration << " best cost " << (std::isfinite(c.best_cost) ? fixed(c.best_cost, 4) : "-")
         << '\n';
    if (!result.success) {
      ctx.error() << "planning failed: no path to the goal after " << pc.iterations << " iterations\n";
      return kExitFailure;
    }
    std::ostringstream body;
    planner::write_path(body, result.path, pc, seed);
    const auto path = ctx.output(out);
    write_file(path, body.str(), ctx.provenance(seed, &ctx.settings));
    write_overlay(ctx.output(ppm), map, result.path.waypoints, {}, ep.start.position(), ep.goal);
    os << "planner " << ep.planner.name() << " cost " << fixed(result.path.cost, 4) << " s, "
       << result.path.waypoints.size() << " waypoints, tree " << result.tree_size << " nodes\n"
       << "wrote " << path.string() << '\n';
    return kExitOk;
  }
};

struct Simulate {
  WorldOptions world;
  PlannerOptions planner;
  std::string out = "trajectory.csv";
  std::string ppm = "trajectory.ppm";

  void add(CLI::App& app, std::function<int()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("simulate", "Run one closed-loop episode");
    world.add(cmd, true);
    planner.add(cmd);
    cmd->add_option("-o,--out", out, "Trajectory file")->capture_default_str();
    cmd->add_option("--ppm", ppm, "Overlay image")->capture_default_str();
    cmd->callback([&] { action = [&] { return execute(ctx); }; });
  }

  int execute(Context& ctx) {
    auto& s = ctx.settings;
    world.apply_risk(s);
    const auto loaded = load_world(world, s, 0, false);
    auto& ep = s.episode;
    if (loaded.builtin && (!s.world || s.world->name != loaded.builtin->name)) {
      ep.start = loaded.builtin->start;
      ep.goal = loaded.builtin->goal;
    }
    if (!loaded.builtin && planner.start.empty() && !s.episode.start.x && !s.episode.start.y)
      throw UsageError("simulate: a terrain file needs --start and --goal (or [world] start/goal)");
    planner.apply(ep);
    ep.seed = ctx.globals.seed.value_or(ep.seed);
    ep.validate();
    s.world = loaded.builtin;
    if (loaded.builtin) {
      s.world->start = ep.start;
      s.world->goal = ep.goal;
    }

    const auto map = travmap_for(world, loaded.elevation, s);
    const auto result = sim::run_episode(loaded.elevation, map, ep);

    std::ostringstream body;
    sim::write_trajectory(body, result, ep);
    const auto path = ctx.output(out);
    write_file(path, body.str(), ctx.provenance(ep.seed, &s));
    std::vector<Vec2> walked{ep.start.position()};
    for (const auto& st : result.trajectory) walked.push_back(st.state.position());
    write_overlay(ctx.output(ppm), map, result.path.waypoints, walked, ep.start.position(), ep.goal);

    auto& os = ctx.info();
    if (!result.success) ctx.error() << "episode failed: " << result.reason << '\n';
    os << "world " << loaded.name << ", planner " << ep.planner.name() << ", seed " << ep.seed << '\n'
       << (result.success ? "success" : "failure: " + result.reason) << " after " << result.steps << " steps ("
       << fixed(result.navigation_time, 1) << " s)\n"
       << "instability mean " << fixed(result.mean_instability, 3) << " max " << fixed(result.max_instability, 3)
       << '\n'
       << "wrote " << path.string() << '\n';
    return result.success ? kExitOk : kExitFailure;
  }
};

struct Benchmark {
  std::string worlds;
  std::string planners;
  int trials = 0;
  CLI::Option* trials_opt = nullptr;
  std::string model;
  double delta_limit = 0.0, alpha = 0.0;
  CLI::Option* delta_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;
  unsigned threads = 0;
  CLI::Option* threads_opt = nullptr;
  std::string out = "report.csv";
  std::string table = "report.txt";
  bool trajectories = false;

  void add(CLI::App& app, std::function<int()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("benchmark", "Compare planners over seeded trials");
    cmd->add_option("--worlds", worlds, "Comma-separated built-in worlds (default: two-corridor)");
    cmd->add_option("--planners", planners, "Comma-separated planners (default: STATE and all six baselines)");
    trials_opt = cmd->add_option("--trials", trials, "Trials per (world, planner) cell")->check(CLI::PositiveNumber);
    cmd->add_option("--model", model, "Instability model file; default: ground-truth oracle");
    delta_opt = cmd->add_option("--delta-limit", delta_limit, "Instability threshold");
    alpha_opt = cmd->add_option("--alpha", alpha, "VaR confidence level");
    threads_opt = cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
    cmd->add_option("-o,--out", out, "Report CSV")->capture_default_str();
    cmd->add_option("--table", table, "Report table")->capture_default_str();
    cmd->add_flag("--trajectories", trajectories, "Also dump every trial's trajectory");
    cmd->callback([&] { action = [&] { return execute(ctx); }; });
  }

  int execute(Context& ctx) {
    auto& s = ctx.settings;
    if (delta_opt->count()) s.risk.delta_limit = delta_limit;
    if (alpha_opt->count()) s.risk.alpha = alpha;
    s.risk.validate();
    auto& b = s.benchmark;
    if (!worlds.empty()) {
      b.worlds.clear();
      for (const auto& w : split_list(worlds)) b.worlds.push_back(sim::builtin_world(w));
    }
    if (b.worlds.empty()) b.worlds = {sim::builtin_world("two-corridor")};
    if (!planners.empty()) {
      b.planners.clear();
      for (const auto& p : split_list(planners)) b.planners.push_back(sim::PlannerSpec::parse(p));
    }
    if (b.planners.empty()) throw UsageError("--planners: empty list");
    if (trials_opt->count()) b.trials = trials;
    if (threads_opt->count()) b.threads = threads;
    b.seed = ctx.globals.seed.value_or(b.seed);
    b.risk = s.risk;
    b.episode = s.episode;

    const auto predictor = load_predictor(!model.empty() ? std::optional<std::string>(model) : s.model_file);
    const auto report = sim::run_benchmark(b, *predictor);

    std::ostringstream csv;
    sim::write_report_csv(csv, report, b);
    const auto path = ctx.output(out);
    write_file(path, csv.str(), ctx.provenance(b.seed, &s));
    std::ostringstream text;
    sim::write_report_table(text, report);
    write_file(ctx.output(table), text.str());
    if (trajectories) {
      std::size_t cell = 0;
      for (const auto& w : b.worlds)
        for (const auto& p : b.planners) {
          for (int t = 0; t < b.trials; ++t) {
            sim::EpisodeConfig ec = b.episode;
            ec.start = w.start;
            ec.goal = w.goal;
            ec.planner = p;
            ec.seed = sim::trial_seed(b.seed, t);
            std::ostringstream traj;
            sim::write_trajectory(traj, report.episodes[cell][std::size_t(t)], ec);
            std::string name = w.name + "_" + p.name() + "_" + std::to_string(t) + ".csv";
            std::replace_if(name.begin(), name.end(), [](char c) { return c == '(' || c == ')'; }, '_');
            write_file(ctx.output("trajectories/" + name), traj.str());
          }
          ++cell;
        }
    }
    ctx.info() << text.str() << "wrote " << path.string() << '\n';
    return kExitOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stability-aware traversability estimation and bipedal navigation", "stanav"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  Globals globals;
  app.add_option("--seed", globals.seed, "Random seed")->check(CLI::NonNegativeNumber);
  app.add_option("--config", globals.config_path, "Config file ([section] key = value); flags win");
  app.add_option("--out-dir", globals.out_dir, "Directory for relative output paths")->capture_default_str();
  app.add_flag("-q,--quiet", globals.quiet, "Only report errors");

  std::vector<std::string> args(argv, argv + argc);
  args[0] = "stanav";
  Context ctx(globals, args, out, err);
  std::function<int()> action;
  GenTerrain gen_terrain;
  MakeDataset make_dataset;
  Train train;
  AnalyzeFeatures analyze;
  Travmap travmap;
  Plan plan;
  Simulate simulate;
  Benchmark benchmark;
  gen_terrain.add(app, action, ctx);
  make_dataset.add(app, action, ctx);
  train.add(app, action, ctx);
  analyze.add(app, action, ctx);
  travmap.add(app, action, ctx);
  plan.add(app, action, ctx);
  simulate.add(app, action, ctx);
  benchmark.add(app, action, ctx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    ctx.globals = globals;
    if (!globals.config_path.empty())
      ctx.settings = sim::settings_from_config(sim::ConfigFile::load(globals.config_path));
    return action ? action() : kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "invalid parameter: " << e.what() << '\n';
    return kExitUsage;
  } catch (const stanav::ParseError& e) {
    err << "malformed input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace stanav::cli
