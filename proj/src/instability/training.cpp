#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "stanav/instability.hpp"

namespace stanav::instability {

double gaussian_nll(double mean, double log_sigma, double target) {
  const double r = mean - target;
  return r * r / (2.0 * std::exp(2.0 * log_sigma)) + log_sigma;
}

double gaussian_nll(std::span<const double> means, std::span<const double> log_sigmas,
                    std::span<const double> targets) {
  if (means.size() != log_sigmas.size() || means.size() != targets.size())
    throw ParameterError("gaussian_nll: size mismatch");
  if (means.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) sum += gaussian_nll(means[i], log_sigmas[i], targets[i]);
  return sum / double(means.size());
}

LossGradient loss_and_gradient(const InstabilityModel& model, std::span<const Sample> samples, Loss loss) {
  LossGradient out;
  out.gradient.assign(model.parameters().size(), 0.0);
  if (samples.empty()) return out;
  const double inv_n = 1.0 / double(samples.size());
  for (const Sample& s : samples) {
    const auto input = InstabilityModel::make_input(s.features, s.cmd);
    // Two passes: outputs first, then gradients scaled by the loss derivative.
    const auto o = model.forward(input);
    const double r = o.mean - s.delta;
    double d_mean = 0.0, d_log_sigma = 0.0;
    if (loss == Loss::mse) {
      out.loss += r * r * inv_n;
      d_mean = 2.0 * r * inv_n;
    } else {
      const double inv_var = std::exp(-2.0 * o.log_sigma);
      out.loss += gaussian_nll(o.mean, o.log_sigma, s.delta) * inv_n;
      d_mean = r * inv_var * inv_n;
      d_log_sigma = (1.0 - r * r * inv_var) * inv_n;
    }
    model.forward_backward(input, d_mean, d_log_sigma, out.gradient);
  }
  return out;
}

double dataset_loss(const InstabilityModel& model, std::span<const Sample> samples, Loss loss) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const Sample& s : samples) {
    const auto o = model.forward(InstabilityModel::make_input(s.features, s.cmd));
    sum += loss == Loss::mse ? (o.mean - s.delta) * (o.mean - s.delta) : gaussian_nll(o.mean, o.log_sigma, s.delta);
  }
  return sum / double(samples.size());
}

double rmse(const InstabilityModel& model, std::span<const Sample> samples) {
  return std::sqrt(dataset_loss(model, samples, Loss::mse));
}

double picp(const InstabilityPredictor& model, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t inside = 0;
  for (const Sample& s : samples) {
    const auto est = model.predict(s.features, s.cmd);
    if (std::abs(s.delta - est.mean) <= est.sigma) ++inside;
  }
  return double(inside) / double(samples.size());
}

namespace {

TrainReport run_gradient_descent(InstabilityModel& model, const Dataset& data, const TrainConfig& cfg, Loss loss) {
  if (data.empty()) throw TrainingError("training: empty dataset");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0))
    throw ParameterError("training: epochs >= 0, batch size >= 1 and learning rate > 0 required");

  TrainReport report;
  report.initial_loss = dataset_loss(model, data, loss);
  if (!std::isfinite(report.initial_loss)) throw TrainingError("training: non-finite loss before step 0");

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> batch;
  batch.reserve(std::size_t(cfg.batch_size));
  std::size_t step = 0;
  auto params = model.parameters();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + std::size_t(cfg.batch_size));
      batch.clear();
      for (std::size_t k = begin; k < end; ++k) batch.push_back(data[order[k]]);
      const LossGradient lg = loss_and_gradient(model, batch, loss);
      bool finite = std::isfinite(lg.loss);
      for (double g : lg.gradient) finite = finite && std::isfinite(g);
      if (!finite) throw TrainingError("training: loss diverged at step " + std::to_string(step));
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * lg.gradient[i];
      ++step;
    }
    const double l = dataset_loss(model, data, loss);
    if (!std::isfinite(l)) throw TrainingError("training: loss diverged at step " + std::to_string(step));
    report.epoch_loss.push_back(l);
  }
  return report;
}

}  // namespace

TrainReport train_phase1(InstabilityModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (model.sigma_head()) throw ModelError("phase 1 expects a model without the sigma head");
  return run_gradient_descent(model, data, cfg, Loss::mse);
}

TrainReport train_phase2(InstabilityModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw TrainingError("training: empty dataset");
  model.enable_sigma_head();
  return run_gradient_descent(model, data, cfg, Loss::gaussian_nll);
}

// ─── Dataset CSV ───────────────────────────────────────────────────────────

void write_dataset(std::ostream& os, const Dataset& data) {
  os << "s_sag,s_lat,sigma_h,range,g_max,v,w,delta\n";
  char buf[512];
  for (const Sample& s : data) {
    const auto f = s.features.to_array();
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", f[0], f[1], f[2], f[3], f[4],
                  s.cmd.v, s.cmd.w, s.delta);
    os << buf;
  }
}

Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("dataset: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "s_sag,s_lat,sigma_h,range,g_max,v,w,delta") throw ParseError("dataset: unexpected header '" + line + "'");
  Dataset data;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    std::array<double, 8> v{};
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= v.size()) throw ParseError("dataset: too many columns on line " + std::to_string(line_no));
      char* end = nullptr;
      v[k] = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || !std::isfinite(v[k]))
        throw ParseError("dataset: bad value '" + cell + "' on line " + std::to_string(line_no));
      ++k;
    }
    if (k != v.size()) throw ParseError("dataset: expected 8 columns on line " + std::to_string(line_no));
    data.push_back({PatchFeatures{v[0], v[1], v[2], v[3], v[4]}, Command{v[5], v[6]}, v[7]});
  }
  return data;
}

}  // namespace stanav::instability
