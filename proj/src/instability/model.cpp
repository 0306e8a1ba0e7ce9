#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "stanav/instability.hpp"

namespace stanav::instability {

namespace {

constexpr int kMaxWidth = 4096;

void check_widths(const std::vector<int>& widths) {
  if (widths.size() < 2) throw ModelError("model: need at least input and output widths");
  if (widths.front() != InstabilityModel::kInputs)
    throw ModelError("model: input width must be " + std::to_string(InstabilityModel::kInputs));
  if (widths.back() != 1) throw ModelError("model: output width must be 1");
  for (int w : widths)
    if (w < 1 || w > kMaxWidth) throw ModelError("model: layer width out of range");
}

}  // namespace

std::size_t InstabilityModel::parameter_count(const std::vector<int>& widths, bool sigma_head) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += std::size_t(widths[l + 1]) * std::size_t(widths[l] + 1);
  if (sigma_head && widths.size() >= 2) n += std::size_t(widths[widths.size() - 2]) + 1;
  return n;
}

InstabilityModel InstabilityModel::zeros(std::vector<int> widths) {
  check_widths(widths);
  InstabilityModel m;
  m.widths_ = std::move(widths);
  m.params_.assign(parameter_count(m.widths_, false), 0.0);
  return m;
}

InstabilityModel InstabilityModel::initialized(std::uint64_t seed, std::vector<int> widths) {
  InstabilityModel m = zeros(std::move(widths));
  std::mt19937_64 rng(seed);
  std::size_t offset = 0;
  // Hidden layers only; the output layer stays zero so a fresh model
  // predicts mean 0.
  for (std::size_t l = 0; l + 1 < m.widths_.size(); ++l) {
    const int in = m.widths_[l], out = m.widths_[l + 1];
    const bool output_layer = l + 2 == m.widths_.size();
    const double limit = std::sqrt(6.0 / double(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (int k = 0; k < in * out; ++k) m.params_[offset + std::size_t(k)] = output_layer ? 0.0 : u(rng);
    offset += std::size_t(in * out + out);
  }
  return m;
}

InstabilityModel InstabilityModel::from_parameters(std::vector<int> widths, bool sigma_head,
                                                   std::vector<double> params) {
  check_widths(widths);
  if (params.size() != parameter_count(widths, sigma_head))
    throw ModelError("model: expected " + std::to_string(parameter_count(widths, sigma_head)) + " parameters, got " +
                     std::to_string(params.size()));
  InstabilityModel m;
  m.widths_ = std::move(widths);
  m.sigma_head_ = sigma_head;
  m.params_ = std::move(params);
  return m;
}

void InstabilityModel::set_default_sigma(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("model: default sigma must be > 0");
  default_sigma_ = s;
}

void InstabilityModel::enable_sigma_head() {
  if (sigma_head_) return;
  params_.resize(parameter_count(widths_, true), 0.0);
  sigma_head_ = true;
}

void InstabilityModel::check() const {
  if (widths_.size() < 2 || params_.size() != parameter_count(widths_, sigma_head_))
    throw ModelError("model: architecture/parameter mismatch");
}

std::array<double, InstabilityModel::kInputs> InstabilityModel::make_input(const PatchFeatures& f, Command cmd) {
  // Fixed scales bring each input to roughly unit range on walkable terrain.
  return {2.0 * f.sagittal_slope, 2.0 * f.lateral_slope, 10.0 * f.height_std, 2.0 * f.height_range,
          0.5 * f.max_gradient,   2.0 * cmd.v,            cmd.w / 0.75};
}

InstabilityModel::Output InstabilityModel::forward(const std::array<double, kInputs>& input) const {
  return forward_backward(input, 0.0, 0.0, {});
}

InstabilityModel::Output InstabilityModel::forward_backward(const std::array<double, kInputs>& input, double d_mean,
                                                            double d_log_sigma, std::span<double> grad) const {
  check();
  const std::size_t layers = widths_.size() - 1;  // including the mean head
  // activations[l] is the input to layer l.
  std::vector<std::vector<double>> act(layers);
  act[0].assign(input.begin(), input.end());
  std::vector<std::size_t> offsets(layers);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = offset;
    offset += std::size_t(widths_[l + 1]) * std::size_t(widths_[l] + 1);
  }
  const std::size_t sigma_offset = offset;

  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const int in = widths_[l], out = widths_[l + 1];
    const double* W = params_.data() + offsets[l];
    const double* b = W + std::size_t(in * out);
    act[l + 1].resize(std::size_t(out));
    for (int o = 0; o < out; ++o) {
      double z = b[o];
      for (int i = 0; i < in; ++i) z += W[o * in + i] * act[l][std::size_t(i)];
      act[l + 1][std::size_t(o)] = std::tanh(z);
    }
  }
  const std::vector<double>& last = act[layers - 1];
  const int h = widths_[layers - 1];
  Output out;
  {
    const double* W = params_.data() + offsets[layers - 1];
    out.mean = W[h];
    for (int i = 0; i < h; ++i) out.mean += W[i] * last[std::size_t(i)];
  }
  if (sigma_head_) {
    const double* W = params_.data() + sigma_offset;
    out.log_sigma = W[h];
    for (int i = 0; i < h; ++i) out.log_sigma += W[i] * last[std::size_t(i)];
  }
  if (grad.empty()) return out;
  if (grad.size() != params_.size()) throw ModelError("model: gradient buffer size mismatch");

  // Back-propagate: delta holds d(loss)/d(activation of the current input).
  std::vector<double> delta(std::size_t(h), 0.0);
  {
    double* g = grad.data() + offsets[layers - 1];
    const double* W = params_.data() + offsets[layers - 1];
    for (int i = 0; i < h; ++i) {
      g[i] += d_mean * last[std::size_t(i)];
      delta[std::size_t(i)] += d_mean * W[i];
    }
    g[h] += d_mean;
  }
  if (sigma_head_) {
    double* g = grad.data() + sigma_offset;
    const double* W = params_.data() + sigma_offset;
    for (int i = 0; i < h; ++i) {
      g[i] += d_log_sigma * last[std::size_t(i)];
      delta[std::size_t(i)] += d_log_sigma * W[i];
    }
    g[h] += d_log_sigma;
  }
  for (std::size_t l = layers - 1; l-- > 0;) {
    const int in = widths_[l], outw = widths_[l + 1];
    const double* W = params_.data() + offsets[l];
    double* gW = grad.data() + offsets[l];
    double* gb = gW + std::size_t(in * outw);
    std::vector<double> prev(std::size_t(in), 0.0);
    for (int o = 0; o < outw; ++o) {
      const double a = act[l + 1][std::size_t(o)];
      const double dz = delta[std::size_t(o)] * (1.0 - a * a);
      gb[o] += dz;
      for (int i = 0; i < in; ++i) {
        gW[o * in + i] += dz * act[l][std::size_t(i)];
        prev[std::size_t(i)] += dz * W[o * in + i];
      }
    }
    delta = std::move(prev);
  }
  return out;
}

InstabilityEstimate InstabilityModel::predict(const PatchFeatures& features, Command cmd) const {
  const Output o = forward(make_input(features, cmd));
  return {o.mean, sigma_head_ ? std::exp(o.log_sigma) : default_sigma_};
}

// ─── Model file ────────────────────────────────────────────────────────────

void write_model(std::ostream& os, const InstabilityModel& model) {
  os << "INSTAB v1 ";
  for (std::size_t i = 0; i < model.widths().size(); ++i) os << (i ? "," : "") << model.widths()[i];
  os << ' ' << (model.sigma_head() ? 1 : 0) << '\n';
  char buf[32];
  for (double p : model.parameters()) {
    std::snprintf(buf, sizeof buf, "%.17g\n", p);
    os << buf;
  }
}

InstabilityModel read_model(std::istream& is) {
  std::string magic, version, widths_tok;
  int sigma = -1;
  if (!(is >> magic >> version) || magic != "INSTAB" || version != "v1")
    throw ParseError("model file: expected header 'INSTAB v1'");
  if (!(is >> widths_tok >> sigma) || (sigma != 0 && sigma != 1)) throw ParseError("model file: malformed header");
  std::vector<int> widths;
  std::stringstream ws(widths_tok);
  for (std::string item; std::getline(ws, item, ',');) {
    try {
      widths.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ParseError("model file: bad layer width '" + item + "'");
    }
  }
  skip_comment_lines(is);
  is.clear(is.rdstate() & ~std::ios::failbit);
  std::vector<double> params;
  for (std::string tok; is >> tok;) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0' || !std::isfinite(v)) throw ParseError("model file: bad parameter '" + tok + "'");
    params.push_back(v);
  }
  return InstabilityModel::from_parameters(std::move(widths), sigma == 1, std::move(params));
}

void save_model(const std::string& path, const InstabilityModel& model) {
  std::ofstream os(path);
  if (!os) throw ParameterError("cannot open '" + path + "' for writing");
  write_model(os, model);
}

InstabilityModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open model file '" + path + "'");
  return read_model(is);
}

}  // namespace stanav::instability
