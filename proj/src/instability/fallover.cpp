#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "stanav/instability.hpp"

namespace stanav::instability {

// ─── Gait cycles ───────────────────────────────────────────────────────────

std::vector<GaitCycleRecord> parse_gait_cycles(const GaitLog& log, int horizon) {
  if (horizon < 0) throw ParameterError("gait cycles: horizon must be >= 0");
  if (log.time.size() != log.signals.size()) throw ParseError("gait log: time and signal rows differ in count");
  for (std::size_t k = 1; k < log.markers.size(); ++k)
    if (!(log.markers[k] > log.markers[k - 1])) throw ParseError("gait log: cycle markers out of order");
  for (const auto& row : log.signals)
    if (row.size() != log.feature_names.size()) throw ParseError("gait log: signal row width mismatch");
  if (log.markers.size() < 2) return {};

  const std::size_t cycles = log.markers.size() - 1;
  const std::size_t nf = log.feature_names.size();
  std::vector<std::vector<double>> sum_sq(cycles, std::vector<double>(nf, 0.0));
  std::vector<std::size_t> count(cycles, 0);
  for (std::size_t s = 0; s < log.time.size(); ++s) {
    const double t = log.time[s];
    if (t < log.markers.front() || t >= log.markers.back()) continue;
    const std::size_t c = std::size_t(std::upper_bound(log.markers.begin(), log.markers.end(), t) - log.markers.begin()) - 1;
    ++count[c];
    for (std::size_t f = 0; f < nf; ++f) sum_sq[c][f] += log.signals[s][f] * log.signals[s][f];
  }

  std::vector<GaitCycleRecord> records(cycles);
  for (std::size_t c = 0; c < cycles; ++c) {
    if (count[c] == 0) throw ParseError("gait log: cycle " + std::to_string(c) + " has no samples");
    for (std::size_t f = 0; f < nf; ++f)
      records[c].features[log.feature_names[f]] = std::sqrt(sum_sq[c][f] / double(count[c]));
  }
  for (double fall : log.falls) {
    if (fall < log.markers.front()) continue;
    // Index of the cycle containing the fall; `cycles` means the trailing
    // partial cycle after the last marker.
    const std::size_t j = std::size_t(std::upper_bound(log.markers.begin(), log.markers.end(), fall) - log.markers.begin()) - 1;
    const std::size_t first = j >= std::size_t(horizon) ? j - std::size_t(horizon) : 0;
    for (std::size_t c = first; c <= j && c < cycles; ++c) records[c].fallover = true;
  }
  return records;
}

GaitLog read_gait_log(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("gait log: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
  }
  if (header.size() < 3 || header[0] != "time" || header[1] != "marker" || header[2] != "fall")
    throw ParseError("gait log: header must start with time,marker,fall");
  GaitLog log;
  log.feature_names.assign(header.begin() + 3, header.end());
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::vector<double> cells;
    for (std::string cell; std::getline(ss, cell, ',');) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || !std::isfinite(v))
        throw ParseError("gait log: bad value '" + cell + "' on line " + std::to_string(line_no));
      cells.push_back(v);
    }
    if (cells.size() != header.size()) throw ParseError("gait log: wrong column count on line " + std::to_string(line_no));
    log.time.push_back(cells[0]);
    if (cells[1] != 0.0) log.markers.push_back(cells[0]);
    if (cells[2] != 0.0) log.falls.push_back(cells[0]);
    log.signals.emplace_back(cells.begin() + 3, cells.end());
  }
  return log;
}

void write_gait_log(std::ostream& os, const GaitLog& log) {
  os << "time,marker,fall";
  for (const auto& n : log.feature_names) os << ',' << n;
  os << '\n';
  char buf[40];
  for (std::size_t s = 0; s < log.time.size(); ++s) {
    const double t = log.time[s];
    const bool marker = std::find(log.markers.begin(), log.markers.end(), t) != log.markers.end();
    const bool fall = std::find(log.falls.begin(), log.falls.end(), t) != log.falls.end();
    std::snprintf(buf, sizeof buf, "%.17g", t);
    os << buf << ',' << (marker ? 1 : 0) << ',' << (fall ? 1 : 0);
    for (double v : log.signals[s]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

// ─── Logistic regression ───────────────────────────────────────────────────

namespace {

constexpr double kRidge = 1e-6;

void check_labels(std::span<const double> xs, std::span<const int> ys) {
  if (xs.size() != ys.size()) throw ParameterError("logistic: feature and label counts differ");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) throw ParameterError("logistic: non-finite feature value");
    if (ys[i] != 0 && ys[i] != 1) throw ParameterError("logistic: labels must be 0 or 1");
    pos += std::size_t(ys[i]);
  }
  if (pos == 0 || pos == xs.size()) throw DegenerateDataError("logistic: labels contain a single class");
}

/// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double log_likelihood(std::span<const double> xs, std::span<const int> ys, double b0, double b1) {
  double ll = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = b0 + b1 * xs[i];
    ll += ys[i] ? -softplus(-z) : -softplus(z);
  }
  return ll;
}

}  // namespace

double auc_roc(std::span<const double> xs, std::span<const int> ys) {
  check_labels(xs, ys);
  // Mann-Whitney U with mid-ranks for ties.
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && xs[idx[j]] == xs[idx[i]]) ++j;
    const double mid_rank = 0.5 * double(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (ys[idx[k]]) {
        rank_sum += mid_rank;
        ++pos;
      }
    i = j;
  }
  const double neg = double(xs.size() - pos);
  const double u = rank_sum - double(pos) * double(pos + 1) / 2.0;
  return u / (double(pos) * neg);
}

LogisticFit fit_logistic(std::span<const double> xs, std::span<const int> ys) {
  check_labels(xs, ys);
  const double n = double(xs.size());
  const double p_hat = double(std::accumulate(ys.begin(), ys.end(), 0)) / n;

  LogisticFit fit;
  double b0 = std::log(p_hat / (1.0 - p_hat)), b1 = 0.0;
  auto objective = [&](double a, double b) { return log_likelihood(xs, ys, a, b) - 0.5 * kRidge * (a * a + b * b); };
  double obj = objective(b0, b1);

  constexpr int kMaxIter = 500;
  for (int it = 0; it < kMaxIter; ++it) {
    double g0 = -kRidge * b0, g1 = -kRidge * b1;
    double h00 = kRidge, h01 = 0.0, h11 = kRidge;  // negated Hessian
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double z = b0 + b1 * xs[i];
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double r = double(ys[i]) - p;
      const double w = p * (1.0 - p);
      g0 += r;
      g1 += r * xs[i];
      h00 += w;
      h01 += w * xs[i];
      h11 += w * xs[i] * xs[i];
    }
    fit.iterations = it;
    if (std::hypot(g0, g1) <= 1e-8) {
      fit.converged = true;
      break;
    }
    const double det = h00 * h11 - h01 * h01;
    double d0 = (h11 * g0 - h01 * g1) / det;
    double d1 = (h00 * g1 - h01 * g0) / det;
    if (!std::isfinite(d0) || !std::isfinite(d1)) {
      d0 = g0;
      d1 = g1;
    }
    // Backtracking keeps the ascent monotone on separable data.
    double step = 1.0;
    double next = objective(b0 + d0, b1 + d1);
    while (!(next >= obj) && step > 1e-12) {
      step *= 0.5;
      next = objective(b0 + step * d0, b1 + step * d1);
    }
    if (!(next >= obj)) break;
    const bool stalled = next == obj;
    b0 += step * d0;
    b1 += step * d1;
    obj = next;
    if (stalled) {
      // Objective no longer changes in double precision.
      fit.converged = true;
      break;
    }
  }

  fit.intercept = b0;
  fit.slope = b1;
  fit.log_likelihood = log_likelihood(xs, ys, b0, b1);
  fit.null_log_likelihood = n * (p_hat * std::log(p_hat) + (1.0 - p_hat) * std::log(1.0 - p_hat));
  fit.mcfadden_r2 = std::clamp(1.0 - fit.log_likelihood / fit.null_log_likelihood, 0.0, std::nextafter(1.0, 0.0));
  fit.auc = auc_roc(xs, ys);
  return fit;
}

std::vector<FeatureReport> analyze_features(const std::vector<GaitCycleRecord>& records) {
  if (records.empty()) throw DegenerateDataError("feature analysis: no gait cycles");
  std::vector<int> ys;
  ys.reserve(records.size());
  for (const auto& r : records) ys.push_back(r.fallover ? 1 : 0);
  std::vector<FeatureReport> out;
  for (const auto& [name, _] : records.front().features) {
    std::vector<double> xs;
    xs.reserve(records.size());
    for (const auto& r : records) xs.push_back(r.features.at(name));
    out.push_back({name, fit_logistic(xs, ys)});
  }
  std::stable_sort(out.begin(), out.end(), [](const FeatureReport& a, const FeatureReport& b) { return a.fit.auc > b.fit.auc; });
  return out;
}

}  // namespace stanav::instability
