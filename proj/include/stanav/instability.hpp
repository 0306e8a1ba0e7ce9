#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stanav/terrain.hpp"

namespace stanav::instability {

using terrain::Patch;
using terrain::PatchFeatures;

/// Walking command: linear velocity v (m/s) and angular velocity w (rad/s).
struct Command {
  static constexpr double kMaxV = 0.5;
  static constexpr double kMaxW = 0.75;

  double v = 0.0;
  double w = 0.0;

  void validate() const;
  friend bool operator==(const Command&, const Command&) = default;
};

struct InstabilityEstimate {
  double mean = 0.0;
  double sigma = 1.0;
};

// ─── Ground-truth oracle ───────────────────────────────────────────────────
//
// Deterministic stand-in for instability recorded in simulation. With
// f = (s_sag, s_lat, sigma_h, range, g_max), slopes taken in absolute value,
// and v, w taken as speeds:
//
//   mu    = 1 + 3 v + 1.2 |w| + (8 s_sag + 6 s_lat + 25 sigma_h) (0.5 + v) + 4 g_max v
//   sigma = 0.2 + 0.5 sigma_h + 0.3 v
//
// A sample is mu + sigma * z with z ~ N(0, 1) drawn from the noise seed.

double oracle_mean(const PatchFeatures& f, Command cmd);
double oracle_sigma(const PatchFeatures& f, Command cmd);
double oracle_instability(const PatchFeatures& f, Command cmd, std::uint64_t noise_seed);
double oracle_instability(const Patch& patch, Command cmd, std::uint64_t noise_seed);

// ─── Predictors ────────────────────────────────────────────────────────────

/// Anything that maps (terrain features, command) to a Gaussian instability
/// estimate. Implementations must be pure and thread-safe.
class InstabilityPredictor {
 public:
  virtual ~InstabilityPredictor() = default;
  virtual InstabilityEstimate predict(const PatchFeatures& features, Command cmd) const = 0;
};

/// Returns the oracle's exact mean and sigma.
class OracleModel final : public InstabilityPredictor {
 public:
  InstabilityEstimate predict(const PatchFeatures& features, Command cmd) const override;
};

/// Small tanh MLP over 5 patch features ++ (v, w). A linear mean head, and
/// after phase-2 training a parallel log-sigma head on the last hidden layer.
class InstabilityModel final : public InstabilityPredictor {
 public:
  static constexpr int kInputs = int(PatchFeatures::kCount) + 2;
  static constexpr double kDefaultSigma = 0.5;

  /// widths = {inputs, hidden..., 1}. All parameters zero.
  static InstabilityModel zeros(std::vector<int> widths = {kInputs, 32, 32, 1});
  /// Xavier-uniform hidden weights, zero biases and zero output head.
  static InstabilityModel initialized(std::uint64_t seed, std::vector<int> widths = {kInputs, 32, 32, 1});
  /// Builds a model from an explicit parameter vector; throws ModelError on
  /// a size mismatch.
  static InstabilityModel from_parameters(std::vector<int> widths, bool sigma_head, std::vector<double> params);

  const std::vector<int>& widths() const { return widths_; }
  bool sigma_head() const { return sigma_head_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  double default_sigma() const { return default_sigma_; }
  void set_default_sigma(double s);

  /// Parameter count implied by widths and the sigma-head flag.
  static std::size_t parameter_count(const std::vector<int>& widths, bool sigma_head);

  /// Appends a zero-initialized log-sigma head. No-op if already present.
  void enable_sigma_head();

  InstabilityEstimate predict(const PatchFeatures& features, Command cmd) const override;

  struct Output {
    double mean = 0.0;
    double log_sigma = 0.0;
  };
  Output forward(const std::array<double, kInputs>& input) const;

  /// Accumulates d(loss)/d(params) for one sample given the loss derivatives
  /// with respect to the outputs.
  Output forward_backward(const std::array<double, kInputs>& input, double d_mean, double d_log_sigma,
                          std::span<double> grad) const;

  static std::array<double, kInputs> make_input(const PatchFeatures& features, Command cmd);

 private:
  void check() const;

  std::vector<int> widths_;
  bool sigma_head_ = false;
  double default_sigma_ = kDefaultSigma;
  std::vector<double> params_;
};

/// Model file: header `INSTAB v1 <w0,w1,...,wL> <0|1>` then one parameter per
/// line in %.17g. Order: for each layer, weights row-major [out][in] then
/// biases; then the mean head (weights, bias); then the log-sigma head
/// (weights, bias) when present.
void write_model(std::ostream& os, const InstabilityModel& model);
InstabilityModel read_model(std::istream& is);
void save_model(const std::string& path, const InstabilityModel& model);
InstabilityModel load_model(const std::string& path);

InstabilityEstimate predict(const InstabilityPredictor& model, const Patch& patch, Command cmd);

// ─── Losses and training ───────────────────────────────────────────────────

/// Per-sample Gaussian NLL, log-sigma parameterized:
/// (mean - target)^2 / (2 exp(2 log_sigma)) + log_sigma.
double gaussian_nll(double mean, double log_sigma, double target);
/// Batch loss: mean of per-sample terms.
double gaussian_nll(std::span<const double> means, std::span<const double> log_sigmas, std::span<const double> targets);

struct Sample {
  PatchFeatures features;
  Command cmd;
  double delta = 0.0;
};
using Dataset = std::vector<Sample>;

enum class Loss { mse, gaussian_nll };

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};
/// Mean loss over the samples and its gradient with respect to all parameters.
LossGradient loss_and_gradient(const InstabilityModel& model, std::span<const Sample> samples, Loss loss);
double dataset_loss(const InstabilityModel& model, std::span<const Sample> samples, Loss loss);
double rmse(const InstabilityModel& model, std::span<const Sample> samples);

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 1e-2;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

inline TrainConfig phase1_defaults() { return {10, 1e-2, 16, 0}; }
inline TrainConfig phase2_defaults() { return {20, 1e-3, 16, 0}; }

struct TrainReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // full-dataset loss after each epoch
  double final_loss() const { return epoch_loss.empty() ? initial_loss : epoch_loss.back(); }
};

/// Minibatch gradient descent on MSE. Requires the sigma head to be absent.
TrainReport train_phase1(InstabilityModel& model, const Dataset& data, const TrainConfig& cfg = phase1_defaults());
/// Appends the log-sigma head (zero-initialized) if needed, then minimizes
/// Gaussian NLL starting from the phase-1 weights.
TrainReport train_phase2(InstabilityModel& model, const Dataset& data, const TrainConfig& cfg = phase2_defaults());

/// Fraction of targets inside mean +/- sigma.
double picp(const InstabilityPredictor& model, std::span<const Sample> samples);

/// CSV with header `s_sag,s_lat,sigma_h,range,g_max,v,w,delta`.
void write_dataset(std::ostream& os, const Dataset& data);
Dataset read_dataset(std::istream& is);

// ─── Fallover feature analysis ─────────────────────────────────────────────

/// Per-timestep signals with step boundaries and fall events.
struct GaitLog {
  std::vector<std::string> feature_names;
  std::vector<double> time;
  std::vector<std::vector<double>> signals;  // signals[sample][feature]
  std::vector<double> markers;               // step boundary times, ascending
  std::vector<double> falls;                 // fall event times
};

struct GaitCycleRecord {
  std::map<std::string, double> features;  // RMS per cycle
  bool fallover = false;
};

/// One record per complete cycle [m_k, m_k+1). A cycle is labeled 1 when a
/// fall happens in it or in the next `horizon` cycles.
std::vector<GaitCycleRecord> parse_gait_cycles(const GaitLog& log, int horizon = 2);

/// CSV: header `time,marker,fall,<feature>...`; marker/fall are 0/1 flags
/// marking a step boundary / fall at that row's time.
GaitLog read_gait_log(std::istream& is);
void write_gait_log(std::ostream& os, const GaitLog& log);

struct LogisticFit {
  double intercept = 0.0;
  double slope = 0.0;
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
  double mcfadden_r2 = 0.0;
  double auc = 0.5;
  int iterations = 0;
  bool converged = false;
};

/// Rank-statistic AUC over all positive/negative pairs, ties count 0.5.
double auc_roc(std::span<const double> xs, std::span<const int> ys);

/// Newton's method on the L2-regularized (1e-6) log-likelihood of
/// P(y = 1) = sigmoid(b0 + b1 x). Throws DegenerateDataError for one class.
LogisticFit fit_logistic(std::span<const double> xs, std::span<const int> ys);

struct FeatureReport {
  std::string name;
  LogisticFit fit;
};
/// Fits every feature independently; sorted by AUC, descending.
std::vector<FeatureReport> analyze_features(const std::vector<GaitCycleRecord>& records);

}  // namespace stanav::instability

namespace stanav::instability {

/// Draws `samples` oracle-labeled rows: a uniformly chosen map, a uniform
/// pose whose patch fits inside it, and a command that is (v, 0), (0, w) or
/// (v, w) with equal probability, v ~ U[0, 0.5], w ~ U[0, 0.75]. Row k uses
/// oracle noise seed mix_seed(seed, 2k + 1).
Dataset sample_oracle_dataset(std::span<const terrain::ElevationMap> maps, std::size_t samples, std::uint64_t seed);

/// Training terrains: flat, slopes, steps and rough patches over a range
/// of parameters, each `size` metres square.
std::vector<terrain::TerrainSpec> training_terrains(std::uint64_t seed, double size = 4.0);

}  // namespace stanav::instability
