#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "stanav/instability.hpp"
#include "support/gait_fixture.hpp"

using namespace stanav;
using namespace stanav::instability;
using terrain::Patch;
using terrain::PatchFeatures;

namespace {

PatchFeatures random_features(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> slope(-0.6, 0.6), pos(0.0, 0.2), grad(0.0, 3.0);
  const double sd = pos(rng);
  return {slope(rng), slope(rng), sd, 4.0 * sd, grad(rng)};
}

Command random_command(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> v(0.0, 0.5), w(0.0, 0.75);
  return {v(rng), w(rng)};
}

/// Norm-wise relative difference between analytic and central-difference
/// gradients.
double gradient_check(InstabilityModel model, const Dataset& data, Loss loss) {
  const auto analytic = loss_and_gradient(model, data, loss).gradient;
  std::vector<double> numeric(analytic.size());
  const double h = 1e-5;
  auto p = model.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = dataset_loss(model, data, loss);
    p[i] = keep - h;
    const double down = dataset_loss(model, data, loss);
    p[i] = keep;
    numeric[i] = (up - down) / (2 * h);
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

Dataset constant_dataset(std::size_t n, double target) {
  return Dataset(n, Sample{PatchFeatures{}, Command{}, target});
}

Dataset residual_dataset(std::size_t n, double center, double noise_sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, noise_sd);
  Dataset d(n);
  for (auto& s : d) s.delta = center + normal(rng);
  return d;
}

}  // namespace

// ─── Oracle ─────────────────────────────────────────────────────────────────

TEST(Oracle, FlatTerrainValues) {
  EXPECT_DOUBLE_EQ(oracle_mean(PatchFeatures{}, {0.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(oracle_mean(PatchFeatures{}, {0.5, 0.0}), 2.5);
  EXPECT_DOUBLE_EQ(oracle_sigma(PatchFeatures{}, {0.5, 0.0}), 0.35);
  EXPECT_DOUBLE_EQ(oracle_mean(PatchFeatures{}, {0.0, 0.75}), 1.9);
}

TEST(Oracle, SampledValueIsDeterministicPerSeed) {
  const Patch zero = Patch::zeros();
  const double a = oracle_instability(zero, {0.3, 0.1}, 42);
  EXPECT_EQ(a, oracle_instability(zero, {0.3, 0.1}, 42));
  EXPECT_NE(a, oracle_instability(zero, {0.3, 0.1}, 43));
}

TEST(Oracle, MeanIsMonotone) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const PatchFeatures f = random_features(rng);
    const Command c = random_command(rng);
    Command faster = c;
    faster.v = std::min(0.5, c.v + 0.5 * u(rng));
    EXPECT_GE(oracle_mean(f, faster), oracle_mean(f, c));
    Command turning = c;
    turning.w = std::min(0.75, c.w + 0.5 * u(rng));
    EXPECT_GE(oracle_mean(f, turning), oracle_mean(f, c));
    auto arr = f.to_array();
    for (std::size_t i = 2; i < arr.size(); ++i) {
      auto bigger = arr;
      bigger[i] += u(rng);
      EXPECT_GE(oracle_mean(PatchFeatures::from_array(bigger), c), oracle_mean(f, c));
    }
  }
}

TEST(Command, ValidationRejectsOutOfRange) {
  EXPECT_NO_THROW((Command{0.5, -0.75}.validate()));
  EXPECT_THROW((Command{0.6, 0.0}.validate()), ParameterError);
  EXPECT_THROW((Command{0.0, 0.8}.validate()), ParameterError);
}

// ─── Model ──────────────────────────────────────────────────────────────────

TEST(Model, ZeroInitializedPredictsZeroMeanUnitSigma) {
  InstabilityModel m = InstabilityModel::zeros();
  m.enable_sigma_head();
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    const auto e = m.predict(random_features(rng), random_command(rng));
    EXPECT_EQ(e.mean, 0.0);
    EXPECT_EQ(e.sigma, 1.0);
  }
}

TEST(Model, MissingSigmaHeadUsesDefault) {
  const InstabilityModel m = InstabilityModel::zeros();
  EXPECT_EQ(m.predict(PatchFeatures{}, {}).sigma, 0.5);
}

TEST(Model, ParameterCountMismatchThrows) {
  EXPECT_EQ(InstabilityModel::parameter_count({7, 32, 32, 1}, false), 32u * 8 + 32u * 33 + 33u);
  EXPECT_THROW(InstabilityModel::from_parameters({7, 4, 1}, false, std::vector<double>(3)), ModelError);
  EXPECT_THROW(InstabilityModel::zeros({5, 4, 1}), ModelError);
}

TEST(Model, PredictionIsPure) {
  InstabilityModel m = InstabilityModel::initialized(9);
  m.enable_sigma_head();
  std::mt19937_64 rng(4);
  for (double& p : m.parameters()) p += std::normal_distribution<double>(0.0, 0.1)(rng);
  const PatchFeatures f = random_features(rng);
  const auto a = m.predict(f, {0.2, 0.3});
  const auto b = m.predict(f, {0.2, 0.3});
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_GT(a.sigma, 0.0);
}

TEST(Model, FileRoundTripIsExact) {
  InstabilityModel m = InstabilityModel::initialized(5, {7, 6, 5, 1});
  m.enable_sigma_head();
  std::mt19937_64 rng(4);
  for (double& p : m.parameters()) p = std::normal_distribution<double>(0.0, 1.0)(rng);
  std::stringstream ss;
  write_model(ss, m);
  EXPECT_EQ(ss.str().substr(0, 20), "INSTAB v1 7,6,5,1 1\n");
  const InstabilityModel back = read_model(ss);
  EXPECT_EQ(back.widths(), m.widths());
  EXPECT_TRUE(back.sigma_head());
  ASSERT_EQ(back.parameters().size(), m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) EXPECT_EQ(back.parameters()[i], m.parameters()[i]);

  std::stringstream truncated("INSTAB v1 7,2,1 0\n0.1 0.2\n");
  EXPECT_THROW(read_model(truncated), ModelError);
  std::stringstream bad("INSTAB v2 7,2,1 0\n");
  EXPECT_THROW(read_model(bad), ParseError);
}

// ─── Losses ─────────────────────────────────────────────────────────────────

TEST(GaussianNll, WorkedValues) {
  EXPECT_DOUBLE_EQ(gaussian_nll(2.0, 0.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(gaussian_nll(3.0, 0.0, 2.0), 0.5);
  EXPECT_DOUBLE_EQ(gaussian_nll(2.0, 1.0, 2.0), 1.0);
  const std::vector<double> m{2.0, 3.0}, s{0.0, 0.0}, t{2.0, 2.0};
  EXPECT_DOUBLE_EQ(gaussian_nll(m, s, t), 0.25);
}

TEST(GaussianNll, LogSigmaDerivativeChangesSignAtResidual) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int k = 0; k < 100; ++k) {
    const double r = u(rng);
    const double s_star = std::log(r);  // exp(2 s) = r^2
    auto d = [&](double s) { return (gaussian_nll(r, s + 1e-6, 0.0) - gaussian_nll(r, s - 1e-6, 0.0)) / 2e-6; };
    EXPECT_LT(d(s_star - 0.05), 0.0);
    EXPECT_GT(d(s_star + 0.05), 0.0);
    EXPECT_LE(gaussian_nll(r, s_star, 0.0), gaussian_nll(r, s_star + 0.01, 0.0));
    EXPECT_LE(gaussian_nll(r, s_star, 0.0), gaussian_nll(r, s_star - 0.01, 0.0));
  }
}

TEST(GaussianNll, AnalyticGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    InstabilityModel m = InstabilityModel::initialized(rng(), {7, 8, 6, 1});
    m.enable_sigma_head();
    for (double& p : m.parameters()) p += std::normal_distribution<double>(0.0, 0.3)(rng);
    Dataset data;
    for (int k = 0; k < 6; ++k) data.push_back({random_features(rng), random_command(rng), 2.0 + trial});
    EXPECT_LE(gradient_check(m, data, Loss::gaussian_nll), 1e-4);
    EXPECT_LE(gradient_check(m, data, Loss::mse), 1e-4);
  }
}

// ─── Training ───────────────────────────────────────────────────────────────

TEST(Training, PhaseOneConvergesToConstantTarget) {
  InstabilityModel m = InstabilityModel::initialized(1);
  TrainConfig cfg = phase1_defaults();
  cfg.epochs = 10;
  const auto report = train_phase1(m, constant_dataset(2000, 2.0), cfg);
  EXPECT_NEAR(m.predict(PatchFeatures{}, {}).mean, 2.0, 1e-3);
  double prev = report.initial_loss;
  for (double l : report.epoch_loss) {
    EXPECT_LE(l, prev);
    prev = l;
  }
}

TEST(Training, PhaseTwoRecoversResidualSigma) {
  for (double noise : {1.0, 2.0}) {
    const Dataset data = residual_dataset(2000, 3.0, noise, 17);
    // Closed-form Gaussian MLE on the generated data.
    double mean = 0.0;
    for (const auto& s : data) mean += s.delta;
    mean /= double(data.size());
    double var = 0.0;
    for (const auto& s : data) var += (s.delta - mean) * (s.delta - mean);
    const double mle_sigma = std::sqrt(var / double(data.size()));

    InstabilityModel m = InstabilityModel::initialized(2);
    TrainConfig p1 = phase1_defaults();
    p1.epochs = 20;
    train_phase1(m, data, p1);
    TrainConfig p2 = phase2_defaults();
    p2.epochs = 40;
    const double rmse_p1 = rmse(m, data);
    const auto report = train_phase2(m, data, p2);
    const double sigma = m.predict(PatchFeatures{}, {}).sigma;
    EXPECT_NEAR(sigma, noise, 0.1 * noise);
    EXPECT_NEAR(sigma, mle_sigma, 0.05 * noise);
    EXPECT_LE(report.final_loss(), report.initial_loss);
    EXPECT_LE(rmse(m, data), 1.2 * rmse_p1);
  }
}

TEST(Training, EmptyDatasetIsAnError) {
  InstabilityModel m = InstabilityModel::initialized(1);
  EXPECT_THROW(train_phase1(m, {}), TrainingError);
  EXPECT_THROW(train_phase2(m, {}), TrainingError);
}

TEST(Training, DivergenceReportsStep) {
  InstabilityModel m = InstabilityModel::initialized(1);
  TrainConfig cfg = phase1_defaults();
  cfg.learning_rate = 1e6;
  try {
    cfg.epochs = 200;
    train_phase1(m, constant_dataset(64, 1e3), cfg);
    FAIL() << "expected divergence";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Training, PhaseOneRejectsSigmaHead) {
  InstabilityModel m = InstabilityModel::initialized(1);
  m.enable_sigma_head();
  EXPECT_THROW(train_phase1(m, constant_dataset(8, 1.0)), ModelError);
}

TEST(Training, IsDeterministicForFixedSeed) {
  const Dataset data = residual_dataset(500, 1.0, 0.5, 3);
  InstabilityModel a = InstabilityModel::initialized(4), b = InstabilityModel::initialized(4);
  train_phase1(a, data);
  train_phase1(b, data);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) ASSERT_EQ(a.parameters()[i], b.parameters()[i]);
}

TEST(Training, OracleDataModelMatchesFlatTerrain) {
  std::vector<terrain::ElevationMap> maps;
  for (const auto& spec : training_terrains(1)) maps.push_back(terrain::generate_terrain(spec));
  const Dataset train = sample_oracle_dataset(maps, 20000, 1);
  InstabilityModel m = InstabilityModel::initialized(3);
  train_phase1(m, train);
  EXPECT_NEAR(m.predict(PatchFeatures{}, {0.0, 0.0}).mean, 1.0, 0.2);
}

TEST(Dataset, CsvRoundTrip) {
  std::vector<terrain::ElevationMap> maps{terrain::generate_terrain(terrain::TerrainSpec{})};
  const Dataset data = sample_oracle_dataset(maps, 20, 5);
  std::stringstream ss;
  write_dataset(ss, data);
  const Dataset back = read_dataset(ss);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].delta, data[i].delta);
    EXPECT_EQ(back[i].cmd, data[i].cmd);
  }
  std::stringstream bad("s_sag,s_lat\n1,2\n");
  EXPECT_THROW(read_dataset(bad), ParseError);
}

TEST(Dataset, CommentRowsAreSkipped) {
  std::stringstream ss("s_sag,s_lat,sigma_h,range,g_max,v,w,delta\n# seed = 3\n0,0,0,0,0,0.5,0,2.5\n");
  const Dataset data = read_dataset(ss);
  ASSERT_EQ(data.size(), 1u);
  EXPECT_EQ(data[0].delta, 2.5);
}

TEST(Model, CommentLinesAfterTheHeaderAreSkipped) {
  const auto m = InstabilityModel::initialized(2, {7, 2, 1});
  std::stringstream plain;
  write_model(plain, m);
  std::string text = plain.str();
  text.insert(text.find('\n') + 1, "# seed = 2\n# phases = 1\n");
  std::stringstream commented(text);
  const auto back = read_model(commented);
  ASSERT_EQ(back.parameters().size(), m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) EXPECT_EQ(back.parameters()[i], m.parameters()[i]);
}

TEST(Dataset, FlatRowsMatchOracleFormula) {
  std::vector<terrain::ElevationMap> maps{terrain::generate_terrain(terrain::TerrainSpec{})};
  const Dataset data = sample_oracle_dataset(maps, 3, 11);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Command c = data[k].cmd;
    const double mu = 1.0 + 3.0 * c.v + 1.2 * c.w;
    const double sigma = 0.2 + 0.3 * c.v;
    std::mt19937_64 rng(mix_seed(11, 2 * k + 1));
    const double z = std::normal_distribution<double>(0.0, 1.0)(rng);
    EXPECT_NEAR(data[k].delta, mu + sigma * z, 1e-12);
  }
}

// ─── Gait cycles ────────────────────────────────────────────────────────────

namespace {

GaitLog uniform_log(int cycles, double value, std::vector<double> falls = {}) {
  GaitLog log;
  log.feature_names = {"a"};
  for (int c = 0; c <= cycles; ++c) log.markers.push_back(double(c));
  for (int s = 0; s < cycles * 4; ++s) {
    log.time.push_back(0.25 * s);
    log.signals.push_back({value});
  }
  log.falls = std::move(falls);
  return log;
}

std::vector<int> labels(const std::vector<GaitCycleRecord>& r) {
  std::vector<int> out;
  for (const auto& x : r) out.push_back(x.fallover ? 1 : 0);
  return out;
}

}  // namespace

TEST(GaitCycles, ConstantSignalRmsIsAbsoluteValue) {
  const auto records = parse_gait_cycles(uniform_log(3, -1.7));
  ASSERT_EQ(records.size(), 3u);
  for (const auto& r : records) EXPECT_DOUBLE_EQ(r.features.at("a"), 1.7);
  EXPECT_EQ(labels(records), (std::vector<int>{0, 0, 0}));
}

TEST(GaitCycles, FallLabelsCurrentAndTwoPreceding) {
  EXPECT_EQ(labels(parse_gait_cycles(uniform_log(7, 1.0, {5.5}))), (std::vector<int>{0, 0, 0, 1, 1, 1, 0}));
  // Fewer than two cycles before the fall.
  EXPECT_EQ(labels(parse_gait_cycles(uniform_log(4, 1.0, {1.2}))), (std::vector<int>{1, 1, 0, 0}));
}

TEST(GaitCycles, LabelCountIsMinOfThreeAndAvailableCycles) {
  for (int k = 0; k < 8; ++k) {
    const auto records = parse_gait_cycles(uniform_log(8, 1.0, {k + 0.5}));
    const auto l = labels(records);
    EXPECT_EQ(std::count(l.begin(), l.end(), 1), std::min(3, k + 1));
  }
}

TEST(GaitCycles, MarkersOutOfOrderThrow) {
  GaitLog log = uniform_log(3, 1.0);
  std::swap(log.markers[1], log.markers[2]);
  EXPECT_THROW(parse_gait_cycles(log), ParseError);
}

TEST(GaitCycles, CsvRoundTrip) {
  const GaitLog log = fixtures::synthetic_gait_log(4, 6, 1);
  std::stringstream ss;
  write_gait_log(ss, log);
  const GaitLog back = read_gait_log(ss);
  EXPECT_EQ(back.feature_names, log.feature_names);
  EXPECT_EQ(back.markers, log.markers);
  EXPECT_EQ(back.falls, log.falls);
  EXPECT_EQ(labels(parse_gait_cycles(back)), labels(parse_gait_cycles(log)));
}

// ─── Logistic regression ────────────────────────────────────────────────────

namespace {

/// Exhaustive positive/negative pair count, ties 0.5.
double brute_force_auc(const std::vector<double>& xs, const std::vector<int>& ys) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < xs.size(); ++j)
      if (ys[i] == 1 && ys[j] == 0) {
        pairs += 1.0;
        wins += xs[i] > xs[j] ? 1.0 : xs[i] == xs[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

}  // namespace

TEST(Logistic, SixPointAucMatchesPairCount) {
  const std::vector<double> xs{1, 2, 3, 2, 4, 1};
  const std::vector<int> ys{0, 0, 1, 1, 1, 0};
  const double expected = brute_force_auc(xs, ys);
  EXPECT_DOUBLE_EQ(expected, 8.5 / 9.0);
  EXPECT_DOUBLE_EQ(auc_roc(xs, ys), expected);
  EXPECT_DOUBLE_EQ(fit_logistic(xs, ys).auc, expected);
}

TEST(Logistic, SeparableDataGivesPerfectAuc) {
  std::vector<double> xs;
  std::vector<int> ys;
  for (int k = -20; k <= 20; ++k) {
    if (k == 0) continue;
    xs.push_back(k * 0.1);
    ys.push_back(k > 0 ? 1 : 0);
  }
  const auto fit = fit_logistic(xs, ys);
  EXPECT_DOUBLE_EQ(fit.auc, 1.0);
  EXPECT_GT(fit.slope, 0.0);
  EXPECT_TRUE(std::isfinite(fit.slope));
  EXPECT_LT(fit.mcfadden_r2, 1.0);
}

TEST(Logistic, IndependentLabelsGiveNullFit) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> x(0.0, 1.0);
  std::bernoulli_distribution y(0.3);
  std::vector<double> xs(1000);
  std::vector<int> ys(1000);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = x(rng);
    ys[i] = y(rng) ? 1 : 0;
  }
  const auto fit = fit_logistic(xs, ys);
  EXPECT_TRUE(fit.converged);
  EXPECT_LE(fit.mcfadden_r2, 0.01);
  EXPECT_GE(fit.mcfadden_r2, 0.0);
}

TEST(Logistic, RandomAucMatchesBruteForceAndIsRankInvariant) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> small(0, 6);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> xs(30);
    std::vector<int> ys(30);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xs[i] = small(rng) * 0.5;  // plenty of ties
      ys[i] = coin(rng) ? 1 : 0;
    }
    ys[0] = 0;
    ys[1] = 1;
    const double auc = auc_roc(xs, ys);
    EXPECT_NEAR(auc, brute_force_auc(xs, ys), 1e-12);
    std::vector<double> transformed(xs.size());
    std::transform(xs.begin(), xs.end(), transformed.begin(), [](double v) { return std::exp(3 * v) + v * v * v; });
    EXPECT_NEAR(auc_roc(transformed, ys), auc, 1e-12);
  }
}

TEST(Logistic, GradientConvergesOnOverlappingData) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> x(0.0, 1.0);
  std::vector<double> xs(400);
  std::vector<int> ys(400);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = x(rng);
    ys[i] = std::bernoulli_distribution(1.0 / (1.0 + std::exp(-(0.5 + 2.0 * xs[i]))))(rng) ? 1 : 0;
  }
  const auto fit = fit_logistic(xs, ys);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.slope, 2.0, 0.5);
  EXPECT_GT(fit.mcfadden_r2, 0.1);
  EXPECT_GE(fit.log_likelihood, fit.null_log_likelihood);
}

TEST(Logistic, SingleClassIsDegenerate) {
  const std::vector<double> xs{1, 2, 3};
  const std::vector<int> ys{1, 1, 1};
  EXPECT_THROW(fit_logistic(xs, ys), DegenerateDataError);
  EXPECT_THROW(auc_roc(xs, ys), DegenerateDataError);
}

TEST(FeatureAnalysis, FallDriverRanksFirst) {
  const auto records = parse_gait_cycles(fixtures::synthetic_gait_log(40, 12, 7));
  const auto report = analyze_features(records);
  ASSERT_EQ(report.size(), 3u);
  EXPECT_EQ(report.front().name, "angle");
  EXPECT_GT(report.front().fit.auc, 0.9);
  for (const auto& r : report)
    if (r.name == "constant") EXPECT_NEAR(r.fit.auc, 0.5, 0.02);
  for (std::size_t i = 1; i < report.size(); ++i) EXPECT_GE(report[i - 1].fit.auc, report[i].fit.auc);
  EXPECT_THROW(analyze_features({}), DegenerateDataError);
}
