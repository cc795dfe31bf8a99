#include <gtest/gtest.h>

#include "healthcam/experiments.hpp"
#include "healthcam/training.hpp"
#include "oracles.hpp"

using namespace healthcam;

namespace {

struct Fixture {
  LabelScaler scaler;
  std::vector<Example> train, test;
};

Fixture synthetic(std::size_t count, std::uint64_t seed, const ModelConfig& cfg) {
  const Benchmark b = synthetic_benchmark(count, seed, cfg.input_height);
  Fixture f;
  f.scaler = LabelScaler::fit(labels_of(b.train));
  f.train = make_examples(b.train, f.scaler, cfg);
  f.test = make_examples(b.test, f.scaler, cfg);
  return f;
}

std::vector<float> flat_params(const Model& m) {
  std::vector<float> out;
  for (auto b : m.parameter_blocks()) out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first step is lr * g / (|g| + eps) = lr * sign(g).
  std::vector<double> p = {1.0, -2.0, 0.5};
  std::vector<std::vector<double>> g = {{0.3, -4.0, 1e-3}};
  AdamState<double> st;
  adam_step<double>({std::span<double>(p)}, g, st);
  EXPECT_NEAR(p[0], 1.0 - 1e-3, 1e-9);
  EXPECT_NEAR(p[1], -2.0 + 1e-3, 1e-9);
  EXPECT_NEAR(p[2], 0.5 - 1e-3 * 1e-3 / (1e-3 + 1e-8), 1e-12);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, MatchesHandComputedSecondStep) {
  std::vector<double> p = {0.0};
  AdamState<double> st;
  adam_step<double>({std::span<double>(p)}, {{1.0}}, st);
  adam_step<double>({std::span<double>(p)}, {{-1.0}}, st);
  const double m = 0.9 * 0.1 - 0.1, v = 0.999 * 0.001 + 0.001;
  const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
  const double first = -1e-3 / (1 + 1e-8);
  EXPECT_NEAR(p[0], first - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-12);
}

TEST(Adam, ZeroGradientLeavesParametersAlone) {
  std::vector<float> p = {1.5f, -0.25f};
  const auto before = p;
  AdamState<float> st;
  for (int i = 0; i < 3; ++i) adam_step<float>({std::span<float>(p)}, {{0.0f, 0.0f}}, st);
  EXPECT_EQ(p, before);
}

TEST(Adam, NonFiniteGradientThrowsBeforeUpdating) {
  std::vector<float> p = {1.0f, 2.0f};
  AdamState<float> st;
  EXPECT_THROW(adam_step<float>({std::span<float>(p)}, {{0.5f, std::nanf("")}}, st), NonFiniteGradientError);
  EXPECT_THROW(adam_step<float>({std::span<float>(p)}, {{INFINITY, 0.0f}}, st), NonFiniteGradientError);
  EXPECT_EQ(p, (std::vector<float>{1.0f, 2.0f}));
  EXPECT_EQ(st.step, 0u);
}

TEST(Training, MemorizesASingleRepeatedSample) {
  const auto cfg = ModelConfig::desk();
  const auto f = synthetic(10, 5, cfg);
  const std::vector<Example> one(32, f.train.front());
  Model m = Model::build(cfg, 1);
  TrainOptions opt;
  opt.epochs = 50;
  const auto report = train(m, one, one, opt);
  ASSERT_EQ(report.epochs.size(), 50u);
  // "Within 50 epochs": some epoch up to the fiftieth gets there.
  double best = report.epochs.front().train.mse;
  for (const auto& e : report.epochs) best = std::min(best, e.train.mse);
  EXPECT_LT(best, 1e-3);
}

TEST(Training, ZeroEpochsIsANoOp) {
  const auto cfg = oracle::gradcheck_config();
  const auto f = synthetic(10, 2, cfg);
  Model m = Model::build(cfg, 4);
  const auto before = flat_params(m);
  TrainOptions opt;
  opt.epochs = 0;
  const auto report = train(m, f.train, f.test, opt);
  EXPECT_TRUE(report.epochs.empty());
  EXPECT_EQ(flat_params(m), before);
}

TEST(Training, DeterministicGivenSeed) {
  const auto cfg = oracle::gradcheck_config();
  const auto f = synthetic(40, 3, cfg);
  TrainOptions opt;
  opt.epochs = 3;
  opt.batch_size = 8;
  opt.seed = 11;
  Model a = Model::build(cfg, 1), b = Model::build(cfg, 1);
  const auto ra = train(a, f.train, f.test, opt);
  const auto rb = train(b, f.train, f.test, opt);
  EXPECT_EQ(flat_params(a), flat_params(b));
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(ra.epochs[e].test.mse, rb.epochs[e].test.mse);
  opt.seed = 12;
  Model c = Model::build(cfg, 1);
  train(c, f.train, f.test, opt);
  EXPECT_NE(flat_params(a), flat_params(c)) << "shuffle order depends on the seed";
}

TEST(Training, LossFallsOverFirstFiveEpochsInMostSeeds) {
  const auto cfg = ModelConfig::desk();
  const auto f = synthetic(500, 7, cfg);  // the shared benchmark
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Model m = Model::build(cfg, seed);
    TrainOptions opt;
    opt.epochs = 5;
    opt.seed = seed;
    const auto r = train(m, f.train, f.test, opt);
    bool ok = true;
    for (std::size_t e = 1; e < 5; ++e) ok = ok && r.epochs[e].train.mse < r.epochs[e - 1].train.mse;
    monotone += ok;
  }
  EXPECT_GE(monotone, 4);
}

TEST(Training, ReportedMetricsMatchIndependentRecomputation) {
  const auto cfg = oracle::gradcheck_config();
  const auto f = synthetic(40, 4, cfg);
  Model m = Model::build(cfg, 2);
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 8;
  const auto r = train(m, f.train, f.test, opt);
  // Plain mse() over all seven outputs per example, averaged.
  double acc = 0;
  for (const auto& ex : f.test) {
    auto [p, s] = m.predict(ex.image);
    Tensor<float> pred({kPollutantCount}), target({kPollutantCount});
    for (std::size_t i = 0; i < kParticulateCount; ++i) pred[i] = p[i];
    for (std::size_t i = 0; i < kSecondaryCount; ++i) pred[kParticulateCount + i] = s[i];
    for (std::size_t i = 0; i < kPollutantCount; ++i) target[i] = static_cast<float>(ex.target[i]);
    acc += mse(pred, target);
  }
  EXPECT_NEAR(r.epochs.back().test.mse, acc / static_cast<double>(f.test.size()), 1e-6);
  EXPECT_NEAR(r.epochs.back().train.mse, evaluate(m, f.train).mse, 1e-6);
}

TEST(Training, RunningMetricsModeDoesNotChangeWeights) {
  const auto cfg = oracle::gradcheck_config();
  const auto f = synthetic(30, 6, cfg);
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 8;
  Model a = Model::build(cfg, 1), b = Model::build(cfg, 1);
  const auto ra = train(a, f.train, f.test, opt);
  opt.exact_train_metrics = false;
  const auto rb = train(b, f.train, f.test, opt);
  EXPECT_EQ(flat_params(a), flat_params(b));
  EXPECT_EQ(ra.epochs.back().test.mae, rb.epochs.back().test.mae);
}

TEST(Training, RejectsEmptySetsAndZeroBatch) {
  const auto cfg = oracle::gradcheck_config();
  const auto f = synthetic(10, 1, cfg);
  Model m = Model::build(cfg, 1);
  EXPECT_THROW(train(m, {}, f.test, {}), std::invalid_argument);
  EXPECT_THROW(train(m, f.train, {}, {}), std::invalid_argument);
  TrainOptions opt;
  opt.batch_size = 0;
  EXPECT_THROW(train(m, f.train, f.test, opt), std::invalid_argument);
  EXPECT_THROW(evaluate(m, {}), std::invalid_argument);
}

TEST(Training, MeanPredictorAndHelpers) {
  std::vector<Example> ref(2);
  for (std::size_t i = 0; i < kPollutantCount; ++i) {
    ref[0].target[i] = 0.0;
    ref[1].target[i] = 1.0;
  }
  const auto m = mean_predictor_metrics(ref, ref);
  EXPECT_DOUBLE_EQ(m.mse, 0.25);
  EXPECT_DOUBLE_EQ(m.mae, 0.5);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  TrainReport r;
  r.seed = 7;
  for (std::size_t e = 1; e <= 7; ++e) {
    EpochRecord rec;
    rec.epoch = e;
    rec.test.mae = static_cast<double>(e);
    r.epochs.push_back(rec);
  }
  EXPECT_DOUBLE_EQ(plateau_mae(r), 5.0);  // mean of epochs 3..7
  const std::string csv = curves_csv({{"none", &r}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,arm,seed,mae,mse");
  EXPECT_NE(csv.find("\n7,none,7,7,0\n"), std::string::npos);
}
