#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "healthcam/adam.hpp"
#include "healthcam/augmentation.hpp"
#include "healthcam/image_io.hpp"
#include "healthcam/model.hpp"
#include "healthcam/rng.hpp"
#include "healthcam/scaler.hpp"

namespace healthcam {

/// A model-ready training pair: image at model resolution, labels on the scaled [0,1] axis.
struct Example {
  ImageTensor image;
  ScaledLabels target;
};

/// Resizes to the model input and scales labels with a scaler fitted elsewhere.
inline std::vector<Example> make_examples(const std::vector<LabeledSample>& samples, const LabelScaler& scaler,
                                          const ModelConfig& config) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back({resize_nearest(s.image, config.input_height, config.input_width), scaler.scale(s.label)});
  }
  return out;
}

inline std::vector<PollutantVector> labels_of(const std::vector<LabeledSample>& samples) {
  std::vector<PollutantVector> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

/// Normalized-scale error metrics: combined over all seven outputs and per head.
struct Metrics {
  double mse = 0, mae = 0;
  double mse_particulate = 0, mae_particulate = 0;
  double mse_secondary = 0, mae_secondary = 0;

  nlohmann::json to_json() const {
    return {{"mse", mse},
            {"mae", mae},
            {"mse_particulate", mse_particulate},
            {"mae_particulate", mae_particulate},
            {"mse_secondary", mse_secondary},
            {"mae_secondary", mae_secondary}};
  }
};

inline Metrics evaluate(const Model& model, const std::vector<Example>& examples) {
  if (examples.empty()) throw std::invalid_argument("evaluate: no examples");
  double se[2] = {0, 0}, ae[2] = {0, 0};
  for (const auto& ex : examples) {
    auto [p, s] = model.predict(ex.image);
    for (std::size_t i = 0; i < kParticulateCount; ++i) {
      const double d = static_cast<double>(p[i]) - ex.target[i];
      se[0] += d * d;
      ae[0] += std::abs(d);
    }
    for (std::size_t i = 0; i < kSecondaryCount; ++i) {
      const double d = static_cast<double>(s[i]) - ex.target[kParticulateCount + i];
      se[1] += d * d;
      ae[1] += std::abs(d);
    }
  }
  const double n = static_cast<double>(examples.size());
  Metrics m;
  m.mse_particulate = se[0] / (n * kParticulateCount);
  m.mae_particulate = ae[0] / (n * kParticulateCount);
  m.mse_secondary = se[1] / (n * kSecondaryCount);
  m.mae_secondary = ae[1] / (n * kSecondaryCount);
  m.mse = (se[0] + se[1]) / (n * kPollutantCount);
  m.mae = (ae[0] + ae[1]) / (n * kPollutantCount);
  return m;
}

/// Metrics of always predicting the per-output mean of `reference` targets.
inline Metrics mean_predictor_metrics(const std::vector<Example>& reference, const std::vector<Example>& examples) {
  ScaledLabels mean{};
  for (const auto& ex : reference) {
    for (std::size_t i = 0; i < kPollutantCount; ++i) mean[i] += ex.target[i];
  }
  for (double& v : mean) v /= static_cast<double>(reference.size());
  double se[2] = {0, 0}, ae[2] = {0, 0};
  for (const auto& ex : examples) {
    for (std::size_t i = 0; i < kPollutantCount; ++i) {
      const double d = mean[i] - ex.target[i];
      se[i < kParticulateCount ? 0 : 1] += d * d;
      ae[i < kParticulateCount ? 0 : 1] += std::abs(d);
    }
  }
  const double n = static_cast<double>(examples.size());
  Metrics m;
  m.mse_particulate = se[0] / (n * kParticulateCount);
  m.mae_particulate = ae[0] / (n * kParticulateCount);
  m.mse_secondary = se[1] / (n * kSecondaryCount);
  m.mae_secondary = ae[1] / (n * kSecondaryCount);
  m.mse = (se[0] + se[1]) / (n * kPollutantCount);
  m.mae = (ae[0] + ae[1]) / (n * kPollutantCount);
  return m;
}

/// Per-pollutant errors in native units, from unscaled predictions against raw labels.
struct NativeMetrics {
  std::array<double, kPollutantCount> mae{};
  std::array<double, kPollutantCount> mse{};

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < kPollutantCount; ++i) {
      j[std::string(kPollutantNames[i])] = {{"mae", mae[i]}, {"mse", mse[i]}, {"unit", std::string(kPollutantUnits[i])}};
    }
    return j;
  }
};

inline NativeMetrics evaluate_native(const Model& model, const LabelScaler& scaler,
                                     const std::vector<Example>& examples) {
  if (examples.empty()) throw std::invalid_argument("evaluate_native: no examples");
  NativeMetrics m;
  for (const auto& ex : examples) {
    auto [p, s] = model.predict(ex.image);
    for (std::size_t i = 0; i < kPollutantCount; ++i) {
      const double raw = i < kParticulateCount ? p[i] : s[i - kParticulateCount];
      const double d = scaler.unscale(i, raw) - scaler.unscale(i, ex.target[i]);
      m.mae[i] += std::abs(d);
      m.mse[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < kPollutantCount; ++i) {
    m.mae[i] /= static_cast<double>(examples.size());
    m.mse[i] /= static_cast<double>(examples.size());
  }
  return m;
}

struct TrainOptions {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  AdamConfig adam;
  // When false, per-epoch train metrics are the running mean over the epoch's
  // batches (pre-update predictions) instead of a full pass with the final weights.
  bool exact_train_metrics = true;

  nlohmann::json to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"seed", seed},
            {"exact_train_metrics", exact_train_metrics},
            {"adam", {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"epsilon", adam.epsilon}}}};
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  Metrics train;
  Metrics test;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0;
  nlohmann::json config;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : epochs) {
      rows.push_back({{"epoch", e.epoch}, {"train", e.train.to_json()}, {"test", e.test.to_json()}});
    }
    return {{"epochs", rows}, {"wall_seconds", wall_seconds}, {"config", config}, {"seed", seed}};
  }
};

/// Loss per batch: mean over the batch of mse(particulate) + mse(secondary).
/// Gradients are summed in sample order, so runs are bit-reproducible.
inline TrainReport train(Model& model, const std::vector<Example>& train_set, const std::vector<Example>& test_set,
                         const TrainOptions& options) {
  if (train_set.empty() || test_set.empty()) throw std::invalid_argument("train: empty train or test set");
  if (options.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = options.seed;
  report.config = {{"model", model.config().to_json()}, {"train", options.to_json()},
                   {"train_examples", train_set.size()}, {"test_examples", test_set.size()}};

  AdamState<float> adam;
  adam.config = options.adam;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ForwardTrace<float> trace;
  Tensor<float> t1({kParticulateCount}), t2({kSecondaryCount});

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    Rng rng(derive_seed(options.seed, epoch));
    rng.shuffle(order);
    double running_se[2] = {0, 0}, running_ae[2] = {0, 0};
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      const float inv_batch = 1.0f / static_cast<float>(end - begin);
      std::vector<std::vector<float>> acc;
      for (std::size_t k = begin; k < end; ++k) {
        const Example& ex = train_set[order[k]];
        model.forward_into(ex.image, trace);
        for (std::size_t i = 0; i < kParticulateCount; ++i) t1[i] = static_cast<float>(ex.target[i]);
        for (std::size_t i = 0; i < kSecondaryCount; ++i) t2[i] = static_cast<float>(ex.target[kParticulateCount + i]);
        for (std::size_t i = 0; i < kParticulateCount; ++i) {
          const double d = static_cast<double>(trace.particulate[i]) - t1[i];
          running_se[0] += d * d;
          running_ae[0] += std::abs(d);
        }
        for (std::size_t i = 0; i < kSecondaryCount; ++i) {
          const double d = static_cast<double>(trace.secondary[i]) - t2[i];
          running_se[1] += d * d;
          running_ae[1] += std::abs(d);
        }
        Tensor<float> g1 = mse_gradient(trace.particulate, t1);
        Tensor<float> g2 = mse_gradient(trace.secondary, t2);
        for (float& v : g1.values()) v *= inv_batch;
        for (float& v : g2.values()) v *= inv_batch;
        ModelGrads<float> grads = model.backward(trace, g1, g2);
        if (acc.empty()) {
          acc = std::move(grads.blocks);
        } else {
          for (std::size_t b = 0; b < acc.size(); ++b) {
            for (std::size_t i = 0; i < acc[b].size(); ++i) acc[b][i] += grads.blocks[b][i];
          }
        }
      }
      adam_step(model.mutable_parameter_blocks(), acc, adam);
    }
    Metrics train_metrics;
    if (options.exact_train_metrics) {
      train_metrics = evaluate(model, train_set);
    } else {
      const double n = static_cast<double>(train_set.size());
      train_metrics.mse_particulate = running_se[0] / (n * kParticulateCount);
      train_metrics.mae_particulate = running_ae[0] / (n * kParticulateCount);
      train_metrics.mse_secondary = running_se[1] / (n * kSecondaryCount);
      train_metrics.mae_secondary = running_ae[1] / (n * kSecondaryCount);
      train_metrics.mse = (running_se[0] + running_se[1]) / (n * kPollutantCount);
      train_metrics.mae = (running_ae[0] + running_ae[1]) / (n * kPollutantCount);
    }
    report.epochs.push_back({epoch + 1, train_metrics, evaluate(model, test_set)});
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Rows of `epoch,arm,seed,mae,mse` (test metrics) for plotting.
inline std::string curves_csv(const std::vector<std::pair<std::string, const TrainReport*>>& runs) {
  std::string out = "epoch,arm,seed,mae,mse\n";
  char buf[128];
  for (const auto& [arm, report] : runs) {
    for (const auto& e : report->epochs) {
      std::snprintf(buf, sizeof(buf), "%zu,%s,%llu,%.9g,%.9g\n", e.epoch, arm.c_str(),
                    static_cast<unsigned long long>(report->seed), e.test.mae, e.test.mse);
      out += buf;
    }
  }
  return out;
}

}  // namespace healthcam
