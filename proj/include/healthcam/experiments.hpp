#pragma once

// Experiment runners: augmentation parity and architecture comparison.
// Both train every arm under identical seeds, data and optimizer settings.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "healthcam/augmentation.hpp"
#include "healthcam/dataset.hpp"
#include "healthcam/model.hpp"
#include "healthcam/synthetic.hpp"
#include "healthcam/training.hpp"

namespace healthcam {

inline constexpr std::size_t kPlateauEpochs = 5;

/// Mean test MAE over the last kPlateauEpochs epochs (fewer if the run is shorter).
inline double plateau_mae(const TrainReport& report) {
  if (report.epochs.empty()) throw std::invalid_argument("plateau_mae: empty report");
  const std::size_t n = std::min(kPlateauEpochs, report.epochs.size());
  double sum = 0;
  for (std::size_t i = report.epochs.size() - n; i < report.epochs.size(); ++i) sum += report.epochs[i].test.mae;
  return sum / static_cast<double>(n);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Seeded synthetic benchmark: generated images split 80/20.
struct Benchmark {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

inline Benchmark synthetic_benchmark(std::size_t count, std::uint64_t seed, std::size_t image_size) {
  auto split = split_samples(to_labeled_samples(generate_synthetic(count, seed, image_size)), 0.8, seed);
  return {std::move(split.train), std::move(split.test)};
}

/// Called after each finished run with (arm, seed, report).
using RunObserver = std::function<void(const std::string&, std::uint64_t, const TrainReport&)>;

// ---------------------------------------------------------------------------
// Augmentation parity

struct AugmentationArmResult {
  std::string arm;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  TrainReport report;
  double plateau = 0;
};

struct AugmentationStudyReport {
  std::vector<std::string> arms;
  std::vector<std::uint64_t> seeds;
  std::vector<AugmentationArmResult> runs;

  const AugmentationArmResult& find(const std::string& arm, std::uint64_t seed) const {
    for (const auto& r : runs) {
      if (r.arm == arm && r.seed == seed) return r;
    }
    throw std::out_of_range("no run for arm " + arm);
  }

  /// |plateau(a) - plateau(b)| per seed.
  std::vector<double> plateau_deltas(const std::string& a, const std::string& b) const {
    std::vector<double> out;
    for (auto seed : seeds) out.push_back(std::abs(find(a, seed).plateau - find(b, seed).plateau));
    return out;
  }

  /// |final test MAE(a) - final test MAE(b)| per seed.
  std::vector<double> final_deltas(const std::string& a, const std::string& b) const {
    std::vector<double> out;
    for (auto seed : seeds) {
      out.push_back(std::abs(find(a, seed).report.epochs.back().test.mae - find(b, seed).report.epochs.back().test.mae));
    }
    return out;
  }

  nlohmann::json summary() const {
    nlohmann::json j;
    j["arms"] = arms;
    j["seeds"] = seeds;
    j["plateau_epochs"] = kPlateauEpochs;
    nlohmann::json runs_json = nlohmann::json::array();
    for (const auto& r : runs) {
      runs_json.push_back({{"arm", r.arm},
                           {"seed", r.seed},
                           {"train_size", r.train_size},
                           {"plateau_mae", r.plateau},
                           {"final_test_mae", r.report.epochs.back().test.mae},
                           {"first_test_mae", r.report.epochs.front().test.mae},
                           {"wall_seconds", r.report.wall_seconds}});
    }
    j["runs"] = runs_json;
    nlohmann::json deltas = nlohmann::json::object();
    auto has = [&](const std::string& a) { return std::find(arms.begin(), arms.end(), a) != arms.end(); };
    auto add = [&](const std::string& a, const std::string& b) {
      if (!has(a) || !has(b)) return;
      deltas[a + "_vs_" + b] = {{"plateau_delta", plateau_deltas(a, b)}, {"final_delta", final_deltas(a, b)}};
    };
    add("none", "vertical");
    add("vertical", "vertical+horizontal");
    add("none", "vertical+horizontal");
    j["deltas"] = deltas;
    return j;
  }
};

inline void validate_arms(const std::vector<std::string>& arms) {
  if (arms.empty()) throw std::invalid_argument("augmentation study needs at least one arm");
  for (const auto& a : arms) (void)policy_from_name(a, 0);
}

/// Each arm augments the same training split with its policy; all arms are
/// evaluated on the same unaugmented test split. Half-images are resized to
/// the model input inside make_examples.
inline AugmentationStudyReport run_augmentation_study(const Benchmark& data, const std::vector<std::uint64_t>& seeds,
                                                      const std::vector<std::string>& arms, const ModelConfig& config,
                                                      TrainOptions options, const RunObserver& observer = {}) {
  if (seeds.size() < 3) throw std::invalid_argument("augmentation study needs at least 3 seeds");
  validate_arms(arms);
  const LabelScaler scaler = LabelScaler::fit(labels_of(data.train));
  const std::vector<Example> test = make_examples(data.test, scaler, config);
  AugmentationStudyReport report{arms, seeds, {}};
  for (auto seed : seeds) {
    for (const auto& arm : arms) {
      const AugmentationPolicy policy = policy_from_name(arm, derive_seed(seed, 101));
      const std::vector<Example> train_set = make_examples(augment_dataset(data.train, policy), scaler, config);
      Model model = Model::build(config, seed);
      options.seed = seed;
      AugmentationArmResult r{arm, seed, train_set.size(), train(model, train_set, test, options), 0};
      r.plateau = plateau_mae(r.report);
      if (observer) observer(arm, seed, r.report);
      report.runs.push_back(std::move(r));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Architecture comparison

struct ArchitectureRun {
  Architecture architecture;
  std::uint64_t seed = 0;
  TrainReport report;
  Metrics test;  // final-epoch test metrics
};

/// Delhi column of the published result tables, printed for context only.
struct ReferenceAnchor {
  const char* table;
  double mae;
  double mse;
};
inline constexpr ReferenceAnchor kDelhiTwoStage{"two pollutants from images, five from two", 0.2787, 0.1135};
inline constexpr ReferenceAnchor kDelhiTwoFromImages{"two pollutants from images", 0.0559, 0.0077};
inline constexpr ReferenceAnchor kDelhiFiveFromImages{"five pollutants from images", 0.0671, 0.0112};

struct ArchitectureComparisonReport {
  std::vector<std::uint64_t> seeds;
  std::vector<ArchitectureRun> runs;

  std::vector<double> collect(Architecture a, double Metrics::*field) const {
    std::vector<double> out;
    for (auto seed : seeds) {
      for (const auto& r : runs) {
        if (r.architecture == a && r.seed == seed) out.push_back(r.test.*field);
      }
    }
    return out;
  }

  double median_of(Architecture a, double Metrics::*field) const { return median(collect(a, field)); }

  /// sign(MSE_two-stage - MSE_branched) on the five-pollutant head, per seed.
  std::vector<int> secondary_mse_sign() const {
    const auto two = collect(Architecture::TwoStage, &Metrics::mse_secondary);
    const auto br = collect(Architecture::Branched, &Metrics::mse_secondary);
    std::vector<int> out;
    for (std::size_t i = 0; i < std::min(two.size(), br.size()); ++i) {
      const double d = two[i] - br[i];
      out.push_back(d > 0 ? 1 : (d < 0 ? -1 : 0));
    }
    return out;
  }

  bool branched_not_worse() const {
    return median_of(Architecture::Branched, &Metrics::mse_secondary) <=
           median_of(Architecture::TwoStage, &Metrics::mse_secondary);
  }

  /// MAE/MSE rows with one column per data source, plus the published Delhi column.
  std::string tables(const std::string& source = "synthetic") const {
    std::string out;
    char buf[256];
    auto table = [&](const std::string& title, Architecture a, double Metrics::*mae, double Metrics::*mse,
                     const ReferenceAnchor* anchor) {
      out += title + "\n";
      std::snprintf(buf, sizeof(buf), "  %-28s | %-12s | %s\n", "", source.c_str(), anchor ? "Delhi (published)" : "");
      out += buf;
      std::snprintf(buf, sizeof(buf), "  %-28s | %-12.4f | %s\n", "Mean Absolute Error(MAE)", median_of(a, mae),
                    anchor ? std::to_string(anchor->mae).substr(0, 6).c_str() : "");
      out += buf;
      std::snprintf(buf, sizeof(buf), "  %-28s | %-12.4f | %s\n", "Mean Squared Error(MSE)", median_of(a, mse),
                    anchor ? std::to_string(anchor->mse).substr(0, 6).c_str() : "");
      out += buf;
    };
    table("Two-stage: two pollutants from images, five from two (all 7 outputs)", Architecture::TwoStage,
          &Metrics::mae, &Metrics::mse, &kDelhiTwoStage);
    table("Two-stage: five-pollutant head", Architecture::TwoStage, &Metrics::mae_secondary, &Metrics::mse_secondary,
          nullptr);
    table("Branched: two pollutants from images", Architecture::Branched, &Metrics::mae_particulate,
          &Metrics::mse_particulate, &kDelhiTwoFromImages);
    table("Branched: five pollutants from images", Architecture::Branched, &Metrics::mae_secondary,
          &Metrics::mse_secondary, &kDelhiFiveFromImages);
    table("Monolithic: all 7 outputs", Architecture::Monolithic, &Metrics::mae, &Metrics::mse, nullptr);
    return out;
  }

  nlohmann::json summary() const {
    nlohmann::json j;
    j["seeds"] = seeds;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : runs) {
      rows.push_back({{"architecture", to_string(r.architecture)}, {"seed", r.seed}, {"test", r.test.to_json()},
                      {"wall_seconds", r.report.wall_seconds}});
    }
    j["runs"] = rows;
    nlohmann::json medians = nlohmann::json::object();
    for (auto a : {Architecture::Branched, Architecture::TwoStage, Architecture::Monolithic}) {
      bool any = false;
      for (const auto& r : runs) any = any || r.architecture == a;
      if (!any) continue;
      medians[to_string(a)] = {{"mse", median_of(a, &Metrics::mse)},
                               {"mae", median_of(a, &Metrics::mae)},
                               {"mse_particulate", median_of(a, &Metrics::mse_particulate)},
                               {"mse_secondary", median_of(a, &Metrics::mse_secondary)}};
    }
    j["medians"] = medians;
    j["sign_twostage_minus_branched_secondary_mse"] = secondary_mse_sign();
    j["branched_secondary_not_worse"] = branched_not_worse();
    j["reference_delhi"] = {
        {"two_stage", {{"mae", kDelhiTwoStage.mae}, {"mse", kDelhiTwoStage.mse}}},
        {"two_from_images", {{"mae", kDelhiTwoFromImages.mae}, {"mse", kDelhiTwoFromImages.mse}}},
        {"five_from_images", {{"mae", kDelhiFiveFromImages.mae}, {"mse", kDelhiFiveFromImages.mse}}}};
    return j;
  }
};

inline ArchitectureComparisonReport run_architecture_comparison(
    const Benchmark& data, const std::vector<std::uint64_t>& seeds, const ModelConfig& base_config,
    TrainOptions options,
    const std::vector<Architecture>& architectures = {Architecture::Branched, Architecture::TwoStage,
                                                      Architecture::Monolithic},
    const RunObserver& observer = {}) {
  if (seeds.size() < 3) throw std::invalid_argument("architecture comparison needs at least 3 seeds");
  const LabelScaler scaler = LabelScaler::fit(labels_of(data.train));
  ArchitectureComparisonReport report{seeds, {}};
  for (auto seed : seeds) {
    for (auto arch : architectures) {
      ModelConfig config = base_config;
      config.architecture = arch;
      const std::vector<Example> train_set = make_examples(data.train, scaler, config);
      const std::vector<Example> test = make_examples(data.test, scaler, config);
      Model model = Model::build(config, seed);
      options.seed = seed;
      ArchitectureRun r{arch, seed, train(model, train_set, test, options), {}};
      r.test = r.report.epochs.empty() ? evaluate(model, test) : r.report.epochs.back().test;
      if (observer) observer(to_string(arch), seed, r.report);
      report.runs.push_back(std::move(r));
    }
  }
  return report;
}

}  // namespace healthcam
