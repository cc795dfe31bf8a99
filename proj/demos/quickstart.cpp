// Library walkthrough: synthesize a small haze dataset, train the desk-sized
// branched model briefly, then predict and recommend for a fresh image.
//   ./build/healthcam_demo [rules.json]

#include <cstdio>
#include <iostream>

#include "healthcam/experiments.hpp"
#include "healthcam/recommendation.hpp"

using namespace healthcam;

int main(int argc, char** argv) {
  const ModelConfig config = ModelConfig::desk();
  const Benchmark data = synthetic_benchmark(160, 42, config.input_height);
  const LabelScaler scaler = LabelScaler::fit(labels_of(data.train));
  const auto train_set = make_examples(data.train, scaler, config);
  const auto test_set = make_examples(data.test, scaler, config);

  Model model = Model::build(config, 1);
  TrainOptions options;
  options.epochs = 15;
  options.seed = 1;
  const TrainReport report = train(model, train_set, test_set, options);
  const Metrics baseline = mean_predictor_metrics(train_set, test_set);
  std::printf("%zu parameters, %zu epochs in %.1fs\n", model.parameter_count(), report.epochs.size(),
              report.wall_seconds);
  std::printf("test mse %.4f (mean predictor %.4f)\n", report.epochs.back().test.mse, baseline.mse);

  const RuleTable rules = argc > 1 ? load_rules(argv[1]) : load_rules("config/rules.json");
  const SymptomProfile asthma = SymptomProfile::parse("asthma");
  for (double alpha : {0.05, 0.5, 0.95}) {
    const SyntheticSample s = make_synthetic_sample(alpha, config.input_height, 1000);
    auto [p, sec] = model.predict(to_tensor(s.image));
    std::array<double, kPollutantCount> raw{};
    for (std::size_t i = 0; i < kParticulateCount; ++i) raw[i] = p[i];
    for (std::size_t i = 0; i < kSecondaryCount; ++i) raw[kParticulateCount + i] = sec[i];
    const PollutantVector values = scaler.unscale(raw);
    const Recommendation rec = recommend(values, asthma, rules);
    std::printf("haze %.2f: pm25 %.1f (true %.1f), class %s, asthma verdict %s\n", alpha, values.pm25(),
                s.label.pm25(), std::string(to_string(rec.aqi_class)).c_str(), to_string(rec.verdict).c_str());
  }
  return 0;
}
