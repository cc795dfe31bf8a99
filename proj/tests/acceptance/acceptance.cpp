// End-to-end acceptance run: one PASS/FAIL line per criterion, raw numbers
// alongside. Exit status is nonzero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstring>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "golden.hpp"
#include "healthcam/augmentation.hpp"
#include "healthcam/experiments.hpp"
#include "live_server.hpp"
#include "oracles.hpp"
#include "properties.hpp"

using namespace healthcam;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

void guarded(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(name, false, std::string("threw ") + e.what());
  }
}

// ---------------------------------------------------------------------------

void gradient_oracle() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::size_t params = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = oracle::full_model_gradcheck(seed, Architecture::Branched);
    worst = std::max(worst, r.max_rel_error);
    params = r.parameters;
  }
  const double s = seconds_since(t0);
  report("gradient oracle", worst < 1e-3 && s < 60,
         fmt("branched 30x30x3 filters [2,2,2] hidden 4 (%zu params), 20 trials, max rel error %.3g (< 1e-3), %.1fs (< 60s)",
             params, worst, s));
}

void kernel_oracles() {
  Rng rng(2024);
  double conv_worst = 0, dense_worst = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t h = 3 + rng.below(20), w = 3 + rng.below(20), cin = 1 + rng.below(6), f = 1 + rng.below(12);
    const std::size_t kh = 1 + rng.below(std::min<std::size_t>(h, 5)), kw = 1 + rng.below(std::min<std::size_t>(w, 5));
    const auto x = oracle::random_tensor<double>({h, w, cin}, rng);
    const auto bank = oracle::random_bank<double>(f, kh, kw, cin, rng);
    conv_worst = std::max(conv_worst, oracle::max_abs_diff(conv2d_forward(x, bank), oracle::conv(x, bank)));
  }
  for (int t = 0; t < 50; ++t) {
    const std::size_t in = 1 + rng.below(600), out = 1 + rng.below(70);
    const auto x = oracle::random_tensor<double>({in}, rng);
    const auto layer = oracle::random_dense<double>(in, out, rng);
    dense_worst = std::max(dense_worst, oracle::max_abs_diff(dense_forward(x, layer), oracle::dense(x, layer)));
  }
  report("kernel oracles", conv_worst < 1e-6 && dense_worst < 1e-6,
         fmt("50 conv instances max |diff| %.3g, 50 dense instances max |diff| %.3g (< 1e-6)", conv_worst, dense_worst));
}

void shape_pipeline() {
  const auto cfg = ModelConfig::full();
  const Model m = Model::build(cfg, 1);
  Rng rng(1);
  const auto trace = m.forward(oracle::random_tensor<float>({224, 224, 3}, rng, 0, 1));
  const std::size_t width = trace.features.size();
  report("shape pipeline", width == 43264 && cfg.flatten_width() == 43264,
         fmt("224x224x3 -> flatten width %zu (26*26*64 = 43264), branched params %zu", width, m.parameter_count()));
}

void augmentation_laws() {
  const auto t0 = Clock::now();
  std::size_t checked = 0;
  bool ok = true;
  for (std::size_t h = 2; h <= 16 && ok; ++h)
    for (std::size_t w = 1; w <= 16 && ok; ++w) {
      ImageTensor img({h, w, 3});
      for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(i);
      ok = mirror(mirror(img)) == img && reflect_horizontal(reflect_horizontal(img)) == img;
      PollutantVector label;
      for (std::size_t i = 0; i < kPollutantCount; ++i) label[i] = static_cast<double>(h * 100 + w) + 0.5 * i;
      std::vector<LabeledSample> in = {{img, label, "a"}, {mirror(img), label, "b"}};
      const auto out = augment_dataset(in, policy_from_name("vertical", h * 31 + w));
      ok = ok && out.size() == 4 * in.size();
      for (const auto& s : out) ok = ok && s.label == label;
      ++checked;
    }
  const double s = seconds_since(t0);
  report("augmentation laws", ok && s < 10,
         fmt("%zu image shapes: |out| = 4|in|, labels preserved, mirror/reflect involutions; %.2fs (< 10s)", checked, s));
}

struct Studies {
  Benchmark data;
  ModelConfig config = ModelConfig::desk();
  ArchitectureComparisonReport arch;
  Metrics baseline;
};

void learning(const Studies& st) {
  int ok_seeds = 0;
  double wall = 0;
  std::string rows;
  for (const auto& r : st.arch.runs) {
    if (r.architecture != Architecture::Branched) continue;
    const bool ok = r.test.mse < 0.03 && 3.0 * r.test.mse <= st.baseline.mse;
    ok_seeds += ok;
    wall += r.report.wall_seconds;
    rows += fmt(" seed %llu mse %.4f%s", static_cast<unsigned long long>(r.seed), r.test.mse, ok ? "" : "(x)");
  }
  report("learning on synthetic data", ok_seeds >= 4 && wall < 600,
         fmt("500 samples 64x64, 50 epochs, baseline mse %.4f;", st.baseline.mse) + rows +
             fmt("; %d/5 seeds < 0.03 and <= baseline/3; %.0fs total (< 600s)", ok_seeds, wall));
}

void architecture_ordering(const Studies& st) {
  const double br = st.arch.median_of(Architecture::Branched, &Metrics::mse_secondary);
  const double two = st.arch.median_of(Architecture::TwoStage, &Metrics::mse_secondary);
  std::string raw;
  const auto b = st.arch.collect(Architecture::Branched, &Metrics::mse_secondary);
  const auto t = st.arch.collect(Architecture::TwoStage, &Metrics::mse_secondary);
  for (std::size_t i = 0; i < b.size(); ++i) raw += fmt(" %.4f/%.4f", b[i], t[i]);
  report("architecture ordering", br <= two,
         fmt("five-pollutant head median mse branched %.5f vs two-stage %.5f over 5 seeds; per seed (branched/two-stage):",
             br, two) + raw);
}

bool within(double a, double b) { return std::abs(a - b) < std::max(0.01, 0.2 * std::abs(b)); }

void augmentation_parity(const Studies& st) {
  TrainOptions opt;
  opt.exact_train_metrics = false;  // test curves are unaffected; saves a full pass per epoch
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  const auto study = run_augmentation_study(st.data, seeds, {"none", "vertical", "vertical+horizontal"}, st.config, opt,
                                            [](const std::string& arm, std::uint64_t seed, const TrainReport& r) {
                                              std::cerr << "  augmentation " << arm << " seed " << seed << " plateau "
                                                        << plateau_mae(r) << " (" << r.wall_seconds << "s)\n";
                                            });
  int split_ok = 0, reflect_ok = 0;
  std::string raw;
  for (auto seed : seeds) {
    const double none = study.find("none", seed).plateau;
    const double vert = study.find("vertical", seed).plateau;
    const double both = study.find("vertical+horizontal", seed).plateau;
    split_ok += within(vert, none);
    reflect_ok += within(both, vert);
    raw += fmt(" seed %llu none %.4f vertical %.4f +horizontal %.4f;", static_cast<unsigned long long>(seed), none,
               vert, both);
  }
  report("augmentation parity", split_ok >= 2 && reflect_ok >= 2,
         fmt("plateau test MAE (last 5 epochs);%s vertical~none %d/3, +horizontal~vertical %d/3 within max(0.01, 20%%)",
             raw.c_str(), split_ok, reflect_ok));
}

void serialization(const Studies& st) {
  const auto dir = fs::temp_directory_path() / "healthcam_acceptance";
  fs::create_directories(dir);
  const LabelScaler scaler = LabelScaler::fit(labels_of(st.data.train));
  bool bitwise = true;
  for (auto arch : {Architecture::Branched, Architecture::TwoStage, Architecture::Monolithic}) {
    const Model m = Model::build(ModelConfig::desk(arch), 3);
    save_checkpoint(m, scaler, dir / "m.ckpt");
    const auto back = load_checkpoint(dir / "m.ckpt");
    for (std::size_t i = 0; i < 10; ++i) {
      const auto x = to_tensor(to_rgb(st.data.test[i].image));
      auto [p0, s0] = m.predict(x);
      auto [p1, s1] = back.model.predict(x);
      bitwise = bitwise && std::memcmp(p0.values().data(), p1.values().data(), p0.size() * 4) == 0 &&
                std::memcmp(s0.values().data(), s1.values().data(), s0.size() * 4) == 0;
    }
  }
  const auto back = load_checkpoint(dir / "m.ckpt").scaler;
  double worst = 0;
  for (const auto& s : st.data.test) {
    const auto a = scaler.scale(s.label), b = back.scale(s.label);
    for (std::size_t i = 0; i < kPollutantCount; ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1e-12, std::abs(a[i])));
  }
  fs::remove_all(dir);
  report("serialization", bitwise && worst < 1e-6,
         fmt("save/load/forward bitwise identical for 3 architectures x 10 inputs: %s; scaler max rel diff %.3g (< 1e-6)",
             bitwise ? "yes" : "no", worst));
}

std::string run_cli(const std::string& args) {
  FILE* pipe = ::popen((std::string("'") + HEALTHCAM_CLI + "' " + args + " 2>/dev/null").c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
  ::pclose(pipe);
  return out;
}

void service_contract() {
  const auto rules = load_rules(std::string(HEALTHCAM_CONFIG) + "/rules.json");
  const auto recorded = golden::load_responses().at("cases");
  live::Server server(rules);
  server.service().load(golden::checkpoint_path());
  auto client = server.client();
  std::size_t golden_ok = 0, parity_ok = 0, parity_total = 0;
  std::string first_bad;
  for (std::size_t i = 0; i < golden::cases().size(); ++i) {
    const auto& c = golden::cases()[i];
    const auto& want = recorded.at(i);
    const auto res = live::post(client, c);
    const bool ok = res && want.at("name") == c.name && res->status == want.at("status").get<int>() &&
                    golden::diff(want.at("body"), golden::without_latency(nlohmann::json::parse(res->body))).empty();
    golden_ok += ok;
    if (!ok && first_bad.empty()) first_bad = c.name;
    if (c.image.empty() || !res) continue;
    std::string args = "predict --json --image '" + (golden::data_dir() / "requests" / c.image).string() +
                       "' --checkpoint '" + golden::checkpoint_path().string() + "'";
    if (c.endpoint == "recommend") args += " --symptoms '" + c.symptoms.value_or("none") + "'";
    ++parity_total;
    parity_ok += golden::without_latency(nlohmann::json::parse(run_cli(args))) ==
                 golden::without_latency(nlohmann::json::parse(res->body));
  }
  report("service contract", golden_ok == golden::cases().size() && parity_ok == parity_total,
         fmt("golden cases over HTTP %zu/%zu%s; CLI predict == HTTP value-for-value %zu/%zu", golden_ok,
             golden::cases().size(), first_bad.empty() ? "" : (" (first mismatch " + first_bad + ")").c_str(),
             parity_ok, parity_total));
}

void recommendation_monotonicity() {
  const auto rules = load_rules(std::string(HEALTHCAM_CONFIG) + "/rules.json");
  const auto o = property::recommendation_monotonicity(1000, 7, rules);
  report("recommendation monotonicity", o.cases == 1000 && o.violations == 0,
         fmt("%zu random cases, %zu violations%s", o.cases, o.violations,
             o.first_violation.empty() ? "" : (" (" + o.first_violation + ")").c_str()));
}

}  // namespace

int main() {
  guarded("gradient oracle", gradient_oracle);
  guarded("kernel oracles", kernel_oracles);
  guarded("shape pipeline", shape_pipeline);
  guarded("augmentation laws", augmentation_laws);

  Studies st;
  guarded("synthetic benchmark", [&] {
    st.data = synthetic_benchmark(500, 7, 64);
    const LabelScaler scaler = LabelScaler::fit(labels_of(st.data.train));
    st.baseline = mean_predictor_metrics(make_examples(st.data.train, scaler, st.config),
                                         make_examples(st.data.test, scaler, st.config));
    st.arch = run_architecture_comparison(st.data, {1, 2, 3, 4, 5}, st.config, TrainOptions{},
                                          {Architecture::Branched, Architecture::TwoStage},
                                          [](const std::string& arm, std::uint64_t seed, const TrainReport& r) {
                                            std::cerr << "  " << arm << " seed " << seed << " test mse "
                                                      << r.epochs.back().test.mse << " (" << r.wall_seconds << "s)\n";
                                          });
  });
  if (!st.arch.runs.empty()) {
    guarded("learning on synthetic data", [&] { learning(st); });
    guarded("architecture ordering", [&] { architecture_ordering(st); });
    guarded("augmentation parity", [&] { augmentation_parity(st); });
    guarded("serialization", [&] { serialization(st); });
  }
  guarded("service contract", service_contract);
  guarded("recommendation monotonicity", recommendation_monotonicity);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
