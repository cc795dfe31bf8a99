// healthcam: command-line driver for every pipeline stage.
// Exit codes: 0 ok, 1 operational error, 2 usage error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "healthcam/api.hpp"
#include "healthcam/checkpoint.hpp"
#include "healthcam/dataset.hpp"
#include "healthcam/experiments.hpp"
#include "healthcam/server.hpp"
#include "healthcam/synthetic.hpp"
#include "healthcam/training.hpp"

#ifndef HEALTHCAM_CONFIG_DIR
#define HEALTHCAM_CONFIG_DIR "config"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace healthcam;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

fs::path run_dir(const std::string& out, std::uint64_t seed) {
  if (!out.empty()) return out;
  return fs::path("runs") / (timestamp() + "-seed" + std::to_string(seed));
}

void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw UsageError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw UsageError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_snapshot(const fs::path& dir, const std::string& command, json flags) {
  write_text(dir / "run_config.json", json{{"command", command}, {"flags", std::move(flags)}}.dump(2) + "\n");
}

fs::path default_config_file(const char* name) {
  const fs::path local = fs::path("config") / name;
  if (fs::exists(local)) return local;
  return fs::path(HEALTHCAM_CONFIG_DIR) / name;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("bad seed '" + tok + "'");
    }
  }
  if (out.empty()) throw UsageError("no seeds given");
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

// Model shape flags shared by train and study.
struct ModelFlags {
  std::string preset = "full";
  std::size_t input_size = 0;
  std::vector<std::size_t> filters;
  std::size_t hidden = 0;
  std::string arch = "branched";

  void add(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Base model config: full (224x224, 32/64/64) or desk (64x64, 8/16/16)")
        ->check(CLI::IsMember({"full", "desk"}))
        ->capture_default_str();
    cmd->add_option("--input-size", input_size, "Override square input size");
    cmd->add_option("--filters", filters, "Override the three conv filter counts")->expected(3);
    cmd->add_option("--hidden", hidden, "Override hidden units per head");
  }

  ModelConfig build() const {
    ModelConfig c = preset == "desk" ? ModelConfig::desk() : ModelConfig::full();
    if (input_size) c.input_height = c.input_width = input_size;
    if (!filters.empty()) c.conv_filters = {filters[0], filters[1], filters[2]};
    if (hidden) c.hidden_units = hidden;
    try {
      c.architecture = parse_architecture(arch);
      c.validate();
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    return c;
  }

  json to_json() const {
    return {{"preset", preset}, {"input_size", input_size}, {"filters", filters}, {"hidden", hidden}, {"arch", arch}};
  }
};

TrainOptions train_options(std::size_t epochs, std::size_t batch, std::uint64_t seed) {
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = batch;
  o.seed = seed;
  return o;
}

std::string metrics_table(const Metrics& m, const NativeMetrics& native) {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof(buf), "  %-26s | %-10s | %-10s | %-10s", "", "all", "2-head", "5-head");
  out += buf;
  for (std::size_t i = 0; i < kPollutantCount; ++i) {
    std::snprintf(buf, sizeof(buf), " | %-14s", (std::string(kPollutantNames[i]) + " (" +
                                                 std::string(kPollutantUnits[i]) + ")").c_str());
    out += buf;
  }
  out += "\n";
  auto row = [&](const char* name, double all, double p, double s, const std::array<double, kPollutantCount>& n) {
    std::snprintf(buf, sizeof(buf), "  %-26s | %-10.4f | %-10.4f | %-10.4f", name, all, p, s);
    out += buf;
    for (double v : n) {
      std::snprintf(buf, sizeof(buf), " | %-14.4f", v);
      out += buf;
    }
    out += "\n";
  };
  row("Mean Absolute Error(MAE)", m.mae, m.mae_particulate, m.mae_secondary, native.mae);
  row("Mean Squared Error(MSE)", m.mse, m.mse_particulate, m.mse_secondary, native.mse);
  out += "  (all / 2-head / 5-head on the normalized [0,1] scale; pollutant columns in native units)\n";
  return out;
}

// ---------------------------------------------------------------------------

int cmd_synth(std::size_t count, std::uint64_t seed, std::size_t size, const std::string& out, bool force) {
  if (count == 0) throw UsageError("--count must be at least 1");
  if (size < 2) throw UsageError("--size must be at least 2");
  const fs::path dir = run_dir(out, seed);
  prepare_out_dir(dir, force);
  const auto manifest = write_synthetic_dataset(generate_synthetic(count, seed, size), dir);
  write_snapshot(dir, "synth", {{"count", count}, {"seed", seed}, {"size", size}});
  std::cout << "wrote " << manifest.size() << " images and manifest.csv to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_augment(const std::string& manifest_path, const std::string& policy_name, std::uint64_t seed,
                bool keep_original, const std::string& out, bool force) {
  AugmentationPolicy policy;
  try {
    policy = policy_from_name(policy_name, seed, keep_original);
    policy.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const DatasetManifest manifest = read_manifest(manifest_path);
  if (manifest.empty()) throw IngestError("manifest " + manifest_path + " has no records");
  const auto augmented = augment_dataset(load_samples(manifest), policy);
  const fs::path dir = run_dir(out, seed);
  prepare_out_dir(dir, force);
  DatasetManifest result;
  result.base_dir = dir;
  for (const auto& s : augmented) {
    // "dir/img_00001.png/top/mirror" -> "dir_img_00001_top_mirror.png"
    std::string name = s.id;
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
      const auto pos = name.find(ext);
      if (pos != std::string::npos) name.erase(pos, std::char_traits<char>::length(ext));
    }
    for (char& ch : name) {
      if (ch == '/' || ch == '\\') ch = '_';
    }
    name += ".png";
    write_file_bytes(dir / name, encode_png(to_rgb(s.image)));
    result.records.push_back({name, s.label});
  }
  write_manifest(dir / "manifest.csv", result);
  write_snapshot(dir, "augment",
                 {{"manifest", manifest_path}, {"policy", policy_name}, {"seed", seed}, {"keep_original", keep_original}});
  std::cout << "wrote " << result.size() << " images (" << policy.multiplicity() << " per input) to " << dir.string()
            << "\n";
  return kExitOk;
}

int cmd_train(const std::string& manifest_path, const std::string& test_manifest, ModelFlags mf, std::size_t epochs,
              std::size_t batch, std::uint64_t seed, double split, const std::string& out, bool force) {
  const ModelConfig config = mf.build();
  if (batch == 0) throw UsageError("--batch-size must be positive");
  DatasetManifest train_m = read_manifest(manifest_path);
  DatasetManifest test_m;
  if (!test_manifest.empty()) {
    test_m = read_manifest(test_manifest);
  } else {
    TrainTestSplit parts = split_train_test(train_m, split, seed);
    train_m = std::move(parts.train);
    test_m = std::move(parts.test);
  }
  if (train_m.empty() || test_m.empty()) throw IngestError("train and test sets must both be non-empty");
  const auto train_samples = load_samples(train_m, config.input_height, config.input_width);
  const auto test_samples = load_samples(test_m, config.input_height, config.input_width);
  // The scaler only ever sees training labels.
  const LabelScaler scaler = LabelScaler::fit(labels_of(train_samples));
  const auto train_set = make_examples(train_samples, scaler, config);
  const auto test_set = make_examples(test_samples, scaler, config);

  const fs::path dir = run_dir(out, seed);
  prepare_out_dir(dir, force);
  Model model = Model::build(config, seed);
  const TrainOptions options = train_options(epochs, batch, seed);
  TrainReport report = train(model, train_set, test_set, options);
  const std::string hash = save_checkpoint(model, scaler, dir / "model.ckpt");

  json rj = report.to_json();
  rj["checkpoint"] = {{"file", "model.ckpt"}, {"hash", hash}};
  rj["scaler"] = scaler.to_json();
  write_text(dir / "report.json", rj.dump(2) + "\n");
  write_text(dir / "curves.csv", curves_csv({{to_string(config.architecture), &report}}));
  // Absolute paths so the split manifests work from the run directory.
  auto absolute = [](DatasetManifest m) {
    for (auto& r : m.records) r.path = fs::absolute(m.resolve(r));
    return m;
  };
  write_manifest(dir / "train_manifest.csv", absolute(train_m));
  write_manifest(dir / "test_manifest.csv", absolute(test_m));
  write_snapshot(dir, "train",
                 {{"manifest", manifest_path},
                  {"test_manifest", test_manifest},
                  {"model", mf.to_json()},
                  {"resolved_model_config", config.to_json()},
                  {"train", options.to_json()},
                  {"split", split}});

  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back();
    std::printf("epoch %zu: train mse %.6f mae %.6f | test mse %.6f mae %.6f\n", last.epoch, last.train.mse,
                last.train.mae, last.test.mse, last.test.mae);
  }
  std::printf("checkpoint %s (hash %s)\n", (dir / "model.ckpt").string().c_str(), hash.c_str());
  return kExitOk;
}

int cmd_eval(const std::string& manifest_path, const std::string& checkpoint, bool as_json) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  const ModelConfig& config = ckpt.model.config();
  const DatasetManifest manifest = read_manifest(manifest_path);
  if (manifest.empty()) throw IngestError("manifest " + manifest_path + " has no records");
  const auto examples =
      make_examples(load_samples(manifest, config.input_height, config.input_width), ckpt.scaler, config);
  const Metrics m = evaluate(ckpt.model, examples);
  const NativeMetrics native = evaluate_native(ckpt.model, ckpt.scaler, examples);
  if (as_json) {
    std::cout << json{{"examples", examples.size()},
                      {"architecture", to_string(config.architecture)},
                      {"checkpoint_hash", ckpt.hash},
                      {"normalized", m.to_json()},
                      {"native", native.to_json()}}
                     .dump()
              << "\n";
  } else {
    std::cout << to_string(config.architecture) << " on " << examples.size() << " examples\n"
              << metrics_table(m, native);
  }
  return kExitOk;
}

struct StudyFlags {
  std::string kind;
  std::string manifest;
  std::size_t count = 500;
  std::uint64_t data_seed = 7;
  std::size_t size = 64;
  std::string seeds = "1,2,3";
  std::string arms = "none,vertical,vertical+horizontal";
  std::string archs = "branched,two-stage,monolithic";
  std::size_t epochs = 50;
  std::size_t batch = 32;
  std::string out;
  bool force = false;
};

int cmd_study(StudyFlags f, ModelFlags mf) {
  const auto seeds = parse_seeds(f.seeds);
  if (seeds.size() < 3) throw UsageError("a study needs at least 3 seeds");
  if (f.manifest.empty() && f.count < 5) throw UsageError("--count must be at least 5");
  ModelConfig config = mf.build();
  TrainOptions options = train_options(f.epochs, f.batch, 0);

  Benchmark data;
  if (!f.manifest.empty()) {
    const auto m = read_manifest(f.manifest);
    auto parts = split_samples(load_samples(m, config.input_height, config.input_width), 0.8, f.data_seed);
    data = {std::move(parts.train), std::move(parts.test)};
  } else {
    data = synthetic_benchmark(f.count, f.data_seed, f.size);
  }

  std::vector<std::string> arms;
  std::vector<Architecture> archs;
  if (f.kind == "augmentation") {
    arms = split_list(f.arms);
    try {
      validate_arms(arms);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    options.exact_train_metrics = false;
  } else {
    for (const auto& a : split_list(f.archs)) {
      try {
        archs.push_back(parse_architecture(a));
      } catch (const std::exception& e) {
        throw UsageError(e.what());
      }
    }
    if (archs.empty()) throw UsageError("no architectures given");
  }

  const fs::path dir = run_dir(f.out, seeds.front());
  prepare_out_dir(dir, f.force);
  auto observer = [&](const std::string& arm, std::uint64_t seed, const TrainReport& r) {
    std::string safe = arm;
    for (char& ch : safe) {
      if (ch == '+') ch = '_';
    }
    write_text(dir / ("curves_" + safe + "_seed" + std::to_string(seed) + ".csv"), curves_csv({{arm, &r}}));
    std::fprintf(stderr, "%s seed %llu: final test mae %.4f plateau %.4f (%.0fs)\n", arm.c_str(),
                 static_cast<unsigned long long>(seed), r.epochs.empty() ? 0.0 : r.epochs.back().test.mae,
                 r.epochs.empty() ? 0.0 : plateau_mae(r), r.wall_seconds);
  };

  json summary;
  if (f.kind == "augmentation") {
    const auto report = run_augmentation_study(data, seeds, arms, config, options, observer);
    summary = report.summary();
  } else {
    const auto report = run_architecture_comparison(data, seeds, config, options, archs, observer);
    summary = report.summary();
    const std::string tables = report.tables(f.manifest.empty() ? "synthetic" : "data");
    write_text(dir / "tables.txt", tables);
    std::cout << tables;
  }
  summary["model_config"] = config.to_json();
  summary["train"] = options.to_json();
  summary["data"] = {{"manifest", f.manifest}, {"count", f.count}, {"data_seed", f.data_seed}, {"size", f.size},
                     {"train", data.train.size()}, {"test", data.test.size()}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  write_snapshot(dir, "study " + f.kind,
                 {{"seeds", f.seeds}, {"arms", f.arms}, {"archs", f.archs}, {"epochs", f.epochs}, {"model", mf.to_json()}});
  std::cout << "summary written to " << (dir / "summary.json").string() << "\n";
  return kExitOk;
}

int cmd_predict(const std::string& image_path, const std::string& checkpoint, const std::optional<std::string>& symptoms,
                const std::string& rules_path, bool as_json) {
  std::shared_ptr<const ServiceSnapshot> snap = load_snapshot(checkpoint);
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(image_path);
  } catch (const std::exception& e) {
    throw IngestError(e.what());
  }
  const std::span<const std::uint8_t> view(bytes);
  ApiResponse r;
  if (symptoms) {
    const RuleTable rules = load_rules(rules_path.empty() ? default_config_file("rules.json") : fs::path(rules_path));
    r = handle_recommend(snap, view, *symptoms, rules);
  } else {
    r = handle_predict(snap, view, AqiBreakpoints::us_epa());
  }
  if (as_json) {
    std::cout << r.body.dump() << "\n";
  } else if (r.status == 200) {
    std::cout << r.body.dump(2) << "\n";
  }
  if (r.status != 200) {
    std::cerr << "error: " << r.body["error"]["message"].get<std::string>() << " ("
              << r.body["error"]["code"].get<std::string>() << ")\n";
    return r.status == 422 ? kExitUsage : kExitError;
  }
  return kExitOk;
}

std::atomic<int> g_signal{0};

extern "C" void on_signal(int sig) { g_signal.store(sig); }

int cmd_serve(const std::string& checkpoint, const std::string& rules_path, const std::string& addr,
              const std::string& cors, bool allow_degraded) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw UsageError("--addr must be host:port");
  const std::string host = addr.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("bad port in --addr " + addr);
  }

  RuleTable rules = load_rules(rules_path.empty() ? default_config_file("rules.json") : fs::path(rules_path));
  ServerOptions opts;
  opts.cors_origin = cors;
  InferenceService service(std::move(rules), opts);
  if (checkpoint.empty()) {
    if (!allow_degraded) throw UsageError("--checkpoint is required (or pass --allow-degraded)");
  } else {
    try {
      const std::string hash = service.load(checkpoint);
      std::cerr << json{{"event", "checkpoint_loaded"}, {"path", checkpoint}, {"hash", hash}}.dump() << "\n";
    } catch (const std::exception& e) {
      if (!allow_degraded) throw;
      service.set_checkpoint_path(checkpoint);
      std::cerr << json{{"event", "checkpoint_unavailable"}, {"path", checkpoint}, {"error", e.what()}}.dump() << "\n";
    }
  }

  httplib::Server server;
  service.mount(server);
  if (!server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + addr);
  std::signal(SIGHUP, on_signal);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread listener([&] { server.listen_after_bind(); });
  std::cerr << json{{"event", "listening"}, {"addr", addr}}.dump() << "\n";
  while (true) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    const int sig = g_signal.exchange(0);
    if (sig == SIGHUP) {
      try {
        const std::string hash = service.reload();
        std::cerr << json{{"event", "checkpoint_reloaded"}, {"hash", hash}}.dump() << "\n";
      } catch (const std::exception& e) {
        std::cerr << json{{"event", "reload_failed"}, {"error", e.what()}}.dump() << "\n";
      }
    } else if (sig == SIGINT || sig == SIGTERM) {
      break;
    }
  }
  server.stop();
  listener.join();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"healthcam: estimate air quality from a photo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "healthcam 1.0.0");

  std::size_t count = 0, size = 64;
  std::uint64_t seed = 1;
  std::string out;
  bool force = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic haze dataset (PNG images + manifest.csv)");
  synth->add_option("--count", count, "Number of images")->required();
  synth->add_option("--seed", seed, "Generator seed")->capture_default_str();
  synth->add_option("--size", size, "Square image size in pixels")->capture_default_str();
  synth->add_option("--out", out, "Output directory (default runs/<timestamp>-seed<seed>)");
  synth->add_flag("--force", force, "Replace a non-empty output directory");

  std::string manifest, policy = "vertical";
  bool keep_original = false;
  auto* augment = app.add_subcommand("augment", "Apply split/mirror augmentation to a manifest");
  augment->add_option("--manifest", manifest, "Input manifest.csv")->required();
  augment->add_option("--policy", policy, "none | vertical | horizontal | vertical+horizontal")->capture_default_str();
  augment->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
  augment->add_flag("--keep-original", keep_original, "Also emit each unmodified input");
  augment->add_option("--out", out, "Output directory");
  augment->add_flag("--force", force, "Replace a non-empty output directory");

  ModelFlags train_model;
  std::string test_manifest;
  std::size_t epochs = 50, batch = 32;
  double split = 0.8;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint, report.json and curves.csv");
  train_cmd->add_option("--manifest", manifest, "Training manifest.csv")->required();
  train_cmd->add_option("--test-manifest", test_manifest, "Held-out manifest (default: seeded split of --manifest)");
  train_cmd->add_option("--arch", train_model.arch, "branched | two-stage | monolithic")->capture_default_str();
  train_cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", batch, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--seed", seed, "Init, shuffle and split seed")->capture_default_str();
  train_cmd->add_option("--split", split, "Train fraction when splitting --manifest")->capture_default_str();
  train_cmd->add_option("--out", out, "Run directory");
  train_cmd->add_flag("--force", force, "Replace a non-empty run directory");
  train_model.add(train_cmd);

  std::string checkpoint;
  bool as_json = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval->add_option("--manifest", manifest, "Manifest to evaluate")->required();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_flag("--json", as_json, "Machine-readable output");

  StudyFlags sf;
  ModelFlags study_model;
  study_model.preset = "desk";
  auto* study = app.add_subcommand("study", "Run the augmentation or architecture experiment");
  study->add_option("kind", sf.kind, "augmentation | architecture")
      ->required()
      ->check(CLI::IsMember({"augmentation", "architecture"}));
  study->add_option("--manifest", sf.manifest, "Use this dataset instead of a synthetic benchmark");
  study->add_option("--count", sf.count, "Synthetic benchmark size")->capture_default_str();
  study->add_option("--data-seed", sf.data_seed, "Synthetic data and split seed")->capture_default_str();
  study->add_option("--size", sf.size, "Synthetic image size")->capture_default_str();
  study->add_option("--seeds", sf.seeds, "Comma-separated training seeds (at least 3)")->capture_default_str();
  study->add_option("--arms", sf.arms, "Augmentation arms")->capture_default_str();
  study->add_option("--archs", sf.archs, "Architectures")->capture_default_str();
  study->add_option("--epochs", sf.epochs, "Epochs per run")->capture_default_str();
  study->add_option("--batch-size", sf.batch, "Mini-batch size")->capture_default_str();
  study->add_option("--out", sf.out, "Output directory");
  study->add_flag("--force", sf.force, "Replace a non-empty output directory");
  study_model.add(study);

  std::string image, rules_path;
  std::optional<std::string> symptoms;
  auto* predict = app.add_subcommand("predict", "Predict pollutants for one image (same payload as the HTTP API)");
  predict->add_option("--image", image, "PNG or JPEG file")->required();
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict->add_option("--symptoms", symptoms, "Comma-separated symptoms; adds a recommendation");
  predict->add_option("--rules", rules_path, "Rules file (default config/rules.json)");
  predict->add_flag("--json", as_json, "Compact single-line JSON");

  std::string addr = "127.0.0.1:8080", cors = "*";
  bool allow_degraded = false;
  auto* serve = app.add_subcommand("serve", "Run the HTTP inference service");
  serve->add_option("--checkpoint", checkpoint, "Checkpoint file")->envname("HEALTHCAM_CHECKPOINT");
  serve->add_option("--rules", rules_path, "Rules file")->envname("HEALTHCAM_RULES");
  serve->add_option("--addr", addr, "Bind address host:port")->envname("HEALTHCAM_ADDR")->capture_default_str();
  serve->add_option("--cors-origin", cors, "Access-Control-Allow-Origin value; empty disables CORS")
      ->envname("HEALTHCAM_CORS_ORIGIN")
      ->capture_default_str();
  serve->add_flag("--allow-degraded", allow_degraded, "Start without a loadable checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(count, seed, size, out, force);
    if (*augment) return cmd_augment(manifest, policy, seed, keep_original, out, force);
    if (*train_cmd) return cmd_train(manifest, test_manifest, train_model, epochs, batch, seed, split, out, force);
    if (*eval) return cmd_eval(manifest, checkpoint, as_json);
    if (*study) return cmd_study(sf, study_model);
    if (*predict) return cmd_predict(image, checkpoint, symptoms, rules_path, as_json);
    if (*serve) return cmd_serve(checkpoint, rules_path, addr, cors, allow_degraded);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}
