#pragma once

// Transport-independent request handlers shared by the HTTP service and the
// CLI `predict` command, so both produce identical payloads.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "healthcam/aqi.hpp"
#include "healthcam/checkpoint.hpp"
#include "healthcam/image_io.hpp"
#include "healthcam/recommendation.hpp"

namespace healthcam {

inline constexpr std::size_t kMaxUploadBytes = 10u * 1024u * 1024u;
inline constexpr std::size_t kMinImageSide = 32;
inline constexpr const char* kApiVersion = "1";

/// A request failure with its HTTP status and a stable machine-readable code.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message, nlohmann::json details = nullptr)
      : std::runtime_error(message), status_(status), code_(std::move(code)), details_(std::move(details)) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

  nlohmann::json body() const {
    nlohmann::json err = {{"code", code_}, {"message", what()}};
    if (!details_.is_null()) err["details"] = details_;
    return {{"error", err}};
  }

 private:
  int status_;
  std::string code_;
  nlohmann::json details_;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// An immutable loaded checkpoint. Requests hold a shared_ptr to one for their
/// whole lifetime, so a reload never affects a request in flight.
struct ServiceSnapshot {
  Checkpoint checkpoint;
  std::string path;
};

class SnapshotHolder {
 public:
  std::shared_ptr<const ServiceSnapshot> get() const {
    std::lock_guard lock(mutex_);
    return current_;
  }
  void set(std::shared_ptr<const ServiceSnapshot> next) {
    std::lock_guard lock(mutex_);
    current_ = std::move(next);
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const ServiceSnapshot> current_;
};

inline std::shared_ptr<const ServiceSnapshot> load_snapshot(const std::filesystem::path& path) {
  auto snap = std::make_shared<ServiceSnapshot>();
  snap->checkpoint = load_checkpoint(path);
  snap->path = path.string();
  return snap;
}

inline void check_upload_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() > kMaxUploadBytes) {
    throw ApiError(413, "payload_too_large", "image exceeds the 10 MiB upload limit",
                   {{"limit_bytes", kMaxUploadBytes}, {"received_bytes", bytes.size()}});
  }
}

/// Validates and decodes an upload. Size is checked before decoding.
inline RgbImage decode_upload(std::span<const std::uint8_t> bytes) {
  check_upload_size(bytes);
  if (bytes.empty()) throw ApiError(400, "missing_image", "no image data in the 'image' field");
  RgbImage image;
  try {
    image = decode_rgb(bytes);
  } catch (const std::exception& e) {
    throw ApiError(400, "undecodable_image", "image could not be decoded as PNG or JPEG", {{"reason", e.what()}});
  }
  if (image.height < kMinImageSide || image.width < kMinImageSide) {
    throw ApiError(400, "image_too_small", "image too small",
                   {{"height", image.height}, {"width", image.width}, {"min_side", kMinImageSide}});
  }
  return image;
}

inline SymptomProfile parse_symptom_field(std::string_view text) {
  try {
    return SymptomProfile::parse(text);
  } catch (const UnknownSymptomError& e) {
    nlohmann::json vocab = nlohmann::json::array();
    for (auto s : kSymptomVocabulary) vocab.push_back(std::string(s));
    throw ApiError(422, "unknown_symptom", "unknown symptom '" + e.token() + "'",
                   {{"token", e.token()}, {"vocabulary", vocab}});
  }
}

struct Prediction {
  std::array<double, kPollutantCount> raw{};  // head outputs, normalized scale
  PollutantVector values;                     // native units
  AqiClass aqi_class = AqiClass::Good;
};

inline Prediction run_prediction(const ServiceSnapshot& snap, const RgbImage& image,
                                 const AqiBreakpoints& breakpoints) {
  const Model& model = snap.checkpoint.model;
  const ModelConfig& cfg = model.config();
  const ImageTensor input = resize_nearest(to_tensor(image), cfg.input_height, cfg.input_width);
  auto [particulate, secondary] = model.predict(input);
  Prediction p;
  for (std::size_t i = 0; i < kParticulateCount; ++i) p.raw[i] = particulate[i];
  for (std::size_t i = 0; i < kSecondaryCount; ++i) p.raw[kParticulateCount + i] = secondary[i];
  p.values = snap.checkpoint.scaler.unscale(p.raw);
  p.aqi_class = breakpoints.classify(std::max(0.0, p.values.pm25()));
  return p;
}

inline nlohmann::json prediction_json(const ServiceSnapshot& snap, const Prediction& p) {
  nlohmann::json pollutants = nlohmann::json::array();
  for (std::size_t i = 0; i < kPollutantCount; ++i) {
    pollutants.push_back({{"name", std::string(kPollutantNames[i])},
                          {"value", p.values[i]},
                          {"unit", std::string(kPollutantUnits[i])},
                          {"normalized", p.raw[i]}});
  }
  return {{"pollutants", pollutants},
          {"aqi_class", std::string(to_string(p.aqi_class))},
          {"model",
           {{"architecture", to_string(snap.checkpoint.model.config().architecture)},
            {"checkpoint_hash", snap.checkpoint.hash}}}};
}

namespace detail {

inline const ServiceSnapshot& require_snapshot(const std::shared_ptr<const ServiceSnapshot>& snap) {
  if (!snap) throw ApiError(503, "no_checkpoint", "no checkpoint is loaded");
  return *snap;
}

template <class F>
ApiResponse timed(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  try {
    nlohmann::json body = f();
    body["latency_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {200, std::move(body)};
  } catch (const ApiError& e) {
    return {e.status(), e.body()};
  }
}

}  // namespace detail

/// POST /api/predict.
inline ApiResponse handle_predict(const std::shared_ptr<const ServiceSnapshot>& snap,
                                  std::optional<std::span<const std::uint8_t>> image, const AqiBreakpoints& breakpoints) {
  return detail::timed([&] {
    const ServiceSnapshot& s = detail::require_snapshot(snap);
    if (!image) throw ApiError(400, "missing_image", "multipart field 'image' is required");
    const RgbImage decoded = decode_upload(*image);
    return prediction_json(s, run_prediction(s, decoded, breakpoints));
  });
}

/// POST /api/recommend. The recommendation is computed from the same
/// prediction that is returned.
inline ApiResponse handle_recommend(const std::shared_ptr<const ServiceSnapshot>& snap,
                                    std::optional<std::span<const std::uint8_t>> image,
                                    std::optional<std::string_view> symptoms, const RuleTable& rules) {
  return detail::timed([&] {
    const ServiceSnapshot& s = detail::require_snapshot(snap);
    if (!image) throw ApiError(400, "missing_image", "multipart field 'image' is required");
    check_upload_size(*image);
    const SymptomProfile profile = parse_symptom_field(symptoms.value_or("none"));
    const RgbImage decoded = decode_upload(*image);
    const Prediction p = run_prediction(s, decoded, rules.breakpoints);
    nlohmann::json body = prediction_json(s, p);
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : profile.conditions()) list.push_back(c);
    body["symptoms"] = list;
    body["recommendation"] = recommend(p.values, profile, rules).to_json();
    body["recommendation"]["policy_version"] = rules.policy_version;
    body["recommendation"]["disclaimer"] = rules.disclaimer;
    return body;
  });
}

/// GET /api/health. Always 200; status is "degraded" until a checkpoint loads.
inline ApiResponse handle_health(const std::shared_ptr<const ServiceSnapshot>& snap) {
  nlohmann::json body = {{"status", snap ? "ok" : "degraded"}, {"api_version", kApiVersion},
                         {"checkpoint_loaded", snap != nullptr}};
  body["checkpoint_hash"] = snap ? nlohmann::json(snap->checkpoint.hash) : nlohmann::json(nullptr);
  return {200, body};
}

/// GET /api/model.
inline ApiResponse handle_model(const std::shared_ptr<const ServiceSnapshot>& snap, const RuleTable& rules) {
  try {
    const ServiceSnapshot& s = detail::require_snapshot(snap);
    const ModelConfig& cfg = s.checkpoint.model.config();
    nlohmann::json pollutants = nlohmann::json::array();
    for (std::size_t i = 0; i < kPollutantCount; ++i) {
      pollutants.push_back({{"name", std::string(kPollutantNames[i])}, {"unit", std::string(kPollutantUnits[i])}});
    }
    nlohmann::json vocab = nlohmann::json::array();
    for (auto v : kSymptomVocabulary) vocab.push_back(std::string(v));
    nlohmann::json classes = nlohmann::json::array();
    for (auto c : kAqiClassNames) classes.push_back(std::string(c));
    return {200,
            {{"architecture", to_string(cfg.architecture)},
             {"checkpoint_hash", s.checkpoint.hash},
             {"config", cfg.to_json()},
             {"input", {{"height", cfg.input_height}, {"width", cfg.input_width}, {"channels", cfg.input_channels}}},
             {"parameter_count", s.checkpoint.model.parameter_count()},
             {"scaler", s.checkpoint.scaler.to_json()},
             {"pollutants", pollutants},
             {"aqi_classes", classes},
             {"symptoms", vocab},
             {"rules", {{"policy_version", rules.policy_version}, {"disclaimer", rules.disclaimer}}},
             {"limits", {{"max_upload_bytes", kMaxUploadBytes}, {"min_image_side", kMinImageSide}}}}};
  } catch (const ApiError& e) {
    return {e.status(), e.body()};
  }
}

}  // namespace healthcam
