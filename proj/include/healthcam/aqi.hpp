#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace healthcam {

enum class AqiClass { Good = 0, Moderate, UnhealthySensitive, Unhealthy, VeryUnhealthy, Severe };

inline constexpr std::size_t kAqiClassCount = 6;

inline constexpr std::array<std::string_view, kAqiClassCount> kAqiClassNames = {
    "Good", "Moderate", "UnhealthySensitive", "Unhealthy", "VeryUnhealthy", "Severe"};

inline std::string_view to_string(AqiClass c) { return kAqiClassNames[static_cast<std::size_t>(c)]; }

inline std::optional<AqiClass> parse_aqi_class(std::string_view name) {
  for (std::size_t i = 0; i < kAqiClassCount; ++i) {
    if (kAqiClassNames[i] == name) return static_cast<AqiClass>(i);
  }
  return std::nullopt;
}

/// Upper PM2.5 bound (ug/m3, inclusive) of each class except the last, which
/// is open-ended. A value equal to a bound belongs to the lower class.
struct AqiBreakpoints {
  std::string scale = "us-epa-pm25-24h";
  std::array<double, kAqiClassCount - 1> upper = {12.0, 35.4, 55.4, 150.4, 250.4};

  static AqiBreakpoints us_epa() { return {}; }

  void validate() const {
    for (std::size_t i = 0; i < upper.size(); ++i) {
      if (!(upper[i] > 0.0) || (i > 0 && !(upper[i] > upper[i - 1]))) {
        throw std::invalid_argument("AQI breakpoints must be positive and strictly increasing");
      }
    }
  }

  AqiClass classify(double pm25) const {
    if (!(pm25 >= 0.0)) throw std::domain_error("classify_aqi: PM2.5 must be non-negative");
    for (std::size_t i = 0; i < upper.size(); ++i) {
      if (pm25 <= upper[i]) return static_cast<AqiClass>(i);
    }
    return AqiClass::Severe;
  }

  /// Lower bound (exclusive) of a class; 0 for Good.
  double lower_bound(AqiClass c) const {
    const auto i = static_cast<std::size_t>(c);
    return i == 0 ? 0.0 : upper[i - 1];
  }
};

inline AqiClass classify_aqi(double pm25, const AqiBreakpoints& table = AqiBreakpoints::us_epa()) {
  return table.classify(pm25);
}

/// Reads `{"scale": "...", "classes": [{"name": "Good", "upper": 12.0}, ...]}`
/// with the six classes in order and `upper: null` on the last.
inline AqiBreakpoints load_aqi_breakpoints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open AQI breakpoint table " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("AQI breakpoint table " + path.string() + ": " + e.what());
  }
  AqiBreakpoints table;
  table.scale = doc.value("scale", "custom");
  const auto& classes = doc.at("classes");
  if (!classes.is_array() || classes.size() != kAqiClassCount) {
    throw std::runtime_error("AQI breakpoint table must list exactly 6 classes");
  }
  for (std::size_t i = 0; i < kAqiClassCount; ++i) {
    const auto& entry = classes[i];
    if (entry.at("name").get<std::string>() != kAqiClassNames[i]) {
      throw std::runtime_error("AQI breakpoint table: class " + std::to_string(i) + " must be " +
                               std::string(kAqiClassNames[i]));
    }
    if (i + 1 < kAqiClassCount) table.upper[i] = entry.at("upper").get<double>();
  }
  table.validate();
  return table;
}

/// Continuous piecewise-linear AQI sub-index for PM2.5 through the class
/// bounds (0->0, 12->50, 35.4->100, 55.4->150, 150.4->200, 250.4->300,
/// 500.4->500), extrapolated linearly beyond the last knot.
inline double aqi_from_pm25(double pm25) {
  static constexpr std::array<double, 7> conc = {0.0, 12.0, 35.4, 55.4, 150.4, 250.4, 500.4};
  static constexpr std::array<double, 7> index = {0.0, 50.0, 100.0, 150.0, 200.0, 300.0, 500.0};
  std::size_t seg = 0;
  while (seg + 2 < conc.size() && pm25 > conc[seg + 1]) ++seg;
  const double t = (pm25 - conc[seg]) / (conc[seg + 1] - conc[seg]);
  return index[seg] + t * (index[seg + 1] - index[seg]);
}

}  // namespace healthcam
