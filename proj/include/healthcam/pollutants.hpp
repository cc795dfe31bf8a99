#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace healthcam {

/// Order of the seven regression targets everywhere in the project. The
/// first two form the particulate head, the remaining five the second head.
enum class Pollutant : std::size_t { Pm25 = 0, Pm10, So2, O3, No2, Co, Aqi };

inline constexpr std::size_t kPollutantCount = 7;
inline constexpr std::size_t kParticulateCount = 2;
inline constexpr std::size_t kSecondaryCount = 5;

inline constexpr std::array<std::string_view, kPollutantCount> kPollutantNames = {
    "pm25", "pm10", "so2", "o3", "no2", "co", "aqi"};

inline constexpr std::array<std::string_view, kPollutantCount> kPollutantUnits = {
    "ug/m3", "ug/m3", "ug/m3", "ug/m3", "ug/m3", "mg/m3", "index"};

inline std::string_view pollutant_name(Pollutant p) { return kPollutantNames[static_cast<std::size_t>(p)]; }

inline std::optional<Pollutant> parse_pollutant(std::string_view name) {
  for (std::size_t i = 0; i < kPollutantCount; ++i) {
    if (kPollutantNames[i] == name) return static_cast<Pollutant>(i);
  }
  return std::nullopt;
}

struct PollutantVector {
  std::array<double, kPollutantCount> values{};

  double& operator[](Pollutant p) { return values[static_cast<std::size_t>(p)]; }
  double operator[](Pollutant p) const { return values[static_cast<std::size_t>(p)]; }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  double pm25() const { return (*this)[Pollutant::Pm25]; }
  double pm10() const { return (*this)[Pollutant::Pm10]; }

  bool non_negative() const {
    for (double v : values) {
      if (!(v >= 0.0)) return false;
    }
    return true;
  }

  friend bool operator==(const PollutantVector&, const PollutantVector&) = default;
};

}  // namespace healthcam
