#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "healthcam/pollutants.hpp"

namespace healthcam {

class DegenerateParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using ScaledLabels = std::array<double, kPollutantCount>;

/// Per-parameter min-max scaling fitted on training labels. Values outside
/// the fitted range map outside [0,1]; nothing is clamped.
class LabelScaler {
 public:
  LabelScaler() = default;
  LabelScaler(std::array<double, kPollutantCount> min, std::array<double, kPollutantCount> max)
      : min_(min), max_(max) {
    validate();
  }

  static LabelScaler fit(std::span<const PollutantVector> train_labels) {
    if (train_labels.empty()) throw std::invalid_argument("fit_scaler: no training labels");
    std::array<double, kPollutantCount> lo = train_labels.front().values;
    std::array<double, kPollutantCount> hi = lo;
    for (const auto& v : train_labels) {
      for (std::size_t i = 0; i < kPollutantCount; ++i) {
        lo[i] = std::min(lo[i], v[i]);
        hi[i] = std::max(hi[i], v[i]);
      }
    }
    return LabelScaler(lo, hi);
  }

  ScaledLabels scale(const PollutantVector& v) const {
    ScaledLabels out;
    for (std::size_t i = 0; i < kPollutantCount; ++i) out[i] = (v[i] - min_[i]) / (max_[i] - min_[i]);
    return out;
  }

  PollutantVector unscale(std::span<const double, kPollutantCount> scaled) const {
    PollutantVector out;
    for (std::size_t i = 0; i < kPollutantCount; ++i) out[i] = min_[i] + scaled[i] * (max_[i] - min_[i]);
    return out;
  }

  double unscale(std::size_t param, double scaled) const {
    return min_.at(param) + scaled * (max_.at(param) - min_.at(param));
  }

  const std::array<double, kPollutantCount>& min() const noexcept { return min_; }
  const std::array<double, kPollutantCount>& max() const noexcept { return max_; }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < kPollutantCount; ++i) {
      j[std::string(kPollutantNames[i])] = {{"min", min_[i]}, {"max", max_[i]}};
    }
    return j;
  }

  static LabelScaler from_json(const nlohmann::json& j) {
    std::array<double, kPollutantCount> lo{}, hi{};
    for (std::size_t i = 0; i < kPollutantCount; ++i) {
      const auto& entry = j.at(std::string(kPollutantNames[i]));
      lo[i] = entry.at("min").get<double>();
      hi[i] = entry.at("max").get<double>();
    }
    return LabelScaler(lo, hi);
  }

  friend bool operator==(const LabelScaler&, const LabelScaler&) = default;

 private:
  void validate() const {
    for (std::size_t i = 0; i < kPollutantCount; ++i) {
      if (!(max_[i] > min_[i])) {
        throw DegenerateParameterError("label scaler: parameter '" + std::string(kPollutantNames[i]) +
                                       "' has max <= min; cannot scale a constant column");
      }
    }
  }

  std::array<double, kPollutantCount> min_{};
  std::array<double, kPollutantCount> max_{};
};

}  // namespace healthcam
