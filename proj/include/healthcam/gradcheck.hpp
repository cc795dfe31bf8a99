#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

#include "healthcam/tensor.hpp"

namespace healthcam {

/// Central-difference gradient of a scalar function, one coordinate at a time:
/// (f(x + h e_i) - f(x - h e_i)) / 2h.
template <typename F>
Tensor<double> finite_difference_gradient(F&& f, const Tensor<double>& at, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be positive");
  Tensor<double> probe = at;
  Tensor<double> grad(at.shape());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double x = at[i];
    probe[i] = x + step;
    const double up = static_cast<double>(f(probe));
    probe[i] = x - step;
    const double down = static_cast<double>(f(probe));
    probe[i] = x;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps coordinates whose true
/// gradient is ~0 from dominating through round-off.
inline double relative_error(double a, double b, double floor = 1e-6) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-6) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("max_relative_error: gradient lengths differ");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, relative_error(analytic[i], numeric[i], floor));
  }
  return worst;
}

}  // namespace healthcam
