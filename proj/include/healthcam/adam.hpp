#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace healthcam {

class NonFiniteGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

/// One Adam update:
///   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), with bias-corrected m_hat, v_hat.
/// Gradients are checked for finiteness before any parameter is touched.
template <typename T>
void adam_step(const std::vector<std::span<T>>& params, const std::vector<std::vector<T>>& grads,
               AdamState<T>& state) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient block counts differ");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) {
      throw std::invalid_argument("adam_step: block " + std::to_string(b) + " shape mismatch");
    }
    for (std::size_t i = 0; i < grads[b].size(); ++i) {
      if (!std::isfinite(grads[b][i])) {
        throw NonFiniteGradientError("adam_step: non-finite gradient in block " + std::to_string(b) + " at index " +
                                     std::to_string(i) + " (step " + std::to_string(state.step + 1) + ")");
      }
    }
  }
  if (state.m.empty()) {
    for (const auto& g : grads) {
      state.m.emplace_back(g.size(), T{0});
      state.v.emplace_back(g.size(), T{0});
    }
  }
  if (state.m.size() != grads.size()) throw std::invalid_argument("adam_step: state does not match parameters");

  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      const double mi = c.beta1 * static_cast<double>(m[i]) + (1.0 - c.beta1) * g;
      const double vi = c.beta2 * static_cast<double>(v[i]) + (1.0 - c.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      params[b][i] = static_cast<T>(static_cast<double>(params[b][i]) - c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon));
    }
  }
}

}  // namespace healthcam
