#pragma once

// Brute-force references and finite-difference checks shared by the unit
// tests and the acceptance binary. Deliberately naive: plain nested loops
// straight from the definitions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "healthcam/gradcheck.hpp"
#include "healthcam/kernels.hpp"
#include "healthcam/model.hpp"
#include "healthcam/rng.hpp"

namespace oracle {

using healthcam::ConvFilterBank;
using healthcam::DenseLayer;
using healthcam::Rng;
using healthcam::Tensor;

template <typename T>
Tensor<T> random_tensor(const healthcam::Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
ConvFilterBank<T> random_bank(std::size_t count, std::size_t kh, std::size_t kw, std::size_t cin, Rng& rng) {
  ConvFilterBank<T> b(count, kh, kw, cin);
  for (auto& v : b.weights) v = static_cast<T>(rng.uniform(-1, 1));
  for (auto& v : b.bias) v = static_cast<T>(rng.uniform(-1, 1));
  return b;
}

template <typename T>
DenseLayer<T> random_dense(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer<T> d(in, out);
  for (auto& v : d.weights) v = static_cast<T>(rng.uniform(-1, 1));
  for (auto& v : d.bias) v = static_cast<T>(rng.uniform(-1, 1));
  return d;
}

// Valid cross-correlation, stride 1, accumulated in long double.
template <typename T>
Tensor<T> conv(const Tensor<T>& x, const ConvFilterBank<T>& b) {
  const std::size_t oh = x.dim(0) - b.kh + 1, ow = x.dim(1) - b.kw + 1;
  Tensor<T> y({oh, ow, b.count});
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c)
      for (std::size_t f = 0; f < b.count; ++f) {
        long double s = b.bias[f];
        for (std::size_t i = 0; i < b.kh; ++i)
          for (std::size_t j = 0; j < b.kw; ++j)
            for (std::size_t ch = 0; ch < b.in_channels; ++ch)
              s += static_cast<long double>(x.at(r + i, c + j, ch)) * b.weight(f, i, j, ch);
        y.at(r, c, f) = static_cast<T>(s);
      }
  return y;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const DenseLayer<T>& d) {
  Tensor<T> y({d.outputs});
  for (std::size_t m = 0; m < d.outputs; ++m) {
    long double s = d.bias[m];
    for (std::size_t n = 0; n < d.inputs; ++n) s += static_cast<long double>(d.weights[m * d.inputs + n]) * x[n];
    y[m] = static_cast<T>(s);
  }
  return y;
}

template <typename T>
Tensor<T> maxpool(const Tensor<T>& x) {
  const std::size_t oh = x.dim(0) / 2, ow = x.dim(1) / 2, ch = x.dim(2);
  Tensor<T> y({oh, ow, ch});
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c)
      for (std::size_t k = 0; k < ch; ++k)
        y.at(r, c, k) = std::max({x.at(2 * r, 2 * c, k), x.at(2 * r, 2 * c + 1, k), x.at(2 * r + 1, 2 * c, k),
                                  x.at(2 * r + 1, 2 * c + 1, k)});
  return y;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double worst = a.shape() == b.shape() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return worst;
}

/// Small config for the full-model gradient oracle: three conv/pool stages
/// need at least 22 px; 30 px leaves a 2x2 map so the flatten is 8 wide.
inline healthcam::ModelConfig gradcheck_config(healthcam::Architecture arch = healthcam::Architecture::Branched) {
  healthcam::ModelConfig c;
  c.input_height = c.input_width = 30;
  c.input_channels = 3;
  c.conv_filters = {2, 2, 2};
  c.hidden_units = 4;
  c.architecture = arch;
  return c;
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t parameters = 0;
};

/// Loss = mse(particulate, t1) + mse(secondary, t2) on one random image.
/// Compares model.backward against central differences over every parameter.
inline GradCheckResult full_model_gradcheck(std::uint64_t seed,
                                            healthcam::Architecture arch = healthcam::Architecture::Branched) {
  using namespace healthcam;
  const ModelConfig cfg = gradcheck_config(arch);
  BasicModel<double> model = BasicModel<float>::build(cfg, seed).cast<double>();
  Rng rng(derive_seed(seed, 77));
  const Tensor<double> x = random_tensor<double>({cfg.input_height, cfg.input_width, cfg.input_channels}, rng, 0, 1);
  const Tensor<double> t1 = random_tensor<double>({kParticulateCount}, rng, 0, 1);
  const Tensor<double> t2 = random_tensor<double>({kSecondaryCount}, rng, 0, 1);

  auto trace = model.forward(x);
  auto grads = model.backward(trace, mse_gradient(trace.particulate, t1), mse_gradient(trace.secondary, t2));

  std::vector<double> analytic, flat;
  for (const auto& b : grads.blocks) analytic.insert(analytic.end(), b.begin(), b.end());
  for (const auto& b : model.parameter_blocks()) flat.insert(flat.end(), b.begin(), b.end());

  auto loss_at = [&](const Tensor<double>& params) {
    auto blocks = model.mutable_parameter_blocks();
    std::size_t k = 0;
    for (auto& b : blocks)
      for (auto& v : b) v = params[k++];
    auto [p, s] = model.predict(x);
    return mse(p, t1) + mse(s, t2);
  };
  const Tensor<double> at({flat.size()}, flat);
  const Tensor<double> numeric = finite_difference_gradient(loss_at, at, 1e-6);
  return {max_relative_error(analytic, numeric.values(), 1e-6), flat.size()};
}

}  // namespace oracle
