#pragma once

// Forward and backward kernels for the convolutional regressor. All kernels
// are pure functions; backward passes read what the forward pass left in a
// context object and reject a context that was never filled.

#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "healthcam/tensor.hpp"

namespace healthcam {

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Convolution

/// Filter weights laid out count x kh x kw x in_channels, one bias per filter.
template <typename T>
struct ConvFilterBank {
  std::size_t count = 0;
  std::size_t kh = 3;
  std::size_t kw = 3;
  std::size_t in_channels = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  ConvFilterBank() = default;
  ConvFilterBank(std::size_t count_, std::size_t kh_, std::size_t kw_, std::size_t in_channels_)
      : count(count_), kh(kh_), kw(kw_), in_channels(in_channels_),
        weights(count_ * kh_ * kw_ * in_channels_, T{0}), bias(count_, T{0}) {}

  std::size_t patch_size() const noexcept { return kh * kw * in_channels; }
  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }

  T& weight(std::size_t f, std::size_t ky, std::size_t kx, std::size_t c) {
    return weights[((f * kh + ky) * kw + kx) * in_channels + c];
  }
  const T& weight(std::size_t f, std::size_t ky, std::size_t kx, std::size_t c) const {
    return weights[((f * kh + ky) * kw + kx) * in_channels + c];
  }
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;  // left empty when the caller does not need it
  std::vector<T> weights;
  std::vector<T> bias;
};

template <typename T>
struct ConvContext {
  std::optional<Tensor<T>> input;
};

namespace detail {

template <typename T>
void check_conv_operands(const Tensor<T>& input, const ConvFilterBank<T>& bank) {
  require_rank(input, 3, "conv2d");
  if (input.dim(2) != bank.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(2)) +
                     " channels but filter bank expects " + std::to_string(bank.in_channels));
  }
  if (input.dim(0) < bank.kh || input.dim(1) < bank.kw) {
    throw ShapeError("conv2d: input " + shape_string(input.shape()) + " smaller than kernel " +
                     std::to_string(bank.kh) + "x" + std::to_string(bank.kw));
  }
  if (bank.weights.size() != bank.count * bank.patch_size() || bank.bias.size() != bank.count) {
    throw ShapeError("conv2d: filter bank storage inconsistent with its dimensions");
  }
}

template <std::size_t Chunk, typename T>
void gemm_columns(std::size_t m, std::size_t n, std::size_t k, std::size_t j0, const T* a, const T* b, T* c) {
  // GCC/Clang vector extension: one Chunk-wide register tile per row of C,
  // four rows at a time to hide FMA latency.
  using Vec [[gnu::vector_size(Chunk * sizeof(T))]] = T;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    Vec acc[4];
    for (std::size_t r = 0; r < 4; ++r) std::memcpy(&acc[r], c + (i + r) * n + j0, sizeof(Vec));
    const T* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      Vec bv;
      std::memcpy(&bv, b + p * n + j0, sizeof(Vec));
      acc[0] += a0[p] * bv;
      acc[1] += a0[k + p] * bv;
      acc[2] += a0[2 * k + p] * bv;
      acc[3] += a0[3 * k + p] * bv;
    }
    for (std::size_t r = 0; r < 4; ++r) std::memcpy(c + (i + r) * n + j0, &acc[r], sizeof(Vec));
  }
  for (; i < m; ++i) {
    T* crow = c + i * n + j0;
    Vec acc;
    std::memcpy(&acc, crow, sizeof(Vec));
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      Vec bv;
      std::memcpy(&bv, b + p * n + j0, sizeof(Vec));
      acc += arow[p] * bv;
    }
    std::memcpy(crow, &acc, sizeof(Vec));
  }
}

/// C[M x N] += A[M x K] * B[K x N], all row-major and densely packed. Columns
/// of C are processed in fixed-width chunks held in registers; the summation
/// order over K is fixed, so results are reproducible.
template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  std::size_t j0 = 0;
  for (; j0 + 16 <= n; j0 += 16) gemm_columns<16>(m, n, k, j0, a, b, c);
  for (; j0 + 8 <= n; j0 += 8) gemm_columns<8>(m, n, k, j0, a, b, c);
  for (; j0 + 4 <= n; j0 += 4) gemm_columns<4>(m, n, k, j0, a, b, c);
  for (; j0 < n; ++j0) gemm_columns<1>(m, n, k, j0, a, b, c);
}

template <typename T>
std::vector<T> transpose(const T* src, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  }
  return out;
}

/// Patch matrix: one row per output position, kh*kw*cin columns in filter order.
template <typename T>
std::vector<T> im2col(const Tensor<T>& input, std::size_t kh, std::size_t kw) {
  const std::size_t in_w = input.dim(1), cin = input.dim(2);
  const std::size_t out_h = input.dim(0) - kh + 1, out_w = in_w - kw + 1;
  const std::size_t row_len = kw * cin, k_total = kh * row_len;
  std::vector<T> patches(out_h * out_w * k_total);
  T* dst = patches.data();
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const T* src = input.data() + ((oy + ky) * in_w + ox) * cin;
        std::copy_n(src, row_len, dst);
        dst += row_len;
      }
    }
  }
  return patches;
}

}  // namespace detail

/// Valid (unpadded, unit-step) 2-D convolution: (H, W, Cin) -> (H-kh+1, W-kw+1, count).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvFilterBank<T>& bank) {
  detail::check_conv_operands(input, bank);
  const std::size_t out_h = input.dim(0) - bank.kh + 1;
  const std::size_t out_w = input.dim(1) - bank.kw + 1;
  const std::size_t nf = bank.count, k_total = bank.patch_size();
  const std::vector<T> patches = detail::im2col(input, bank.kh, bank.kw);
  const std::vector<T> wt = detail::transpose(bank.weights.data(), nf, k_total);

  Tensor<T> out({out_h, out_w, nf});
  T* o = out.data();
  for (std::size_t pos = 0; pos < out_h * out_w; ++pos) std::copy_n(bank.bias.data(), nf, o + pos * nf);
  detail::gemm_accumulate(out_h * out_w, nf, k_total, patches.data(), wt.data(), o);
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const ConvContext<T>& ctx, const ConvFilterBank<T>& bank,
                             const Tensor<T>& upstream, bool want_input_grad = true) {
  if (!ctx.input) throw TapeError("conv2d_backward: no forward pass recorded");
  const Tensor<T>& input = *ctx.input;
  detail::check_conv_operands(input, bank);
  const std::size_t in_w = input.dim(1), cin = bank.in_channels;
  const std::size_t out_h = input.dim(0) - bank.kh + 1;
  const std::size_t out_w = in_w - bank.kw + 1;
  const std::size_t npos = out_h * out_w;
  const std::size_t nf = bank.count;
  const std::size_t row_len = bank.kw * cin;
  const std::size_t k_total = bank.patch_size();
  if (upstream.shape() != Shape{out_h, out_w, nf}) {
    throw ShapeError("conv2d_backward: upstream gradient " + shape_string(upstream.shape()) +
                     " does not match output " + shape_string({out_h, out_w, nf}));
  }

  ConvGrads<T> grads;
  grads.bias.assign(nf, T{0});
  const T* g = upstream.data();
  for (std::size_t pos = 0; pos < npos; ++pos) {
    for (std::size_t f = 0; f < nf; ++f) grads.bias[f] += g[pos * nf + f];
  }

  // dW (nf x K) = G^T (nf x npos) * P (npos x K)
  const std::vector<T> patches = detail::im2col(input, bank.kh, bank.kw);
  const std::vector<T> g_t = detail::transpose(g, npos, nf);
  grads.weights.assign(nf * k_total, T{0});
  detail::gemm_accumulate(nf, k_total, npos, g_t.data(), patches.data(), grads.weights.data());

  if (want_input_grad) {
    // dP (npos x K) = G (npos x nf) * W (nf x K), then scatter patches back.
    std::vector<T> dpatches(npos * k_total, T{0});
    detail::gemm_accumulate(npos, k_total, nf, g, bank.weights.data(), dpatches.data());
    grads.input = Tensor<T>(input.shape());
    const T* src = dpatches.data();
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        for (std::size_t ky = 0; ky < bank.kh; ++ky) {
          T* dst = grads.input.data() + ((oy + ky) * in_w + ox) * cin;
          for (std::size_t k = 0; k < row_len; ++k) dst[k] += src[k];
          src += row_len;
        }
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Max pooling, 2x2 windows at step 2. A trailing odd row/column is dropped.

template <typename T>
struct PoolContext {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input index of each output cell's winner
};

template <typename T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& input, PoolContext<T>* ctx = nullptr) {
  require_rank(input, 3, "maxpool2x2");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (h < 2 || w < 2) {
    throw ShapeError("maxpool2x2: input " + shape_string(input.shape()) + " smaller than 2x2 window");
  }
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor<T> out({oh, ow, c});
  if (ctx) {
    ctx->input_shape = input.shape();
    ctx->argmax.assign(out.size(), 0);
  }
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        // Row-major scan with strict '>' keeps the first winner on ties.
        std::size_t best = ((2 * oy) * w + 2 * ox) * c + ch;
        T best_v = input[best];
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * oy + dy) * w + (2 * ox + dx)) * c + ch;
            if (input[idx] > best_v) {
              best_v = input[idx];
              best = idx;
            }
          }
        }
        const std::size_t o = (oy * ow + ox) * c + ch;
        out[o] = best_v;
        if (ctx) ctx->argmax[o] = best;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const PoolContext<T>& ctx, const Tensor<T>& upstream) {
  if (ctx.input_shape.empty()) throw TapeError("maxpool2x2_backward: no forward pass recorded");
  if (upstream.size() != ctx.argmax.size()) {
    throw ShapeError("maxpool2x2_backward: upstream gradient " + shape_string(upstream.shape()) +
                     " does not match recorded output");
  }
  Tensor<T> grad(ctx.input_shape);
  for (std::size_t o = 0; o < ctx.argmax.size(); ++o) grad[ctx.argmax[o]] += upstream[o];
  return grad;
}

// ---------------------------------------------------------------------------
// LeakyReLU

inline constexpr double kDefaultLeakySlope = 0.01;

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, T slope) {
  Tensor<T> out = input;
  for (T& v : out.values()) v = v > T{0} ? v : slope * v;
  return out;
}

/// Derivative is 1 for x > 0 and `slope` otherwise (including x == 0).
template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& input, const Tensor<T>& upstream, T slope) {
  require_same_shape(input, upstream, "leaky_relu_backward");
  Tensor<T> grad = upstream;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(input[i] > T{0})) grad[i] *= slope;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Fully connected layer: y = W x + b with W stored M x N row-major.

template <typename T>
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out)
      : inputs(in), outputs(out), weights(in * out, T{0}), bias(out, T{0}) {}

  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
};

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  std::vector<T> weights;
  std::vector<T> bias;
};

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const DenseLayer<T>& layer) {
  if (input.size() != layer.inputs) {
    throw ShapeError("dense: input length " + std::to_string(input.size()) +
                     " does not match layer width " + std::to_string(layer.inputs));
  }
  if (layer.weights.size() != layer.inputs * layer.outputs || layer.bias.size() != layer.outputs) {
    throw ShapeError("dense: weight matrix inconsistent with declared dimensions");
  }
  Tensor<T> out({layer.outputs});
  const T* x = input.data();
  for (std::size_t m = 0; m < layer.outputs; ++m) {
    const T* row = layer.weights.data() + m * layer.inputs;
    T acc = layer.bias[m];
    for (std::size_t n = 0; n < layer.inputs; ++n) acc += row[n] * x[n];
    out[m] = acc;
  }
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const DenseLayer<T>& layer,
                             const Tensor<T>& upstream, bool want_input_grad = true) {
  if (upstream.size() != layer.outputs || input.size() != layer.inputs) {
    throw ShapeError("dense_backward: operands do not match layer " +
                     std::to_string(layer.outputs) + "x" + std::to_string(layer.inputs));
  }
  DenseGrads<T> grads;
  grads.bias.assign(upstream.values().begin(), upstream.values().end());
  grads.weights.assign(layer.weights.size(), T{0});
  if (want_input_grad) grads.input = Tensor<T>(input.shape());
  const T* x = input.data();
  for (std::size_t m = 0; m < layer.outputs; ++m) {
    const T g = upstream[m];
    T* dw = grads.weights.data() + m * layer.inputs;
    for (std::size_t n = 0; n < layer.inputs; ++n) dw[n] = g * x[n];
    if (want_input_grad) {
      const T* row = layer.weights.data() + m * layer.inputs;
      T* dx = grads.input.data();
      for (std::size_t n = 0; n < layer.inputs; ++n) dx[n] += g * row[n];
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Flatten

template <typename T>
Tensor<T> flatten(const Tensor<T>& input) {
  return input.reshaped({input.size()});
}

template <typename T>
Tensor<T> unflatten(const Tensor<T>& flat, const Shape& shape) {
  return flat.reshaped(shape);
}

// ---------------------------------------------------------------------------
// Losses. Accumulation runs in double regardless of T.

template <typename T>
double mse(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

template <typename T>
double mae(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    acc += std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
  }
  return acc / static_cast<double>(pred.size());
}

/// d mse / d pred = 2 (pred - target) / N
template <typename T>
Tensor<T> mse_gradient(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "mse_gradient");
  Tensor<T> grad(pred.shape());
  const T scale = T{2} / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) grad[i] = scale * (pred[i] - target[i]);
  return grad;
}

}  // namespace healthcam
