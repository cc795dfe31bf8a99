#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "healthcam/kernels.hpp"

namespace healthcam {

struct LeakyReluLayer {
  double slope = kDefaultLeakySlope;
};
struct MaxPoolLayer {};
struct FlattenLayer {};

template <typename T>
using Layer = std::variant<ConvFilterBank<T>, LeakyReluLayer, MaxPoolLayer, FlattenLayer, DenseLayer<T>>;

/// Per-layer state retained by a forward pass, in execution order.
template <typename T>
class GradientTape {
 public:
  struct ActivationRecord {
    Tensor<T> input;
  };
  struct FlattenRecord {
    Shape input_shape;
  };
  struct DenseRecord {
    Tensor<T> input;
  };
  using Record = std::variant<ConvContext<T>, ActivationRecord, PoolContext<T>, FlattenRecord, DenseRecord>;

  void push(Record r) { records_.push_back(std::move(r)); }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const Record& operator[](std::size_t i) const { return records_[i]; }
  void clear() { records_.clear(); }

 private:
  std::vector<Record> records_;
};

/// Gradients for every parameter block (weights then bias of each
/// parameterized layer, in layer order) plus the gradient w.r.t. the input.
template <typename T>
struct SequentialGrads {
  Tensor<T> input;
  std::vector<std::vector<T>> params;
};

/// A plain layer stack.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<Layer<T>> layers) : layers_(std::move(layers)) {}

  std::vector<Layer<T>>& layers() noexcept { return layers_; }
  const std::vector<Layer<T>>& layers() const noexcept { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
      if (auto* c = std::get_if<ConvFilterBank<T>>(&layer)) n += c->parameter_count();
      if (auto* d = std::get_if<DenseLayer<T>>(&layer)) n += d->parameter_count();
    }
    return n;
  }

  /// Mutable views onto each parameter block in the order backward() reports them.
  std::vector<std::span<T>> parameter_blocks() {
    std::vector<std::span<T>> blocks;
    for (auto& layer : layers_) {
      if (auto* c = std::get_if<ConvFilterBank<T>>(&layer)) {
        blocks.emplace_back(c->weights);
        blocks.emplace_back(c->bias);
      } else if (auto* d = std::get_if<DenseLayer<T>>(&layer)) {
        blocks.emplace_back(d->weights);
        blocks.emplace_back(d->bias);
      }
    }
    return blocks;
  }

  std::vector<std::span<const T>> parameter_blocks() const {
    std::vector<std::span<const T>> blocks;
    for (const auto& layer : layers_) {
      if (auto* c = std::get_if<ConvFilterBank<T>>(&layer)) {
        blocks.emplace_back(c->weights);
        blocks.emplace_back(c->bias);
      } else if (auto* d = std::get_if<DenseLayer<T>>(&layer)) {
        blocks.emplace_back(d->weights);
        blocks.emplace_back(d->bias);
      }
    }
    return blocks;
  }

  /// Runs the stack. When `tape` is given it is cleared and refilled.
  Tensor<T> forward(Tensor<T> x, GradientTape<T>* tape = nullptr) const {
    if (tape) tape->clear();
    for (const auto& layer : layers_) {
      x = std::visit(
          [&](const auto& l) -> Tensor<T> {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ConvFilterBank<T>>) {
              Tensor<T> y = conv2d_forward(x, l);
              if (tape) tape->push(ConvContext<T>{std::move(x)});
              return y;
            } else if constexpr (std::is_same_v<L, LeakyReluLayer>) {
              Tensor<T> y = leaky_relu(x, static_cast<T>(l.slope));
              if (tape) tape->push(typename GradientTape<T>::ActivationRecord{std::move(x)});
              return y;
            } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
              if (!tape) return maxpool2x2_forward(x);
              PoolContext<T> ctx;
              Tensor<T> y = maxpool2x2_forward(x, &ctx);
              tape->push(std::move(ctx));
              return y;
            } else if constexpr (std::is_same_v<L, FlattenLayer>) {
              if (tape) tape->push(typename GradientTape<T>::FlattenRecord{x.shape()});
              return flatten(x);
            } else {
              Tensor<T> y = dense_forward(x, l);
              if (tape) tape->push(typename GradientTape<T>::DenseRecord{std::move(x)});
              return y;
            }
          },
          layer);
    }
    return x;
  }

  /// Replays the tape in reverse. Each parameter block is written exactly once.
  SequentialGrads<T> backward(const GradientTape<T>& tape, Tensor<T> upstream,
                              bool want_input_grad = true) const {
    if (tape.size() != layers_.size()) {
      throw TapeError("Sequential::backward: tape holds " + std::to_string(tape.size()) +
                      " records for " + std::to_string(layers_.size()) + " layers");
    }
    SequentialGrads<T> grads;
    std::vector<std::vector<T>> reversed_blocks;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const bool need_input = want_input_grad || i > 0;
      const auto& layer = layers_[i];
      const auto& record = tape[i];
      if (auto* c = std::get_if<ConvFilterBank<T>>(&layer)) {
        auto* ctx = std::get_if<ConvContext<T>>(&record);
        if (!ctx) throw TapeError("Sequential::backward: tape record does not match conv layer");
        ConvGrads<T> g = conv2d_backward(*ctx, *c, upstream, need_input);
        reversed_blocks.push_back(std::move(g.bias));
        reversed_blocks.push_back(std::move(g.weights));
        upstream = std::move(g.input);
      } else if (auto* a = std::get_if<LeakyReluLayer>(&layer)) {
        auto* rec = std::get_if<typename GradientTape<T>::ActivationRecord>(&record);
        if (!rec) throw TapeError("Sequential::backward: tape record does not match activation");
        upstream = leaky_relu_backward(rec->input, upstream, static_cast<T>(a->slope));
      } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
        auto* ctx = std::get_if<PoolContext<T>>(&record);
        if (!ctx) throw TapeError("Sequential::backward: tape record does not match maxpool");
        upstream = maxpool2x2_backward(*ctx, upstream);
      } else if (std::holds_alternative<FlattenLayer>(layer)) {
        auto* rec = std::get_if<typename GradientTape<T>::FlattenRecord>(&record);
        if (!rec) throw TapeError("Sequential::backward: tape record does not match flatten");
        upstream = unflatten(upstream, rec->input_shape);
      } else {
        const auto& d = std::get<DenseLayer<T>>(layer);
        auto* rec = std::get_if<typename GradientTape<T>::DenseRecord>(&record);
        if (!rec) throw TapeError("Sequential::backward: tape record does not match dense layer");
        DenseGrads<T> g = dense_backward(rec->input, d, upstream, need_input);
        reversed_blocks.push_back(std::move(g.bias));
        reversed_blocks.push_back(std::move(g.weights));
        upstream = std::move(g.input);
      }
    }
    grads.params.assign(std::make_move_iterator(reversed_blocks.rbegin()),
                        std::make_move_iterator(reversed_blocks.rend()));
    if (want_input_grad) grads.input = std::move(upstream);
    return grads;
  }

 private:
  std::vector<Layer<T>> layers_;
};

}  // namespace healthcam
