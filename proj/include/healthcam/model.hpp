#pragma once

// The three regressor layouts built on a shared 3-stage convolutional trunk:
//   Branched   - trunk -> flatten F -> head1 (2 outputs) and head2 (5 outputs), both reading F
//   TwoStage   - trunk -> F -> head1 (2 outputs); head2 reads those 2 predictions (gradient stops there)
//   Monolithic - trunk -> F -> a single 7-output head
// Each head is dense -> LeakyReLU -> dense with a linear output.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "healthcam/pollutants.hpp"
#include "healthcam/rng.hpp"
#include "healthcam/sequential.hpp"

namespace healthcam {

enum class Architecture { Branched, TwoStage, Monolithic };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::Branched:
      return "branched";
    case Architecture::TwoStage:
      return "two-stage";
    case Architecture::Monolithic:
      return "monolithic";
  }
  return "unknown";
}

inline Architecture parse_architecture(const std::string& name) {
  if (name == "branched") return Architecture::Branched;
  if (name == "two-stage") return Architecture::TwoStage;
  if (name == "monolithic") return Architecture::Monolithic;
  throw std::invalid_argument("unknown architecture '" + name + "' (expected branched, two-stage, monolithic)");
}

struct ModelConfig {
  std::size_t input_height = 224;
  std::size_t input_width = 224;
  std::size_t input_channels = 3;
  std::array<std::size_t, 3> conv_filters = {32, 64, 64};
  std::size_t kernel = 3;
  std::size_t pool = 2;
  double leaky_slope = kDefaultLeakySlope;
  std::size_t hidden_units = 64;
  Architecture architecture = Architecture::Branched;

  /// Spatial size after each conv and pool: {conv1, pool1, conv2, pool2, conv3, pool3}.
  std::array<std::pair<std::size_t, std::size_t>, 6> stage_sizes() const {
    std::array<std::pair<std::size_t, std::size_t>, 6> sizes{};
    std::size_t h = input_height, w = input_width;
    for (std::size_t stage = 0; stage < 3; ++stage) {
      if (h < kernel || w < kernel) throw std::invalid_argument("model input too small for three conv stages");
      h = h - kernel + 1;
      w = w - kernel + 1;
      sizes[2 * stage] = {h, w};
      if (h < pool || w < pool) throw std::invalid_argument("model input too small for three pooling stages");
      h /= pool;
      w /= pool;
      sizes[2 * stage + 1] = {h, w};
    }
    return sizes;
  }

  std::size_t flatten_width() const {
    const auto last = stage_sizes()[5];
    return last.first * last.second * conv_filters[2];
  }

  void validate() const {
    if (kernel != 3) throw std::invalid_argument("model config: kernel must be 3x3");
    if (pool != 2) throw std::invalid_argument("model config: pool must be 2x2");
    if (input_channels != 3) throw std::invalid_argument("model config: input must be RGB");
    for (std::size_t f : conv_filters) {
      if (f == 0) throw std::invalid_argument("model config: filter counts must be positive");
    }
    if (hidden_units == 0) throw std::invalid_argument("model config: hidden_units must be positive");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
      throw std::invalid_argument("model config: leaky_slope must lie in (0, 1)");
    }
    (void)stage_sizes();
  }

  /// 224x224x3 input, filters 32/64/64, 64 hidden units.
  static ModelConfig full(Architecture arch = Architecture::Branched) {
    ModelConfig c;
    c.architecture = arch;
    return c;
  }

  /// Desk-scale configuration used for synthetic experiments.
  static ModelConfig desk(Architecture arch = Architecture::Branched) {
    ModelConfig c;
    c.input_height = c.input_width = 64;
    c.conv_filters = {8, 16, 16};
    c.hidden_units = 32;
    c.architecture = arch;
    return c;
  }

  nlohmann::json to_json() const {
    return {{"input_size", {input_height, input_width, input_channels}},
            {"conv_filters", conv_filters},
            {"kernel", {kernel, kernel}},
            {"pool", {pool, pool}},
            {"leaky_slope", leaky_slope},
            {"hidden_units", hidden_units},
            {"architecture", to_string(architecture)}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    const auto size = j.at("input_size").get<std::vector<std::size_t>>();
    if (size.size() != 3) throw std::invalid_argument("model config: input_size must have 3 entries");
    c.input_height = size[0];
    c.input_width = size[1];
    c.input_channels = size[2];
    const auto filters = j.at("conv_filters").get<std::vector<std::size_t>>();
    if (filters.size() != 3) throw std::invalid_argument("model config: conv_filters must have exactly 3 entries");
    std::copy(filters.begin(), filters.end(), c.conv_filters.begin());
    c.kernel = j.at("kernel").at(0).get<std::size_t>();
    c.pool = j.at("pool").at(0).get<std::size_t>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.hidden_units = j.at("hidden_units").get<std::size_t>();
    c.architecture = parse_architecture(j.at("architecture").get<std::string>());
    c.validate();
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Everything backward() needs from one forward pass over a single image.
template <typename T>
struct ForwardTrace {
  GradientTape<T> trunk;
  GradientTape<T> head1;
  GradientTape<T> head2;
  Tensor<T> features;   // flattened trunk output F
  Tensor<T> particulate;  // 2 outputs
  Tensor<T> secondary;    // 5 outputs
  std::uint64_t model_id = 0;
  std::uint64_t revision = 0;
};

template <typename T>
struct ModelGrads {
  std::vector<std::vector<T>> blocks;  // aligned with BasicModel::parameter_blocks()
};

namespace detail {
inline std::uint64_t next_model_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}
}  // namespace detail

template <typename T>
class BasicModel {
 public:
  BasicModel() = default;

  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), drawn in parameter-block order.
  static BasicModel build(const ModelConfig& config, std::uint64_t seed) {
    BasicModel m = shape_only(config);
    Rng rng(seed);
    auto init = [&](std::span<T> block, std::size_t fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (T& v : block) v = static_cast<T>(rng.uniform(-bound, bound));
    };
    for (Sequential<T>* seq : {&m.trunk_, &m.head1_, &m.head2_}) {
      for (auto& layer : seq->layers()) {
        if (auto* c = std::get_if<ConvFilterBank<T>>(&layer)) {
          init(c->weights, c->patch_size());
          init(c->bias, c->patch_size());
        } else if (auto* d = std::get_if<DenseLayer<T>>(&layer)) {
          init(d->weights, d->inputs);
          init(d->bias, d->inputs);
        }
      }
    }
    return m;
  }

  /// All-zero parameters with the layer structure implied by `config`.
  static BasicModel shape_only(const ModelConfig& config) {
    config.validate();
    BasicModel m;
    m.config_ = config;
    m.id_ = detail::next_model_id();
    const auto slope = LeakyReluLayer{config.leaky_slope};
    std::vector<Layer<T>> trunk;
    std::size_t channels = config.input_channels;
    for (std::size_t f : config.conv_filters) {
      trunk.emplace_back(ConvFilterBank<T>(f, config.kernel, config.kernel, channels));
      trunk.emplace_back(slope);
      trunk.emplace_back(MaxPoolLayer{});
      channels = f;
    }
    trunk.emplace_back(FlattenLayer{});
    m.trunk_ = Sequential<T>(std::move(trunk));

    const std::size_t width = config.flatten_width();
    const std::size_t hidden = config.hidden_units;
    auto head = [&](std::size_t in, std::size_t out) {
      return Sequential<T>({DenseLayer<T>(in, hidden), slope, DenseLayer<T>(hidden, out)});
    };
    switch (config.architecture) {
      case Architecture::Branched:
        m.head1_ = head(width, kParticulateCount);
        m.head2_ = head(width, kSecondaryCount);
        break;
      case Architecture::TwoStage:
        m.head1_ = head(width, kParticulateCount);
        m.head2_ = head(kParticulateCount, kSecondaryCount);
        break;
      case Architecture::Monolithic:
        m.head1_ = head(width, kPollutantCount);
        break;
    }
    return m;
  }

  const ModelConfig& config() const noexcept { return config_; }
  Architecture architecture() const noexcept { return config_.architecture; }
  const Sequential<T>& trunk() const noexcept { return trunk_; }
  const Sequential<T>& head1() const noexcept { return head1_; }
  const Sequential<T>& head2() const noexcept { return head2_; }
  bool has_head2() const noexcept { return !head2_.layers().empty(); }

  std::size_t parameter_count() const {
    return trunk_.parameter_count() + head1_.parameter_count() + head2_.parameter_count();
  }

  std::vector<std::span<const T>> parameter_blocks() const {
    std::vector<std::span<const T>> out;
    for (const Sequential<T>* seq : {&trunk_, &head1_, &head2_}) {
      for (auto b : seq->parameter_blocks()) out.push_back(b);
    }
    return out;
  }

  /// Mutable parameter access; invalidates outstanding traces.
  std::vector<std::span<T>> mutable_parameter_blocks() {
    ++revision_;
    std::vector<std::span<T>> out;
    for (Sequential<T>* seq : {&trunk_, &head1_, &head2_}) {
      for (auto b : seq->parameter_blocks()) out.push_back(b);
    }
    return out;
  }

  /// Mutable access to the particulate head only (used to probe data flow).
  Sequential<T>& mutable_head1() {
    ++revision_;
    return head1_;
  }

  bool all_finite() const {
    for (auto block : parameter_blocks()) {
      for (T v : block) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  ForwardTrace<T> forward(const Tensor<T>& image) const {
    ForwardTrace<T> trace;
    forward_into(image, trace);
    return trace;
  }

  /// Forward without retaining a tape.
  std::pair<Tensor<T>, Tensor<T>> predict(const Tensor<T>& image) const {
    check_input(image);
    Tensor<T> features = trunk_.forward(image);
    return heads_forward(features, nullptr, nullptr);
  }

  void forward_into(const Tensor<T>& image, ForwardTrace<T>& trace) const {
    check_input(image);
    trace.model_id = id_;
    trace.revision = revision_;
    trace.features = trunk_.forward(image, &trace.trunk);
    auto [p, s] = heads_forward(trace.features, &trace.head1, &trace.head2);
    trace.particulate = std::move(p);
    trace.secondary = std::move(s);
  }

  /// Parameter gradients given dL/d(particulate) and dL/d(secondary).
  ModelGrads<T> backward(const ForwardTrace<T>& trace, const Tensor<T>& d_particulate,
                         const Tensor<T>& d_secondary) const {
    if (trace.model_id != id_ || trace.revision != revision_) {
      throw TapeError("model backward: trace was recorded against a different model state");
    }
    if (d_particulate.size() != kParticulateCount || d_secondary.size() != kSecondaryCount) {
      throw ShapeError("model backward: loss gradients must have 2 and 5 entries");
    }
    ModelGrads<T> grads;
    Tensor<T> d_features;
    SequentialGrads<T> g1, g2;
    switch (config_.architecture) {
      case Architecture::Branched: {
        g1 = head1_.backward(trace.head1, d_particulate);
        g2 = head2_.backward(trace.head2, d_secondary);
        d_features = std::move(g1.input);
        for (std::size_t i = 0; i < d_features.size(); ++i) d_features[i] += g2.input[i];
        break;
      }
      case Architecture::TwoStage: {
        g1 = head1_.backward(trace.head1, d_particulate);
        g2 = head2_.backward(trace.head2, d_secondary, /*want_input_grad=*/false);
        d_features = std::move(g1.input);
        break;
      }
      case Architecture::Monolithic: {
        Tensor<T> d_all({kPollutantCount});
        for (std::size_t i = 0; i < kParticulateCount; ++i) d_all[i] = d_particulate[i];
        for (std::size_t i = 0; i < kSecondaryCount; ++i) d_all[kParticulateCount + i] = d_secondary[i];
        g1 = head1_.backward(trace.head1, d_all);
        d_features = std::move(g1.input);
        break;
      }
    }
    SequentialGrads<T> gt = trunk_.backward(trace.trunk, std::move(d_features), /*want_input_grad=*/false);
    for (auto* g : {&gt, &g1, &g2}) {
      for (auto& b : g->params) grads.blocks.push_back(std::move(b));
    }
    return grads;
  }

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> out = BasicModel<U>::shape_only(config_);
    auto dst = out.mutable_parameter_blocks();
    auto src = parameter_blocks();
    for (std::size_t b = 0; b < src.size(); ++b) {
      for (std::size_t i = 0; i < src[b].size(); ++i) dst[b][i] = static_cast<U>(src[b][i]);
    }
    return out;
  }

 private:
  void check_input(const Tensor<T>& image) const {
    const Shape want{config_.input_height, config_.input_width, config_.input_channels};
    if (image.shape() != want) {
      throw ShapeError("model input " + shape_string(image.shape()) + " does not match configured " +
                       shape_string(want));
    }
  }

  std::pair<Tensor<T>, Tensor<T>> heads_forward(const Tensor<T>& features, GradientTape<T>* t1,
                                                GradientTape<T>* t2) const {
    switch (config_.architecture) {
      case Architecture::Branched:
        return {head1_.forward(features, t1), head2_.forward(features, t2)};
      case Architecture::TwoStage: {
        Tensor<T> particulate = head1_.forward(features, t1);
        Tensor<T> secondary = head2_.forward(particulate, t2);
        return {std::move(particulate), std::move(secondary)};
      }
      case Architecture::Monolithic: {
        Tensor<T> all = head1_.forward(features, t1);
        if (t2) t2->clear();
        std::vector<T> p(all.data(), all.data() + kParticulateCount);
        std::vector<T> s(all.data() + kParticulateCount, all.data() + kPollutantCount);
        return {Tensor<T>({kParticulateCount}, std::move(p)), Tensor<T>({kSecondaryCount}, std::move(s))};
      }
    }
    throw std::logic_error("unhandled architecture");
  }

  ModelConfig config_;
  Sequential<T> trunk_;
  Sequential<T> head1_;
  Sequential<T> head2_;
  std::uint64_t id_ = 0;
  std::uint64_t revision_ = 0;
};

using Model = BasicModel<float>;

}  // namespace healthcam
