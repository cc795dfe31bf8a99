#pragma once

// Split-and-mirror augmentation. The first image axis ("length") is the one
// that gets split and mirrored; reflect_horizontal flips the second axis.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "healthcam/image_io.hpp"
#include "healthcam/pollutants.hpp"
#include "healthcam/rng.hpp"

namespace healthcam {

struct LabeledSample {
  ImageTensor image;
  PollutantVector label;
  std::string id;  // provenance, e.g. "img_0003/top/mirror"
};

struct SplitPair {
  ImageTensor left;   // rows [0, ceil(x/2))
  ImageTensor right;  // rows [ceil(x/2), x)
};

namespace detail {

inline ImageTensor copy_rows(const ImageTensor& image, std::size_t begin, std::size_t end) {
  const std::size_t row = image.dim(1) * image.dim(2);
  std::vector<float> data(image.data() + begin * row, image.data() + end * row);
  return ImageTensor({end - begin, image.dim(1), image.dim(2)}, std::move(data));
}

}  // namespace detail

inline SplitPair split_vertical(const ImageTensor& image) {
  require_rank(image, 3, "split_vertical");
  const std::size_t x = image.dim(0);
  if (x < 2) throw ShapeError("split_vertical: image needs at least 2 rows, got " + shape_string(image.shape()));
  const std::size_t m = (x + 1) / 2;
  return {detail::copy_rows(image, 0, m), detail::copy_rows(image, m, x)};
}

/// out(i, j) = in(x - 1 - i, j)
inline ImageTensor mirror(const ImageTensor& image) {
  require_rank(image, 3, "mirror");
  const std::size_t x = image.dim(0), row = image.dim(1) * image.dim(2);
  ImageTensor out(image.shape());
  for (std::size_t i = 0; i < x; ++i) {
    std::copy_n(image.data() + (x - 1 - i) * row, row, out.data() + i * row);
  }
  return out;
}

/// out(i, j) = in(i, y - 1 - j)
inline ImageTensor reflect_horizontal(const ImageTensor& image) {
  require_rank(image, 3, "reflect_horizontal");
  const std::size_t x = image.dim(0), y = image.dim(1), c = image.dim(2);
  ImageTensor out(image.shape());
  for (std::size_t i = 0; i < x; ++i) {
    for (std::size_t j = 0; j < y; ++j) {
      std::copy_n(&image.at(i, y - 1 - j, 0), c, &out.at(i, j, 0));
    }
  }
  return out;
}

struct AugmentationPolicy {
  bool enable_vertical = true;
  bool enable_horizontal = false;
  bool keep_original = false;
  std::uint64_t shuffle_seed = 0;

  /// Outputs produced per input sample.
  std::size_t multiplicity() const {
    std::size_t n = (keep_original ? 1 : 0) + (enable_vertical ? 4 : 0);
    if (enable_horizontal) n = n == 0 ? 1 : 2 * n;
    return n;
  }

  void validate() const {
    if (multiplicity() == 0) {
      throw std::invalid_argument("augmentation policy produces no samples; enable a transform or keep originals");
    }
  }
};

/// Named policies: "none", "vertical", "horizontal", "vertical+horizontal".
inline AugmentationPolicy policy_from_name(const std::string& name, std::uint64_t seed, bool keep_original = false) {
  AugmentationPolicy p;
  p.shuffle_seed = seed;
  p.keep_original = keep_original;
  if (name == "none") {
    p.enable_vertical = false;
    p.keep_original = true;
  } else if (name == "vertical") {
    p.enable_vertical = true;
  } else if (name == "horizontal") {
    p.enable_vertical = false;
    p.enable_horizontal = true;
  } else if (name == "vertical+horizontal") {
    p.enable_vertical = true;
    p.enable_horizontal = true;
  } else {
    throw std::invalid_argument("unknown augmentation policy '" + name +
                                "' (expected none, vertical, horizontal, vertical+horizontal)");
  }
  return p;
}

/// Samples derived from one input, in a fixed order: original (if kept),
/// top half, bottom half, their mirrors, then horizontal reflections of all
/// of those when enabled. Labels are copied verbatim.
inline std::vector<LabeledSample> augment_sample(const LabeledSample& s, const AugmentationPolicy& policy) {
  std::vector<LabeledSample> out;
  if (policy.keep_original) out.push_back(s);
  if (policy.enable_vertical) {
    SplitPair halves = split_vertical(s.image);
    ImageTensor top_m = mirror(halves.left);
    ImageTensor bottom_m = mirror(halves.right);
    out.push_back({std::move(halves.left), s.label, s.id + "/top"});
    out.push_back({std::move(halves.right), s.label, s.id + "/bottom"});
    out.push_back({std::move(top_m), s.label, s.id + "/top/mirror"});
    out.push_back({std::move(bottom_m), s.label, s.id + "/bottom/mirror"});
  }
  if (policy.enable_horizontal) {
    if (out.empty()) {
      out.push_back({reflect_horizontal(s.image), s.label, s.id + "/hflip"});
    } else {
      const std::size_t n = out.size();
      for (std::size_t i = 0; i < n; ++i) {
        out.push_back({reflect_horizontal(out[i].image), s.label, out[i].id + "/hflip"});
      }
    }
  }
  return out;
}

inline std::vector<LabeledSample> augment_dataset(const std::vector<LabeledSample>& samples,
                                                  const AugmentationPolicy& policy) {
  if (samples.empty()) throw std::invalid_argument("augment_dataset: empty input");
  policy.validate();
  std::vector<LabeledSample> out;
  out.reserve(samples.size() * policy.multiplicity());
  for (const auto& s : samples) {
    auto derived = augment_sample(s, policy);
    for (auto& d : derived) out.push_back(std::move(d));
  }
  Rng rng(policy.shuffle_seed);
  rng.shuffle(out);
  return out;
}

}  // namespace healthcam
