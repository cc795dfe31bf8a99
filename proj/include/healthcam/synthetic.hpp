#pragma once

// Procedural hazy-scene generator with labels that are fixed functions of the
// haze opacity. Gives desk-scale experiments a known ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "healthcam/aqi.hpp"
#include "healthcam/augmentation.hpp"
#include "healthcam/dataset.hpp"
#include "healthcam/image_io.hpp"
#include "healthcam/rng.hpp"

namespace healthcam {

struct SyntheticSample {
  RgbImage image;
  PollutantVector label;
  double alpha = 0.0;  // haze opacity in [0, 1]
};

inline constexpr double kHazeGray = 0.78;

/// Sky gradient over a textured ground band with a few building blocks, then
/// blended toward uniform gray: out = (1 - alpha) * scene + alpha * gray.
inline RgbImage render_haze_scene(double alpha, std::size_t size, Rng& rng) {
  const std::size_t s = size;
  std::vector<double> scene(s * s * 3);
  auto px = [&](std::size_t r, std::size_t c, std::size_t ch) -> double& { return scene[(r * s + c) * 3 + ch]; };

  const double top[3] = {0.20 + rng.uniform(-0.05, 0.05), 0.40 + rng.uniform(-0.05, 0.05),
                         0.85 + rng.uniform(-0.05, 0.05)};
  const double horizon_sky[3] = {0.62 + rng.uniform(-0.05, 0.05), 0.76 + rng.uniform(-0.05, 0.05),
                                 0.95 + rng.uniform(-0.04, 0.04)};
  const double ground[3] = {rng.uniform(0.22, 0.45), rng.uniform(0.28, 0.50), rng.uniform(0.12, 0.30)};
  const auto horizon = static_cast<std::size_t>(static_cast<double>(s) * rng.uniform(0.40, 0.60));

  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t c = 0; c < s; ++c) {
      if (r < horizon) {
        const double t = horizon > 1 ? static_cast<double>(r) / static_cast<double>(horizon - 1) : 0.0;
        for (std::size_t ch = 0; ch < 3; ++ch) px(r, c, ch) = top[ch] + t * (horizon_sky[ch] - top[ch]);
      } else {
        const double grain = rng.uniform(-0.08, 0.08);
        for (std::size_t ch = 0; ch < 3; ++ch) px(r, c, ch) = ground[ch] + grain;
      }
    }
  }
  const std::size_t buildings = rng.below(5);
  for (std::size_t b = 0; b < buildings; ++b) {
    const std::size_t width = 1 + rng.below(std::max<std::size_t>(1, s / 6));
    const std::size_t left = rng.below(s);
    const std::size_t height = 1 + rng.below(std::max<std::size_t>(1, horizon / 2));
    const double gray = rng.uniform(0.18, 0.55);
    for (std::size_t r = horizon > height ? horizon - height : 0; r < std::min(s, horizon + 1); ++r) {
      for (std::size_t c = left; c < std::min(s, left + width); ++c) {
        for (std::size_t ch = 0; ch < 3; ++ch) px(r, c, ch) = gray;
      }
    }
  }

  RgbImage img{s, s, std::vector<std::uint8_t>(s * s * 3)};
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const double v = std::clamp((1.0 - alpha) * scene[i] + alpha * kHazeGray, 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

/// Labels as functions of alpha: pm25 = 250 alpha, pm10 = 400 alpha + U(0, 20),
/// and the other five smooth in (pm25, pm10) plus small noise.
inline PollutantVector haze_labels(double alpha, Rng& rng) {
  PollutantVector v;
  const double pm25 = 250.0 * alpha;
  const double pm10 = 400.0 * alpha + rng.uniform(0.0, 20.0);
  v[Pollutant::Pm25] = pm25;
  v[Pollutant::Pm10] = pm10;
  v[Pollutant::So2] = 2.0 + 0.04 * pm25 + 0.01 * pm10 + rng.uniform(0.0, 1.0);
  v[Pollutant::O3] = 15.0 + 0.25 * pm25 - 0.0005 * pm25 * pm25 + rng.uniform(0.0, 2.0);
  v[Pollutant::No2] = 8.0 + 0.12 * pm10 + 0.02 * pm25 + rng.uniform(0.0, 2.0);
  v[Pollutant::Co] = 0.2 + 0.008 * pm25 + 0.002 * pm10 + rng.uniform(0.0, 0.1);
  v[Pollutant::Aqi] = aqi_from_pm25(pm25) + rng.uniform(0.0, 3.0);
  return v;
}

inline SyntheticSample make_synthetic_sample(double alpha, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticSample s;
  s.alpha = alpha;
  s.image = render_haze_scene(alpha, size, rng);
  s.label = haze_labels(alpha, rng);
  return s;
}

inline std::vector<SyntheticSample> generate_synthetic(std::size_t count, std::uint64_t seed, std::size_t size) {
  if (count < 1) throw std::invalid_argument("generate_synthetic: count must be at least 1");
  if (size < 2) throw std::invalid_argument("generate_synthetic: image size must be at least 2");
  std::vector<SyntheticSample> out;
  out.reserve(count);
  Rng alphas(seed);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(make_synthetic_sample(alphas.uniform(), size, derive_seed(seed, i)));
  }
  return out;
}

inline std::string synthetic_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05zu.png", index);
  return buf;
}

/// Writes one PNG per sample plus manifest.csv into `dir`.
inline DatasetManifest write_synthetic_dataset(const std::vector<SyntheticSample>& samples,
                                               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  manifest.source = DataSource::Synthetic;
  manifest.base_dir = dir;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string name = synthetic_file_name(i);
    write_file_bytes(dir / name, encode_png(samples[i].image));
    manifest.records.push_back({name, samples[i].label});
  }
  write_manifest(dir / "manifest.csv", manifest);
  return manifest;
}

inline std::vector<LabeledSample> to_labeled_samples(const std::vector<SyntheticSample>& samples) {
  std::vector<LabeledSample> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.push_back({to_tensor(samples[i].image), samples[i].label, synthetic_file_name(i)});
  }
  return out;
}

}  // namespace healthcam
