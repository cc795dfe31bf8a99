#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "healthcam/aqi.hpp"
#include "healthcam/augmentation.hpp"
#include "healthcam/image_io.hpp"
#include "healthcam/pollutants.hpp"
#include "healthcam/rng.hpp"

namespace healthcam {

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kManifestHeader = "path,pm25,pm10,so2,o3,no2,co,aqi";

struct ManifestRecord {
  std::filesystem::path path;  // absolute, or relative to the manifest's directory
  PollutantVector label;
};

enum class DataSource { Real, Synthetic };

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  DataSource source = DataSource::Real;
  std::filesystem::path base_dir;  // directory relative paths resolve against

  std::filesystem::path resolve(const ManifestRecord& r) const {
    return r.path.is_absolute() ? r.path : base_dir / r.path;
  }
  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

/// Shortest representation that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, end);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

inline double parse_number(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw IngestError(where + ": '" + text + "' is not a number");
  return v;
}

}  // namespace detail

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw IngestError("manifest " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw IngestError("manifest " + path.string() + ": header must be '" + kManifestHeader + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    auto fields = detail::split_csv_line(line);
    if (fields.size() != 1 + kPollutantCount) {
      throw IngestError(where + ": expected " + std::to_string(1 + kPollutantCount) + " fields, got " +
                        std::to_string(fields.size()));
    }
    ManifestRecord rec;
    rec.path = fields[0];
    for (std::size_t i = 0; i < kPollutantCount; ++i) {
      rec.label[i] = detail::parse_number(fields[i + 1], where);
      if (!(rec.label[i] >= 0.0)) {
        throw IngestError(where + ": " + std::string(kPollutantNames[i]) + " must be non-negative");
      }
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

inline std::string manifest_csv(const DatasetManifest& manifest) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& r : manifest.records) {
    out += detail::csv_field(r.path.generic_string());
    for (double v : r.label.values) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << manifest_csv(manifest);
}

/// Decodes an 8-bit RGB file into [0,1] values (raw / 255), resized by
/// nearest neighbour to height x width.
inline ImageTensor load_image(const std::filesystem::path& path, std::size_t height, std::size_t width) {
  try {
    const auto bytes = read_file_bytes(path);
    return resize_nearest(to_tensor(decode_rgb(bytes)), height, width);
  } catch (const std::exception& e) {
    throw IngestError("cannot load image " + path.string() + ": " + e.what());
  }
}

/// Decodes at the file's own resolution.
inline ImageTensor load_image(const std::filesystem::path& path) {
  try {
    return to_tensor(decode_rgb(read_file_bytes(path)));
  } catch (const std::exception& e) {
    throw IngestError("cannot load image " + path.string() + ": " + e.what());
  }
}

inline std::vector<LabeledSample> load_samples(const DatasetManifest& manifest) {
  std::vector<LabeledSample> samples;
  samples.reserve(manifest.size());
  for (const auto& r : manifest.records) {
    samples.push_back({load_image(manifest.resolve(r)), r.label, r.path.generic_string()});
  }
  return samples;
}

inline std::vector<LabeledSample> load_samples(const DatasetManifest& manifest, std::size_t height,
                                               std::size_t width) {
  std::vector<LabeledSample> samples;
  samples.reserve(manifest.size());
  for (const auto& r : manifest.records) {
    samples.push_back({load_image(manifest.resolve(r), height, width), r.label, r.path.generic_string()});
  }
  return samples;
}

/// Groups indices by the AQI class of their PM2.5 label (stable), applies a
/// seeded shuffle, and cuts at round(fraction * n). Returns (train, test).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<PollutantVector>& labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("split fraction must lie in (0, 1)");
  const std::size_t n = labels.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw std::invalid_argument("split of " + std::to_string(n) + " records at " + format_number(fraction) +
                                " leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return classify_aqi(labels[a].pm25()) < classify_aqi(labels[b].pm25());
  });
  Rng rng(seed);
  rng.shuffle(order);
  return {std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)),
          std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end())};
}

struct TrainTestSplit {
  DatasetManifest train;
  DatasetManifest test;
};

inline TrainTestSplit split_train_test(const DatasetManifest& manifest, double fraction, std::uint64_t seed) {
  std::vector<PollutantVector> labels;
  for (const auto& r : manifest.records) labels.push_back(r.label);
  auto [train_idx, test_idx] = split_indices(labels, fraction, seed);
  TrainTestSplit split;
  split.train.source = split.test.source = manifest.source;
  split.train.base_dir = split.test.base_dir = manifest.base_dir;
  for (std::size_t i : train_idx) split.train.records.push_back(manifest.records[i]);
  for (std::size_t i : test_idx) split.test.records.push_back(manifest.records[i]);
  return split;
}

struct SampleSplit {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
};

inline SampleSplit split_samples(const std::vector<LabeledSample>& samples, double fraction, std::uint64_t seed) {
  std::vector<PollutantVector> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  auto [train_idx, test_idx] = split_indices(labels, fraction, seed);
  SampleSplit split;
  for (std::size_t i : train_idx) split.train.push_back(samples[i]);
  for (std::size_t i : test_idx) split.test.push_back(samples[i]);
  return split;
}

}  // namespace healthcam
