#pragma once

// Checkpoint container:
//   8 bytes   magic "HCAMCKPT"
//   u32 LE    format version
//   u64 LE    header length N
//   N bytes   UTF-8 JSON {"format_version", "architecture", "config", "scaler", "blocks": [sizes]}
//   per parameter block, in declared order: u64 LE element count, then count x f32 LE
// Writes go to a temporary sibling and are renamed into place.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "healthcam/image_io.hpp"
#include "healthcam/model.hpp"
#include "healthcam/scaler.hpp"

namespace healthcam {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'H', 'C', 'A', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  LabelScaler scaler;
  std::string hash;  // FNV-1a 64 of the file bytes, hex
};

inline std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const Model& model, const LabelScaler& scaler) {
  const auto blocks = model.parameter_blocks();
  nlohmann::json header = {{"format_version", kCheckpointVersion},
                           {"architecture", to_string(model.architecture())},
                           {"config", model.config().to_json()},
                           {"scaler", scaler.to_json()}};
  std::vector<std::size_t> sizes;
  for (auto b : blocks) sizes.push_back(b.size());
  header["blocks"] = sizes;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (auto b : blocks) {
    detail::put_u64(out, b.size());
    for (float v : b) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

/// Parses a checkpoint. With `expected` set, a different architecture tag is rejected.
inline Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes,
                                         std::optional<Architecture> expected = std::nullopt) {
  detail::ByteReader in(bytes);
  auto magic = in.take(8, "magic");
  if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic)) {
    throw CheckpointError("not a checkpoint: bad magic bytes");
  }
  const std::uint32_t version = in.u32("format version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t header_len = in.u64("header length");
  auto header_bytes = in.take(static_cast<std::size_t>(header_len), "header");
  nlohmann::json header;
  ModelConfig config;
  LabelScaler scaler;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
    config = ModelConfig::from_json(header.at("config"));
    scaler = LabelScaler::from_json(header.at("scaler"));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const std::string tag = header.value("architecture", "");
  if (tag != to_string(config.architecture)) {
    throw CheckpointError("checkpoint architecture tag '" + tag + "' disagrees with its config");
  }
  if (expected && *expected != config.architecture) {
    throw CheckpointError("checkpoint holds a " + tag + " model, refusing to load it as " + to_string(*expected));
  }

  Checkpoint ckpt{Model::shape_only(config), scaler, fnv1a_hex(bytes)};
  auto blocks = ckpt.model.mutable_parameter_blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::uint64_t count = in.u64("block length");
    if (count != blocks[b].size()) {
      throw CheckpointError("checkpoint block " + std::to_string(b) + " has " + std::to_string(count) +
                            " values, model expects " + std::to_string(blocks[b].size()));
    }
    auto raw = in.take(static_cast<std::size_t>(count) * 4, "parameters");
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(raw[4 * i + k]) << (8 * k);
      blocks[b][i] = std::bit_cast<float>(bits);
    }
  }
  if (!in.at_end()) throw CheckpointError("checkpoint has trailing bytes after the last parameter block");
  if (!ckpt.model.all_finite()) throw CheckpointError("checkpoint contains non-finite parameters");
  return ckpt;
}

/// Atomic save: write a sibling temp file, then rename over `path`.
inline std::string save_checkpoint(const Model& model, const LabelScaler& scaler, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model, scaler);
  auto tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, bytes);
  std::filesystem::rename(tmp, path);
  return fnv1a_hex(bytes);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path,
                                  std::optional<Architecture> expected = std::nullopt) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("cannot read checkpoint: ") + e.what());
  }
  return deserialize_checkpoint(bytes, expected);
}

}  // namespace healthcam
