#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "asyncev/nn/param_set.hpp"

namespace asyncev::nn {

/*
 * Checkpoint container:
 *
 *   bytes 0..7    magic "ASYNCEV1"
 *   bytes 8..15   manifest length L, unsigned 64-bit little-endian
 *   next L bytes  JSON manifest: {"arrays": [{"name", "shape", "offset", "count"}], "metadata": {...}}
 *   remainder     payload of little-endian IEEE-754 doubles; offsets are bytes
 *                 from the start of the payload
 */
struct Checkpoint {
  ParamSet params;
  std::map<std::string, std::string> metadata;
};

inline constexpr char kCheckpointMagic[8] = {'A', 'S', 'Y', 'N', 'C', 'E', 'V', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint payload is written in host byte order");

inline std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : ckpt.params.arrays()) {
    manifest["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", a.values.size()}});
    offset += a.values.size() * sizeof(double);
  }
  manifest["metadata"] = ckpt.metadata;
  const std::string text = manifest.dump();

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  for (const auto& a : ckpt.params.arrays()) {
    out.append(reinterpret_cast<const char*>(a.values.data()), a.values.size() * sizeof(double));
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw IoError("checkpoint: bad magic");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (16 + len > bytes.size()) throw IoError("checkpoint: truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: manifest is not valid JSON: ") + e.what());
  }
  const std::size_t payload = 16 + len;
  Checkpoint ckpt;
  for (const auto& entry : manifest.at("arrays")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto count = entry.at("count").get<std::uint64_t>();
    if (count != numel(shape)) throw IoError("checkpoint: count/shape mismatch for " + name);
    if (payload + offset + count * sizeof(double) > bytes.size()) throw IoError("checkpoint: truncated payload at " + name);
    std::vector<double> values(count);
    std::memcpy(values.data(), bytes.data() + payload + offset, count * sizeof(double));
    ckpt.params.add(name, shape, std::move(values));
  }
  if (manifest.contains("metadata")) ckpt.metadata = manifest.at("metadata").get<std::map<std::string, std::string>>();
  return ckpt;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const auto bytes = encode_checkpoint(ckpt);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace asyncev::nn
