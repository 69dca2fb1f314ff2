#include "seqrex/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace seqrex {

using nlohmann::json;

void save_checkpoint(const std::string& path, const ParameterStore& ps,
                     const CheckpointManifest& manifest) {
  json m;
  m["format_version"] = kCheckpointVersion;
  m["dtype"] = "f32";
  m["architecture"] = manifest.architecture;
  m["rng_seed"] = manifest.rng_seed;
  m["config"] = manifest.config;
  json params = json::array();
  for (const auto& name : ps.names()) {
    const Mat& v = ps.value(name);
    params.push_back({{"name", name}, {"shape", {v.rows(), v.cols()}}});
  }
  m["params"] = params;
  std::string mstr = m.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  uint32_t len = static_cast<uint32_t>(mstr.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
  for (const auto& name : ps.names()) {
    const Mat& v = ps.value(name);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(v.size())));
  }
  if (!out) throw DataError("short write while saving checkpoint: " + path);
}

CheckpointManifest load_checkpoint(const std::string& path, ParameterStore& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DataError("corrupt checkpoint (bad magic): " + path);
  uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)))
    throw DataError("corrupt checkpoint (truncated manifest length): " + path);
  std::string mstr(len, '\0');
  if (!in.read(mstr.data(), len)) throw DataError("corrupt checkpoint (truncated manifest): " + path);
  json m = json::parse(mstr, nullptr, false);
  if (m.is_discarded()) throw DataError("corrupt checkpoint (manifest is not JSON): " + path);
  if (m.value("format_version", -1) != kCheckpointVersion)
    throw DataError("checkpoint format version mismatch in " + path + ": expected " +
                    std::to_string(kCheckpointVersion) + ", found " +
                    m.value("format_version", json()).dump());
  if (m.value("dtype", "") != "f32")
    throw DataError("checkpoint dtype mismatch (expected f32): " + path);

  CheckpointManifest manifest;
  manifest.architecture = m.value("architecture", "");
  manifest.rng_seed = m.value("rng_seed", uint64_t{0});
  manifest.config = m.value("config", json::object());

  for (const auto& p : m.at("params")) {
    std::string name = p.at("name").get<std::string>();
    auto shape = p.at("shape");
    Eigen::Index rows = shape.at(0).get<Eigen::Index>();
    Eigen::Index cols = shape.at(1).get<Eigen::Index>();
    if (rows < 0 || cols < 0)
      throw DataError("corrupt checkpoint (negative shape for " + name + "): " + path);
    Mat v(rows, cols);
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(v.size()))))
      throw DataError("corrupt checkpoint (truncated data for " + name + "): " + path);
    out.add(name, std::move(v));
  }
  char extra;
  if (in.read(&extra, 1)) throw DataError("corrupt checkpoint (trailing bytes): " + path);
  return manifest;
}

}  // namespace seqrex
