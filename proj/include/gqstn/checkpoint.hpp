#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "gqstn/binio.hpp"
#include "gqstn/locnet.hpp"
#include "gqstn/tensor.hpp"

namespace gqstn {

// Repo-wide checkpoint format:
//   magic "GQTN" | u32 version | u64 manifest length | manifest JSON |
//   raw little-endian f64 tensor payloads at the manifest's byte offsets
// (offsets relative to the start of the payload section).
inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const ModelParams& params,
                            const nlohmann::json& meta = {}) {
  nlohmann::json manifest;
  manifest["meta"] = meta;
  manifest["tensors"] = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : params.named) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    offset += uint64_t(t.numel()) * 8;
    manifest["tensors"].push_back(entry);
  }
  manifest["payload_bytes"] = offset;
  std::string mstr = manifest.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw TensorError("save_checkpoint: cannot open " + path);
  os.write("GQTN", 4);
  detail::write_pod<uint32_t>(os, kCheckpointVersion);
  detail::write_pod<uint64_t>(os, mstr.size());
  os.write(mstr.data(), std::streamsize(mstr.size()));
  for (const auto& [name, t] : params.named)
    os.write(reinterpret_cast<const char*>(t.data().data()),
             std::streamsize(t.data().size() * 8));
  if (!os) throw TensorError("save_checkpoint: write failed for " + path);
}

struct Checkpoint {
  ModelParams params;
  nlohmann::json meta;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorError("load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "GQTN", 4) != 0)
    throw TensorError("load_checkpoint: bad magic in " + path);
  uint32_t version = detail::read_pod<uint32_t>(is);
  if (version != kCheckpointVersion)
    throw TensorError("load_checkpoint: unsupported version " + std::to_string(version));
  uint64_t mlen = detail::read_pod<uint64_t>(is);
  std::string mstr(mlen, '\0');
  is.read(mstr.data(), std::streamsize(mlen));
  if (!is) throw TensorError("load_checkpoint: truncated manifest in " + path);
  nlohmann::json manifest = nlohmann::json::parse(mstr);

  uint64_t payload_bytes = manifest.at("payload_bytes");
  std::streampos payload_start = is.tellg();
  is.seekg(0, std::ios::end);
  uint64_t actual = uint64_t(is.tellg() - payload_start);
  if (actual != payload_bytes)
    throw TensorError("load_checkpoint: payload length mismatch in " + path + " (expected " +
                      std::to_string(payload_bytes) + ", found " + std::to_string(actual) + ")");

  Checkpoint ck;
  ck.meta = manifest.value("meta", nlohmann::json{});
  for (const auto& entry : manifest.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    uint64_t off = entry.at("offset");
    std::vector<double> data(size_t(numel_of(shape)));
    is.seekg(payload_start + std::streampos(off));
    is.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * 8));
    if (!is) throw TensorError("load_checkpoint: truncated payload in " + path);
    ck.params.named.emplace_back(entry.at("name"), Tensor(shape, std::move(data), true));
  }
  return ck;
}

// Restore parameter values into an existing model (shapes must match).
inline void load_into(ModelParams& dst, const Checkpoint& ck) {
  if (dst.named.size() != ck.params.named.size())
    throw TensorError("load_into: parameter count mismatch");
  for (size_t i = 0; i < dst.named.size(); ++i) {
    auto& [dn, dt] = dst.named[i];
    const auto& [sn, st] = ck.params.named[i];
    if (dn != sn || dt.shape() != st.shape())
      throw TensorError("load_into: mismatch at " + dn);
    dt.data() = st.data();
  }
}

}  // namespace gqstn
