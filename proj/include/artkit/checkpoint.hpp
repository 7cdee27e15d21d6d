#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "artkit/nn.hpp"

namespace artkit::nn {

// Checkpoint file layout (little-endian):
//   8-byte magic "ARTKCKPT" | u64 header length | header JSON | f32 payload
// The header lists every array's name, shape and byte offset into the
// payload, plus an arbitrary "config" object supplied by the caller.

inline constexpr char kCheckpointMagic[8] = {'A', 'R', 'T', 'K',
                                             'C', 'K', 'P', 'T'};

template <typename T>
void save_checkpoint(const ParamStore<T>& ps, const std::string& path,
                     const nlohmann::json& config = nlohmann::json::object()) {
  nlohmann::json arrays = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& item : ps.items()) {
    nlohmann::json a;
    a["name"] = item.name;
    a["shape"] = item.tensor.shape();
    a["offset"] = offset;
    a["count"] = item.tensor.numel();
    arrays.push_back(a);
    offset += uint64_t(item.tensor.numel()) * sizeof(float);
  }
  nlohmann::json header;
  header["arrays"] = arrays;
  header["config"] = config;
  std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kCheckpointMagic, 8);
  uint64_t hlen = header_str.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(header_str.data(), std::streamsize(header_str.size()));
  std::vector<float> buf;
  for (const auto& item : ps.items()) {
    buf.resize(size_t(item.tensor.numel()));
    const auto& v = item.tensor.value();
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = float(v[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              std::streamsize(buf.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

// Loads values into an already-built store; every array must exist with a
// matching shape. Returns the stored config object.
template <typename T>
nlohmann::json load_checkpoint(ParamStore<T>& ps, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  std::string header_str(hlen, '\0');
  in.read(header_str.data(), std::streamsize(hlen));
  nlohmann::json header = nlohmann::json::parse(header_str);

  std::streampos payload_start = in.tellg();
  for (const auto& a : header.at("arrays")) {
    std::string name = a.at("name").get<std::string>();
    if (!ps.has(name))
      throw std::runtime_error("load_checkpoint: unexpected array " + name);
    Tensor<T> t = ps.get(name);
    std::vector<int> shape = a.at("shape").get<std::vector<int>>();
    if (shape != t.shape())
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name +
                               ": file " + ad::shape_str(shape) + " vs store " +
                               ad::shape_str(t.shape()));
    uint64_t count = a.at("count").get<uint64_t>();
    std::vector<float> buf(count);
    in.seekg(payload_start + std::streampos(a.at("offset").get<uint64_t>()));
    in.read(reinterpret_cast<char*>(buf.data()),
            std::streamsize(count * sizeof(float)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated " + path);
    auto& v = t.value();
    for (size_t i = 0; i < buf.size(); ++i) v[i] = T(buf[i]);
  }
  return header.at("config");
}

// Reads just the config object without touching any parameter data.
inline nlohmann::json peek_checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("peek_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("peek_checkpoint: bad magic in " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  std::string header_str(hlen, '\0');
  in.read(header_str.data(), std::streamsize(hlen));
  return nlohmann::json::parse(header_str).at("config");
}

}  // namespace artkit::nn
