#pragma once

#include <cstring>
#include <string>

#include "vta/io.hpp"
#include "vta/nn.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Checkpoints: a config echo followed by named parameter blobs with shape
// headers. Values are float64 little-endian so reloading is bit-exact.

inline void save_params(const fs::path& path, const nn::ParamStore& store,
                        const std::string& config_echo) {
  std::string buf = "vta-ckpt v1\n";
  auto put_u32 = [&buf](std::uint32_t v) {
    buf.append(reinterpret_cast<const char*>(&v), 4);
  };
  put_u32(static_cast<std::uint32_t>(config_echo.size()));
  buf += config_echo;
  put_u32(static_cast<std::uint32_t>(store.names().size()));
  for (const auto& name : store.names()) {
    const Mat& m = store.at(name);
    put_u32(static_cast<std::uint32_t>(name.size()));
    buf += name;
    put_u32(static_cast<std::uint32_t>(m.rows()));
    put_u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        buf.append(reinterpret_cast<const char*>(&v), 8);
      }
  }
  write_file_atomic(path, buf);
}

struct LoadedCheckpoint {
  nn::ParamStore store;
  std::string config_echo;
};

inline LoadedCheckpoint load_params(const fs::path& path) {
  const std::string buf = read_text_file(path);
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > buf.size()) throw DataError("checkpoint truncated: " + path.string());
  };
  auto get_u32 = [&]() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  };
  const std::string magic = "vta-ckpt v1\n";
  need(magic.size());
  if (buf.compare(0, magic.size(), magic) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  pos = magic.size();

  LoadedCheckpoint out;
  const std::uint32_t cfg_len = get_u32();
  need(cfg_len);
  out.config_echo = buf.substr(pos, cfg_len);
  pos += cfg_len;
  const std::uint32_t count = get_u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32();
    need(name_len);
    const std::string name = buf.substr(pos, name_len);
    pos += name_len;
    const std::uint32_t rows = get_u32();
    const std::uint32_t cols = get_u32();
    Mat& m = out.store.add(name, static_cast<int>(rows), static_cast<int>(cols));
    need(static_cast<std::size_t>(rows) * cols * 8);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        double v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        m(r, c) = v;
      }
  }
  return out;
}

}  // namespace vta
