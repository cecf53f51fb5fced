#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vta/common.hpp"
#include "vta/rng.hpp"

namespace vta {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Raw file helpers. All binary formats are little-endian; the code assumes a
// little-endian host (checked once at startup by the CLI).

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write via a temp file + rename so readers never observe partial content.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string hash_file(const fs::path& path) {
  return hash_hex(fnv1a64(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// Binary matrix format shared by conditioners, mels and latents:
// two little-endian int32 (rows, cols) followed by row-major float32 data.

inline void write_matrix_f32(const fs::path& path, const Mat& m) {
  std::string buf;
  const std::int32_t rows = static_cast<std::int32_t>(m.rows());
  const std::int32_t cols = static_cast<std::int32_t>(m.cols());
  buf.append(reinterpret_cast<const char*>(&rows), 4);
  buf.append(reinterpret_cast<const char*>(&cols), 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float v = static_cast<float>(m(r, c));
      buf.append(reinterpret_cast<const char*>(&v), 4);
    }
  write_file_atomic(path, buf);
}

inline Mat read_matrix_f32(const fs::path& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() < 8) throw DataError("matrix file too short: " + path.string());
  std::int32_t rows = 0, cols = 0;
  std::memcpy(&rows, buf.data(), 4);
  std::memcpy(&cols, buf.data() + 4, 4);
  if (rows < 0 || cols < 0 ||
      buf.size() != 8 + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 4)
    throw DataError("matrix file corrupt: " + path.string());
  Mat m(rows, cols);
  const char* p = buf.data() + 8;
  for (std::int32_t r = 0; r < rows; ++r)
    for (std::int32_t c = 0; c < cols; ++c) {
      float v;
      std::memcpy(&v, p, 4);
      p += 4;
      m(r, c) = static_cast<double>(v);
    }
  return m;
}

// ---------------------------------------------------------------------------
// PCM: mono float32 little-endian, no header (sample rate lives in manifests).

inline void write_pcm(const fs::path& path, const std::vector<double>& samples) {
  std::string buf;
  buf.reserve(samples.size() * 4);
  for (double s : samples) {
    const float v = static_cast<float>(s);
    buf.append(reinterpret_cast<const char*>(&v), 4);
  }
  write_file_atomic(path, buf);
}

inline std::vector<double> read_pcm(const fs::path& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() % 4 != 0) throw DataError("pcm file corrupt: " + path.string());
  std::vector<double> samples(buf.size() / 4);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    float v;
    std::memcpy(&v, buf.data() + i * 4, 4);
    samples[i] = static_cast<double>(v);
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Small text utilities used by manifests, scripts and configs.

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Doubles are printed with max_digits10 so text round trips are lossless.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad number '" + s + "' in " + what);
  }
}

inline long parse_long(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad integer '" + s + "' in " + what);
  }
}

}  // namespace vta
