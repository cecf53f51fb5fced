#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vta/io.hpp"
#include "vta/rng.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Run manifest: config echo hash, input/artifact content hashes and the
// metric summary. manifest_hash covers exactly the deterministic content, so
// re-running a command with the same config and seed must reproduce it;
// wall clock is recorded outside the hashed region.

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_echo;
  std::vector<std::pair<std::string, std::string>> inputs;     // name -> content hash
  std::vector<std::pair<std::string, std::string>> artifacts;  // rel path -> content hash
  std::vector<std::pair<std::string, std::string>> metrics;    // name -> value
  double wall_clock_s = 0.0;
};

inline std::string manifest_deterministic_text(const RunManifest& m) {
  std::string out = "vta-manifest v1\n";
  out += "command = " + m.command + "\n";
  out += "seed = " + std::to_string(m.seed) + "\n";
  out += "config_hash = " + hash_hex(fnv1a64(m.config_echo)) + "\n";
  for (const auto& [name, hash] : m.inputs) out += "input " + name + " = " + hash + "\n";
  for (const auto& [rel, hash] : m.artifacts)
    out += "artifact " + rel + " = " + hash + "\n";
  for (const auto& [name, value] : m.metrics)
    out += "metric " + name + " = " + value + "\n";
  return out;
}

inline std::string manifest_hash(const RunManifest& m) {
  return hash_hex(fnv1a64(manifest_deterministic_text(m)));
}

// Writes <dir>/<filename> and <dir>/config atomically. Synth runs name the
// file run_manifest because the dataset's own manifest occupies `manifest`.
inline std::string write_manifest(const fs::path& dir, const RunManifest& m,
                                  const std::string& filename = "manifest") {
  const std::string hash = manifest_hash(m);
  std::string text = manifest_deterministic_text(m);
  text += "manifest_hash = " + hash + "\n";
  text += "wall_clock_s = " + fmt_double(m.wall_clock_s) + "\n";
  write_file_atomic(dir / filename, text);
  write_file_atomic(dir / "config", m.config_echo);
  return hash;
}

inline std::string read_manifest_hash(const fs::path& manifest_path) {
  std::istringstream in(read_text_file(manifest_path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("manifest_hash = ", 0) == 0) return trim(line.substr(16));
  }
  throw DataError("no manifest_hash in " + manifest_path.string());
}

}  // namespace vta
