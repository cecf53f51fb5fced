#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "vta/common.hpp"
#include "vta/io.hpp"
#include "vta/rng.hpp"
#include "vta/scene.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Frame-level object grounding. The detector is an oracle honoring the
// (labels, probabilities) interface of an open-set grounder: for each
// prompted noun it reports the object's visibility in the frame, optionally
// perturbed by clamped uniform noise. The probability-weighted aggregation
// then turns per-frame detections into one semantic embedding per frame.

struct Detection {
  std::string label;
  double probability = 0.0;  // in [0, 1]
};

struct GroundingResult {
  int frame_index = 0;
  std::vector<Detection> detections;  // one per prompted noun
};

struct SemanticEmbedding {
  int frame_index = 0;
  Vec vector;
};

struct ObjectConditioner {
  Mat vectors;  // (T_frames x d), row per frame
};

using TextEmbedFn = std::function<Vec(const std::string&)>;

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Caption tokens present in the lexicon, deduplicated, in first-occurrence
// order. Tokenization is whitespace splitting; tokens are lowercased.
inline std::vector<std::string> extract_nouns(const std::string& caption,
                                              const std::set<std::string>& lexicon) {
  require(!lexicon.empty(), "extract_nouns: lexicon must be non-empty");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& raw : split_ws(caption)) {
    const std::string tok = lowercase(raw);
    if (lexicon.count(tok) && !seen.count(tok)) {
      seen.insert(tok);
      out.push_back(tok);
    }
  }
  return out;
}

// Probability = visibility when active, 0 otherwise, perturbed by uniform
// noise of half-width noise_level and clamped to [0, 1]. Deterministic per
// (seed, frame index), so frames may be grounded in parallel.
inline GroundingResult ground_frame(const SymbolicFrame& frame,
                                    const std::vector<std::string>& nouns,
                                    double noise_level, std::uint64_t seed) {
  require(!nouns.empty(), "ground_frame: empty noun list, nothing to prompt");
  require(noise_level >= 0.0 && noise_level < 1.0, "ground_frame: noise_level in [0,1)");
  Rng rng = Rng::stream(seed, "ground", static_cast<std::uint64_t>(frame.index));
  GroundingResult result;
  result.frame_index = frame.index;
  for (const auto& noun : nouns) {
    double p = 0.0;
    for (const auto& [label, visibility] : frame.active_objects)
      if (label == noun) p = visibility;
    if (noise_level > 0.0) p += rng.uniform(-noise_level, noise_level);
    result.detections.push_back({noun, std::clamp(p, 0.0, 1.0)});
  }
  return result;
}

// s_i = sum_j p_j * E_t(o_j); the empty sum is the zero vector.
inline SemanticEmbedding aggregate_semantics(const GroundingResult& result,
                                             const TextEmbedFn& embed_text, int dim) {
  SemanticEmbedding s;
  s.frame_index = result.frame_index;
  s.vector = Vec::Zero(dim);
  for (const auto& det : result.detections) {
    const Vec e = embed_text(det.label);
    require(e.size() == dim, "aggregate_semantics: embedding dimension mismatch");
    s.vector += det.probability * e;
  }
  return s;
}

// extract_nouns -> ground_frame -> aggregate_semantics, per frame. A caption
// with no lexicon hits degrades to a zero conditioner (logged), which the
// diffusion side treats as video-only conditioning.
inline ObjectConditioner build_object_conditioner(const std::vector<SymbolicFrame>& frames,
                                                  const std::string& caption,
                                                  const std::set<std::string>& lexicon,
                                                  const TextEmbedFn& embed_text, int dim,
                                                  double noise_level, std::uint64_t seed) {
  require(!frames.empty(), "build_object_conditioner: frames must be non-empty");
  ObjectConditioner cond;
  cond.vectors = Mat::Zero(static_cast<Eigen::Index>(frames.size()), dim);
  const std::vector<std::string> nouns = extract_nouns(caption, lexicon);
  if (nouns.empty()) {
    warn("caption has no lexicon nouns; object conditioner is zero: \"" + caption + "\"");
    return cond;
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const GroundingResult g = ground_frame(frames[i], nouns, noise_level, seed);
    cond.vectors.row(static_cast<Eigen::Index>(i)) =
        aggregate_semantics(g, embed_text, dim).vector.transpose();
  }
  return cond;
}

// Lexicon file: one lowercase token per line; '#' starts a comment.
inline std::set<std::string> load_lexicon(const fs::path& path) {
  std::set<std::string> lex;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const std::string tok = trim(line);
    if (tok.empty() || tok[0] == '#') continue;
    lex.insert(lowercase(tok));
  }
  if (lex.empty()) throw DataError("lexicon file is empty: " + path.string());
  return lex;
}

inline std::set<std::string> default_lexicon_set() {
  const auto& words = default_lexicon();
  return {words.begin(), words.end()};
}

}  // namespace vta
