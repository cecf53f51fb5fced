#pragma once

#include <set>
#include <string>

#include "vta/common.hpp"
#include "vta/grounding.hpp"
#include "vta/rng.hpp"
#include "vta/scene.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// Shared text/vision embedding space. Text embeddings are hash-seeded unit
// vectors; frame embeddings are visibility-weighted sums of the active
// objects' text embeddings plus a fixed background vector. Both live in the
// same space, which is the one property the conditioning math relies on.

struct EmbeddingSpace {
  int dimension = 64;
  std::uint64_t seed = 1;
};

struct VideoConditioner {
  Mat vectors;  // (T_frames x d)
};

struct TextConditioner {
  Vec vector;  // utterance-level, d
};

inline Vec embed_text(const std::string& label, const EmbeddingSpace& space) {
  require(!label.empty(), "embed_text: empty label");
  Rng rng = Rng::stream(space.seed, "embed.text", fnv1a64(label));
  Vec v(space.dimension);
  double norm = 0.0;
  do {
    for (int i = 0; i < space.dimension; ++i) v[i] = rng.normal();
    norm = v.norm();
  } while (norm < 1e-12);
  return v / norm;
}

inline Vec background_vector(const EmbeddingSpace& space) {
  Rng rng = Rng::stream(space.seed, "embed.background");
  Vec v(space.dimension);
  for (int i = 0; i < space.dimension; ++i) v[i] = rng.normal();
  return v / v.norm();
}

inline Vec embed_frame(const SymbolicFrame& frame, const EmbeddingSpace& space) {
  Vec v = background_vector(space);
  for (const auto& [label, visibility] : frame.active_objects)
    v += visibility * embed_text(label, space);
  return v;
}

inline VideoConditioner build_video_conditioner(const std::vector<SymbolicFrame>& frames,
                                                const EmbeddingSpace& space) {
  require(!frames.empty(), "build_video_conditioner: frames must be non-empty");
  VideoConditioner cond;
  cond.vectors = Mat(static_cast<Eigen::Index>(frames.size()), space.dimension);
  for (std::size_t i = 0; i < frames.size(); ++i)
    cond.vectors.row(static_cast<Eigen::Index>(i)) = embed_frame(frames[i], space).transpose();
  return cond;
}

// Mean of the extracted nouns' embeddings; zero when the caption has no
// lexicon hits. This is the coarse utterance-level text modality.
inline TextConditioner embed_caption(const std::string& caption,
                                     const std::set<std::string>& lexicon,
                                     const EmbeddingSpace& space) {
  TextConditioner cond;
  cond.vector = Vec::Zero(space.dimension);
  const auto nouns = extract_nouns(caption, lexicon);
  if (nouns.empty()) return cond;
  for (const auto& n : nouns) cond.vector += embed_text(n, space);
  cond.vector /= static_cast<double>(nouns.size());
  return cond;
}

// ---------------------------------------------------------------------------
// Affine projection into the denoiser width. Trained jointly with the
// denoiser when used there; exposed standalone with an analytic gradient.

struct Projection {
  Mat weight;  // (d_out x d_in)
  Vec bias;    // d_out
};

inline Projection make_projection(int d_out, int d_in, std::uint64_t seed) {
  Projection p;
  p.weight = Mat(d_out, d_in);
  Rng rng = Rng::stream(seed, "projection");
  const double bound = std::sqrt(6.0 / (d_in + d_out));
  for (int r = 0; r < d_out; ++r)
    for (int c = 0; c < d_in; ++c) p.weight(r, c) = rng.uniform(-bound, bound);
  p.bias = Vec::Zero(d_out);
  return p;
}

// Row-wise affine map: y = x W^T + b.
inline Mat project(const Mat& x, const Projection& p) {
  require(x.cols() == p.weight.cols(), "project: input dimension mismatch");
  require(p.bias.size() == p.weight.rows(), "project: bias dimension mismatch");
  Mat y = x * p.weight.transpose();
  y.rowwise() += p.bias.transpose();
  return y;
}

struct ProjectionGrad {
  Mat dweight;
  Vec dbias;
  Mat dx;
};

inline ProjectionGrad project_grad(const Mat& x, const Projection& p, const Mat& dy) {
  require(dy.rows() == x.rows() && dy.cols() == p.weight.rows(),
          "project_grad: upstream gradient shape mismatch");
  ProjectionGrad g;
  g.dweight = dy.transpose() * x;
  g.dbias = dy.colwise().sum().transpose();
  g.dx = dy * p.weight;
  return g;
}

}  // namespace vta
