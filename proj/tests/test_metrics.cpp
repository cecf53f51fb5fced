#include <gtest/gtest.h>

#include <cmath>

#include "testutil.hpp"
#include "vta/embedding.hpp"
#include "vta/metrics.hpp"
#include "vta/scene.hpp"

using namespace vta;

namespace {

Mat random_set(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Mat m(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = rng.normal();
  return m;
}

SceneScript single_event_scene(SoundClass cls, double freq, double onset = 0.3,
                               double offset = 2.0) {
  SceneScript s;
  s.duration_s = 2.0;
  s.fps = 10;
  s.sample_rate_hz = 16000;
  s.caption = "a scene with a dog";
  s.seed = 5;
  s.events.push_back({"dog", cls, onset, offset, freq});
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Frechet distance

TEST(Frechet, IdenticalSetsScoreZero) {
  const Mat x = random_set(20, 4, 1);
  EXPECT_NEAR(frechet_distance({x, "a"}, {x, "b"}), 0.0, 1e-6);
}

TEST(Frechet, OneDimensionalClosedForm) {
  // Sets fitted to (mu=0, sigma=1) and (mu=1, sigma=1): FD = 1.
  Mat a(2, 1), b(2, 1);
  const double v = 1.0 / std::sqrt(2.0);
  a << -v, v;
  b << 1.0 - v, 1.0 + v;
  EXPECT_NEAR(frechet_distance({a, "a"}, {b, "b"}), 1.0, 1e-6);
}

TEST(Frechet, MeanShiftClosedForm) {
  const Mat a = random_set(30, 3, 2);
  Vec delta(3);
  delta << 0.5, -1.0, 2.0;
  Mat b = a;
  b.rowwise() += delta.transpose();
  EXPECT_NEAR(frechet_distance({a, "a"}, {b, "b"}), delta.squaredNorm(), 1e-6);
}

TEST(Frechet, SymmetricAndNonnegative) {
  const Mat a = random_set(15, 4, 3);
  const Mat b = random_set(25, 4, 4);
  const double ab = frechet_distance({a, "a"}, {b, "b"});
  const double ba = frechet_distance({b, "b"}, {a, "a"});
  EXPECT_NEAR(ab, ba, 1e-9);
  EXPECT_GE(ab, 0.0);
}

TEST(Frechet, ContractViolations) {
  const Mat one = random_set(1, 3, 5);
  const Mat ok = random_set(5, 3, 6);
  EXPECT_THROW(frechet_distance({one, "a"}, {ok, "b"}), ContractError);
  EXPECT_THROW(frechet_distance({random_set(5, 2, 7), "a"}, {ok, "b"}), ContractError);
}

// ---------------------------------------------------------------------------
// KL metric

TEST(KlMetric, IdenticalPairsScoreZero) {
  ClassPosterior p;
  p.probs = Vec(3);
  p.probs << 0.2, 0.5, 0.3;
  EXPECT_EQ(kl_metric({{p, p}, {p, p}}), 0.0);
}

TEST(KlMetric, HandCaseIsLogTwo) {
  ClassPosterior ref, gen;
  ref.probs = Vec(2);
  ref.probs << 1.0, 0.0;
  gen.probs = Vec(2);
  gen.probs << 0.5, 0.5;
  EXPECT_NEAR(kl_metric({{gen, ref}}), std::log(2.0), 1e-9);
}

TEST(KlMetric, UniformPairsScoreZeroRegardlessOfCount) {
  ClassPosterior u;
  u.probs = Vec::Constant(2, 0.5);
  std::vector<std::pair<ClassPosterior, ClassPosterior>> pairs(17, {u, u});
  EXPECT_EQ(kl_metric(pairs), 0.0);
}

TEST(KlMetric, LengthMismatchViolatesContract) {
  ClassPosterior a, b;
  a.probs = Vec::Constant(2, 0.5);
  b.probs = Vec::Constant(3, 1.0 / 3.0);
  EXPECT_THROW(kl_metric({{a, b}}), ContractError);
}

TEST(KlMetric, NonnegativeOnRandomPosteriors) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    ClassPosterior a, b;
    a.probs = Vec(4);
    b.probs = Vec(4);
    for (int k = 0; k < 4; ++k) {
      a.probs[k] = rng.uniform() + 1e-6;
      b.probs[k] = rng.uniform() + 1e-6;
    }
    a.probs /= a.probs.sum();
    b.probs /= b.probs.sum();
    EXPECT_GE(kl_metric({{a, b}}), -1e-12);
  }
}

// ---------------------------------------------------------------------------
// Audio classifier

TEST(ClassifyAudio, EachPrimitiveIsRecognized) {
  const AudioClassifierParams params = make_audio_classifier(16000);
  const std::vector<std::pair<SoundClass, double>> cases = {
      {SoundClass::kBeep, 440.0},
      {SoundClass::kBeep, 700.0},
      {SoundClass::kBurst, 600.0},
      {SoundClass::kBurst, 1000.0},
      {SoundClass::kChirp, 200.0},
      {SoundClass::kChirp, 400.0},
      {SoundClass::kThump, 50.0},
      {SoundClass::kThump, 80.0},
  };
  for (const auto& [cls, freq] : cases) {
    const auto wave = render_audio(single_event_scene(cls, freq));
    const ClassPosterior post = classify_audio(wave, params);
    Eigen::Index argmax = 0;
    post.probs.maxCoeff(&argmax);
    EXPECT_EQ(argmax, static_cast<Eigen::Index>(cls))
        << to_string(cls) << " at " << freq << " Hz -> " << post.probs.transpose();
  }
}

TEST(ClassifyAudio, SilenceGivesUniformPosterior) {
  const AudioClassifierParams params = make_audio_classifier(16000);
  const ClassPosterior post = classify_audio(std::vector<double>(16000, 0.0), params);
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(post.probs[k], 0.25);
}

TEST(ClassifyAudio, PosteriorSumsToOne) {
  const AudioClassifierParams params = make_audio_classifier(16000);
  const auto wave = render_audio(single_event_scene(SoundClass::kChirp, 300.0));
  EXPECT_NEAR(classify_audio(wave, params).probs.sum(), 1.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Onset detection

TEST(DetectOnsets, SilenceGivesEmptyList) {
  EXPECT_TRUE(detect_onsets(std::vector<double>(8000, 0.0), 16000).times.empty());
}

TEST(DetectOnsets, TwoBeepsDetectedWithin25Ms) {
  SceneScript s;
  s.duration_s = 3.0;
  s.fps = 10;
  s.sample_rate_hz = 16000;
  s.caption = "a scene with a dog and a car";
  s.seed = 2;
  s.events.push_back({"dog", SoundClass::kBeep, 1.0, 1.5, 440.0});
  s.events.push_back({"car", SoundClass::kBeep, 2.0, 2.5, 550.0});
  const auto onsets = detect_onsets(render_audio(s), 16000);
  ASSERT_EQ(onsets.times.size(), 2u) << "detected " << onsets.times.size();
  EXPECT_NEAR(onsets.times[0], 1.0, 0.025);
  EXPECT_NEAR(onsets.times[1], 2.0, 0.025);
}

TEST(DetectOnsets, OutputIsSortedAscending) {
  GenerationBounds bounds;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto wave = render_audio(generate_scene(seed, bounds));
    const auto onsets = detect_onsets(wave, 16000);
    for (std::size_t i = 1; i < onsets.times.size(); ++i)
      EXPECT_LE(onsets.times[i - 1], onsets.times[i]);
  }
}

// ---------------------------------------------------------------------------
// Video peak detection

TEST(DetectVideoPeaks, ConstantFramesGiveNoPeaks) {
  const EmbeddingSpace space{16, 1};
  Mat frames(10, 16);
  const Vec bg = background_vector(space);
  for (int i = 0; i < 10; ++i) frames.row(i) = bg.transpose();
  EXPECT_TRUE(detect_video_peaks(frames, 10.0).times.empty());
}

TEST(DetectVideoPeaks, AppearanceAtFrameTenPeaksNearOneSecond) {
  const EmbeddingSpace space{16, 1};
  SceneScript s;
  s.duration_s = 3.0;
  s.fps = 10;
  s.sample_rate_hz = 16000;
  s.caption = "a scene with a dog";
  s.events.push_back({"dog", SoundClass::kBeep, 1.0, 3.0, 440.0});
  const auto frames = render_frames(s);
  Mat embeds(static_cast<Eigen::Index>(frames.size()), 16);
  for (std::size_t i = 0; i < frames.size(); ++i)
    embeds.row(static_cast<Eigen::Index>(i)) = embed_frame(frames[i], space).transpose();
  const auto peaks = detect_video_peaks(embeds, 10.0);
  ASSERT_EQ(peaks.times.size(), 1u);
  EXPECT_NEAR(peaks.times[0], 1.0, 0.15);
}

TEST(DetectVideoPeaks, SecondDisjointAppearanceAddsExactlyOnePeak) {
  const EmbeddingSpace space{16, 1};
  SceneScript s;
  s.duration_s = 3.0;
  s.fps = 10;
  s.sample_rate_hz = 16000;
  s.caption = "a scene with a dog and a car";
  s.events.push_back({"dog", SoundClass::kBeep, 0.5, 3.0, 440.0});
  auto embeds_of = [&](const SceneScript& script) {
    const auto frames = render_frames(script);
    Mat embeds(static_cast<Eigen::Index>(frames.size()), 16);
    for (std::size_t i = 0; i < frames.size(); ++i)
      embeds.row(static_cast<Eigen::Index>(i)) = embed_frame(frames[i], space).transpose();
    return embeds;
  };
  const std::size_t base = detect_video_peaks(embeds_of(s), 10.0).times.size();
  s.events.push_back({"car", SoundClass::kThump, 2.0, 3.0, 60.0});
  const std::size_t with_second = detect_video_peaks(embeds_of(s), 10.0).times.size();
  EXPECT_EQ(with_second, base + 1);
}

// ---------------------------------------------------------------------------
// AV-Align

TEST(AvAlign, IdenticalListsScorePerfectly) {
  OnsetList a{{0.5, 1.2, 2.7}};
  EXPECT_EQ(av_align(a, a, 0.1), 1.0);
}

TEST(AvAlign, DisjointListsScoreZero) {
  OnsetList a{{0.5, 1.5}};
  OnsetList b{{3.0, 4.0}};
  EXPECT_EQ(av_align(a, b, 0.1), 0.0);
}

TEST(AvAlign, HandCaseOneThird) {
  OnsetList audio{{1.0, 2.0}};
  OnsetList video{{1.0, 5.0}};
  EXPECT_EQ(av_align(audio, video, 0.1), 1.0 / 3.0);
}

TEST(AvAlign, BothEmptyScoreOne) {
  EXPECT_EQ(av_align({}, {}, 0.1), 1.0);
}

TEST(AvAlign, SymmetricUnderSwap) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    OnsetList a, b;
    for (int i = 0; i < rng.uniform_int(0, 6); ++i) a.times.push_back(rng.uniform(0, 5));
    for (int i = 0; i < rng.uniform_int(0, 6); ++i) b.times.push_back(rng.uniform(0, 5));
    std::sort(a.times.begin(), a.times.end());
    std::sort(b.times.begin(), b.times.end());
    const double ab = av_align(a, b, 0.2);
    EXPECT_EQ(ab, av_align(b, a, 0.2));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(AvAlign, ShiftBeyondWindowStrictlyLowersScore) {
  OnsetList a{{1.0, 2.0, 3.0}};
  OnsetList shifted;
  for (double t : a.times) shifted.times.push_back(t + 0.25);
  const double aligned = av_align(a, a, 0.1);
  const double misaligned = av_align(a, shifted, 0.1);
  EXPECT_LT(misaligned, aligned);
}

TEST(AvAlign, GroundTruthCorpusScoresPerfectAlignment) {
  // The alignment corpus pairs each audio onset with exactly one embedding
  // change, so detection on clean scenes matches one-to-one.
  const EmbeddingSpace space{64, 1};
  GenerationBounds bounds;
  double total = 0.0;
  const int n = 10;
  for (int i = 0; i < n; ++i) {
    const SceneScript s = generate_scene(static_cast<std::uint64_t>(200 + i), bounds);
    const auto frames = render_frames(s);
    Mat embeds(static_cast<Eigen::Index>(frames.size()), 64);
    for (std::size_t f = 0; f < frames.size(); ++f)
      embeds.row(static_cast<Eigen::Index>(f)) = embed_frame(frames[f], space).transpose();
    total += av_align(detect_onsets(render_audio(s), s.sample_rate_hz),
                      detect_video_peaks(embeds, s.fps), 0.1);
  }
  EXPECT_GE(total / n, 0.9);
}

TEST(MelStatsEmbedder, ProducesFiniteFixedWidthVectors) {
  MelParams p;
  p.n_mels = 32;
  p.n_fft = 512;
  p.hop = 256;
  const AudioEmbedder embed = make_mel_stats_embedder(p);
  const auto wave = render_audio(single_event_scene(SoundClass::kBeep, 500.0));
  const Vec e = embed(wave);
  EXPECT_EQ(e.size(), 64);
  EXPECT_TRUE(e.allFinite());
}
