#include <gtest/gtest.h>

#include "testutil.hpp"
#include "vta/checkpoint.hpp"
#include "vta/config.hpp"
#include "vta/manifest.hpp"
#include "vta/pipeline.hpp"

using namespace vta;

TEST(ConfigMap, ParsesCommentsOverridesAndIncludes) {
  testutil::TempDir tmp("cfg");
  write_file_atomic(tmp.path() / "base.cfg", "seed = 1\ntrain.steps = 100\n");
  write_file_atomic(tmp.path() / "main.cfg",
                    "# a comment\ninclude base.cfg\nseed = 42\n\ntrain.batch = 2\n");
  const ConfigMap m = ConfigMap::from_file(tmp.path() / "main.cfg");
  EXPECT_EQ(m.get_long("seed", 0), 42);
  EXPECT_EQ(m.get_long("train.steps", 0), 100);
  EXPECT_EQ(m.get_long("train.batch", 0), 2);
}

TEST(ConfigMap, BadLineIsAConfigError) {
  testutil::TempDir tmp("cfg_bad");
  write_file_atomic(tmp.path() / "bad.cfg", "this is not a key value line\n");
  EXPECT_THROW(ConfigMap::from_file(tmp.path() / "bad.cfg"), ConfigError);
}

TEST(ExperimentConfig, UnknownKeysAreRejected) {
  ConfigMap m;
  m.set("seed", "3");
  m.set("tran.steps", "50");  // typo
  EXPECT_THROW(experiment_config_from_map(m), ConfigError);
}

TEST(ExperimentConfig, DefaultsValidateAndEchoIsCanonical) {
  ConfigMap m;
  m.set("seed", "3");
  const ExperimentConfig cfg = experiment_config_from_map(m);
  cfg.validate();
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.schedule_steps, 300);
  EXPECT_EQ(cfg.guidance.alpha, 3.0);
  EXPECT_EQ(cfg.config_echo, "seed = 3\n");
}

TEST(ExperimentConfig, FusionModalityCompatibilityEnforced) {
  ConfigMap m;
  m.set("modalities", "V");
  m.set("fusion", "xattn_v_add_o");
  const ExperimentConfig cfg = experiment_config_from_map(m);
  EXPECT_THROW(cfg.validate(), ConfigError);

  ConfigMap ok;
  ok.set("modalities", "V,O");
  ok.set("fusion", "xattn_v_add_o");
  experiment_config_from_map(ok).validate();
}

TEST(ExperimentConfig, EmptyModalitiesNeedExplicitUnconditional) {
  ConfigMap m;
  m.set("modalities", "");
  const ExperimentConfig cfg = experiment_config_from_map(m);
  EXPECT_THROW(cfg.validate(false), ConfigError);
  cfg.validate(true);
}

TEST(ExperimentConfig, PaperProfileSetsReferenceWidths) {
  ConfigMap m;
  m.set("model.profile", "paper");
  const ExperimentConfig cfg = experiment_config_from_map(m);
  EXPECT_EQ(cfg.denoiser.d_model, 1024);
  EXPECT_EQ(cfg.denoiser.n_heads, 8);
}

TEST(ModalityParsing, AcceptsSeparatorsAndRejectsGarbage) {
  const ModalitySet m = parse_modalities("V,O,T");
  EXPECT_TRUE(m.video && m.object && m.text);
  const ModalitySet v = parse_modalities("v");
  EXPECT_TRUE(v.video);
  EXPECT_FALSE(v.object || v.text);
  EXPECT_THROW(parse_modalities("V,X"), ConfigError);
}

TEST(MatrixIo, Float32RoundTripWithinPrecision) {
  testutil::TempDir tmp("matio");
  Rng rng(4);
  Mat m(7, 3);
  for (Eigen::Index r = 0; r < 7; ++r)
    for (Eigen::Index c = 0; c < 3; ++c) m(r, c) = rng.normal();
  write_matrix_f32(tmp.path() / "m.f32mat", m);
  const Mat back = read_matrix_f32(tmp.path() / "m.f32mat");
  ASSERT_EQ(back.rows(), 7);
  ASSERT_EQ(back.cols(), 3);
  EXPECT_LT((back - m).cwiseAbs().maxCoeff(), 1e-6);
  // float32 values round trip exactly on the second pass
  write_matrix_f32(tmp.path() / "m2.f32mat", back);
  EXPECT_EQ(read_matrix_f32(tmp.path() / "m2.f32mat"), back);
}

TEST(MatrixIo, CorruptFilesAreDataErrors) {
  testutil::TempDir tmp("matio_bad");
  write_file_atomic(tmp.path() / "short.f32mat", "abc");
  EXPECT_THROW(read_matrix_f32(tmp.path() / "short.f32mat"), DataError);
  EXPECT_THROW(read_matrix_f32(tmp.path() / "missing.f32mat"), DataError);
}

TEST(PcmIo, RoundTrips) {
  testutil::TempDir tmp("pcm");
  const std::vector<double> wave = {0.0, 0.5, -0.5, 0.25};
  write_pcm(tmp.path() / "w.pcm", wave);
  const auto back = read_pcm(tmp.path() / "w.pcm");
  ASSERT_EQ(back.size(), wave.size());
  for (std::size_t i = 0; i < wave.size(); ++i) EXPECT_EQ(back[i], wave[i]);
}

TEST(Checkpoint, RoundTripIsBitExactWithConfigEcho) {
  testutil::TempDir tmp("ckpt");
  nn::ParamStore store;
  Rng rng(6);
  nn::init_xavier(store.add("layer.w", 4, 3), rng);
  nn::init_normal(store.add("layer.b", 1, 4), rng, 0.5);
  const std::string echo = "seed = 5\nlatent.shift = -40\n";
  save_params(tmp.path() / "x.ckpt", store, echo);
  const LoadedCheckpoint loaded = load_params(tmp.path() / "x.ckpt");
  EXPECT_EQ(loaded.config_echo, echo);
  ASSERT_EQ(loaded.store.names().size(), 2u);
  for (const auto& name : store.names()) {
    ASSERT_TRUE(loaded.store.has(name));
    EXPECT_EQ(loaded.store.at(name), store.at(name));
  }
}

TEST(Checkpoint, TruncationAndBadMagicAreDataErrors) {
  testutil::TempDir tmp("ckpt_bad");
  nn::ParamStore store;
  Rng rng(6);
  nn::init_xavier(store.add("w", 3, 3), rng);
  save_params(tmp.path() / "x.ckpt", store, "a = b\n");
  std::string bytes = read_text_file(tmp.path() / "x.ckpt");
  write_file_atomic(tmp.path() / "trunc.ckpt", bytes.substr(0, bytes.size() - 10));
  EXPECT_THROW(load_params(tmp.path() / "trunc.ckpt"), DataError);
  write_file_atomic(tmp.path() / "junk.ckpt", "not a checkpoint");
  EXPECT_THROW(load_params(tmp.path() / "junk.ckpt"), DataError);
}

TEST(Manifest, HashExcludesWallClock) {
  RunManifest a;
  a.command = "train";
  a.seed = 7;
  a.config_echo = "seed = 7\n";
  a.inputs.emplace_back("dataset", "abc");
  a.metrics.emplace_back("loss", "0.5");
  RunManifest b = a;
  a.wall_clock_s = 1.0;
  b.wall_clock_s = 99.0;
  EXPECT_EQ(manifest_hash(a), manifest_hash(b));
  b.metrics.emplace_back("extra", "1");
  EXPECT_NE(manifest_hash(a), manifest_hash(b));
}

TEST(Manifest, WriteThenReadBackHash) {
  testutil::TempDir tmp("manifest");
  RunManifest m;
  m.command = "evaluate";
  m.seed = 3;
  m.config_echo = "seed = 3\n";
  m.wall_clock_s = 0.25;
  const std::string hash = write_manifest(tmp.path(), m);
  EXPECT_EQ(read_manifest_hash(tmp.path() / "manifest"), hash);
  EXPECT_EQ(read_text_file(tmp.path() / "config"), "seed = 3\n");
}

TEST(RunSynth, RejectsZeroScenesWithoutPartialOutput) {
  testutil::TempDir tmp("synth0");
  ConfigMap m;
  const ExperimentConfig cfg = experiment_config_from_map(m);
  EXPECT_THROW(run_synth(cfg, tmp.path() / "ds", 0), ConfigError);
  EXPECT_FALSE(fs::exists(tmp.path() / "ds" / "manifest"));
}

TEST(RunSynth, RerunReproducesManifestHash) {
  testutil::TempDir tmp("synth_rep");
  ConfigMap m;
  m.set("seed", "11");
  const ExperimentConfig cfg = experiment_config_from_map(m);
  const std::string h1 = run_synth(cfg, tmp.path() / "a", 3);
  const std::string h2 = run_synth(cfg, tmp.path() / "b", 3);
  EXPECT_EQ(h1, h2);
  const Dataset ds = load_dataset(tmp.path() / "a");
  EXPECT_EQ(ds.scenes.size(), 3u);
}

TEST(AblationCells, NamesMapToModalitiesAndFusion) {
  const AblationCell v_only = ablation_cell_from_name("v_only");
  EXPECT_TRUE(v_only.modalities.video);
  EXPECT_FALSE(v_only.modalities.object);
  EXPECT_EQ(v_only.fusion, FusionMode::kXattnV);
  const AblationCell v_o = ablation_cell_from_name("v_o");
  EXPECT_TRUE(v_o.modalities.object);
  EXPECT_EQ(v_o.fusion, FusionMode::kXattnVAddO);
  const AblationCell concat = ablation_cell_from_name("z_at_vo_concat");
  EXPECT_EQ(concat.fusion, FusionMode::kXattnConcatVO);
  EXPECT_THROW(ablation_cell_from_name("bogus"), ConfigError);
}

TEST(BarChart, EmitsWellFormedSvg) {
  const std::string svg = bar_chart_svg("title", {{"a", 1.0}, {"b", 2.5}});
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("2.5"), std::string::npos);
}
