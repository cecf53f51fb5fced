#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vta/checkpoint.hpp"
#include "vta/config.hpp"
#include "vta/diffusion.hpp"
#include "vta/manifest.hpp"
#include "vta/metrics.hpp"
#include "vta/report.hpp"

namespace vta {

// ---------------------------------------------------------------------------
// End-to-end drivers behind the CLI subcommands. Each run writes into a fresh
// directory: config echo, manifest with content hashes, and the artifacts.

struct LatentNorm {
  double shift = 0.0;
  double scale = 1.0;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Raw-space conditioners for one scene, per the requested modality set.
inline ConditionerSet build_conditioners(const SceneScript& script,
                                         const std::vector<SymbolicFrame>& frames,
                                         const ExperimentConfig& cfg,
                                         const ModalitySet& mods, std::uint64_t ground_seed) {
  ConditionerSet cond;
  if (mods.video) cond.video = build_video_conditioner(frames, cfg.space).vectors;
  if (mods.object) {
    const auto lex = cfg.lexicon();
    cond.object = build_object_conditioner(
                      frames, script.caption, lex,
                      [&](const std::string& label) { return embed_text(label, cfg.space); },
                      cfg.space.dimension, cfg.grounding_noise, ground_seed)
                      .vectors;
  }
  if (mods.text)
    cond.text = embed_caption(script.caption, cfg.lexicon(), cfg.space).vector.transpose();
  return cond;
}

// Latent tokens (T_lat x C) for one scene's audio.
inline Mat latent_tokens(const std::vector<double>& wave, const ExperimentConfig& cfg,
                         const VaeParams& vae) {
  const MelSpectrogram mel = compute_mel(wave, cfg.mel);
  const auto [mean, logvar] = vae_encode(mel, vae);
  return mean.values.transpose();
}

inline int latent_len_for_duration(const ExperimentConfig& cfg, double duration_s) {
  const long len = std::llround(duration_s * cfg.bounds.sample_rate_hz);
  require(len >= cfg.mel.n_fft, "scene shorter than one analysis frame");
  const int t_mel = 1 + static_cast<int>((len - cfg.mel.n_fft) / cfg.mel.hop);
  return latent_frames(t_mel, cfg.vae.downsample);
}

// ---------------------------------------------------------------------------
// synth

inline std::string run_synth(const ExperimentConfig& cfg, const fs::path& out_dir, int n) {
  Stopwatch clock;
  require_config(n >= 1, "synth: need at least one scene");
  validate_bounds(cfg.bounds);
  std::vector<SceneScript> scenes;
  scenes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    scenes.push_back(generate_scene(cfg.seed + static_cast<std::uint64_t>(i), cfg.bounds));
  save_dataset(scenes, out_dir);

  RunManifest m;
  m.command = "synth";
  m.seed = cfg.seed;
  m.config_echo = cfg.config_echo;
  m.artifacts.emplace_back("manifest(dataset)", hash_file(out_dir / "manifest"));
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string stem = scene_stem(i);
    m.artifacts.emplace_back(stem + ".script", hash_file(out_dir / (stem + ".script")));
    m.artifacts.emplace_back(stem + ".pcm", hash_file(out_dir / (stem + ".pcm")));
  }
  m.metrics.emplace_back("scenes", std::to_string(n));
  m.wall_clock_s = clock.seconds();
  return write_manifest(out_dir, m, "run_manifest");
}

// ---------------------------------------------------------------------------
// train

namespace detail {

inline LatentNorm fit_latent_norm(const std::vector<Mat>& latents) {
  double sum = 0.0, sum_sq = 0.0;
  long count = 0;
  for (const Mat& z : latents) {
    sum += z.sum();
    sum_sq += z.squaredNorm();
    count += z.size();
  }
  LatentNorm norm;
  const double mean = sum / static_cast<double>(count);
  const double var = sum_sq / static_cast<double>(count) - mean * mean;
  norm.shift = mean;
  norm.scale = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
  return norm;
}

inline LatentNorm parse_latent_norm(const std::string& echo) {
  LatentNorm norm;
  std::istringstream in(echo);
  std::string line;
  bool found = false;
  while (std::getline(in, line)) {
    if (line.rfind("latent.shift = ", 0) == 0) {
      norm.shift = parse_double(trim(line.substr(15)), "checkpoint latent.shift");
      found = true;
    } else if (line.rfind("latent.scale = ", 0) == 0) {
      norm.scale = parse_double(trim(line.substr(15)), "checkpoint latent.scale");
    }
  }
  if (!found) throw DataError("checkpoint echo is missing the latent normalization");
  return norm;
}

inline VaeParams load_vae(const ExperimentConfig& cfg, const fs::path& vae_ckpt) {
  VaeParams vae = make_vae(cfg.vae, cfg.seed);
  if (cfg.vae.identity) return vae;
  require_config(!vae_ckpt.empty(),
                 "vae.mode = trained requires --vae <checkpoint>");
  LoadedCheckpoint loaded = load_params(vae_ckpt);
  for (const auto& name : vae.store.names()) {
    require(loaded.store.has(name), "vae checkpoint missing parameter " + name);
    const Mat& got = loaded.store.at(name);
    Mat& dst = vae.store.at(name);
    require(got.rows() == dst.rows() && got.cols() == dst.cols(),
            "vae checkpoint shape mismatch for " + name);
    dst = got;
  }
  return vae;
}

}  // namespace detail

struct TrainResult {
  fs::path checkpoint;
  std::string manifest_hash;
  double first_window_loss = 0.0;
  double last_window_loss = 0.0;
};

inline TrainResult run_train(const ExperimentConfig& cfg, const fs::path& dataset_dir,
                             const fs::path& out_dir, const std::string& component = "ldm",
                             const fs::path& vae_ckpt = {}) {
  Stopwatch clock;
  cfg.validate();
  const Dataset ds = load_dataset(dataset_dir);
  require_config(!ds.scenes.empty(), "train: dataset is empty");
  fs::create_directories(out_dir / "checkpoints");

  RunManifest m;
  m.command = "train";
  m.seed = cfg.seed;
  m.config_echo = cfg.config_echo;
  m.inputs.emplace_back("dataset", hash_file(dataset_dir / "manifest"));

  TrainResult result;
  std::string log_text = "step\tloss\tlr\n";
  std::string ckpt_echo = cfg.config_echo;

  if (component == "vae") {
    require_config(!cfg.vae.identity,
                   "train --component vae requires vae.mode = trained");
    VaeParams vae = make_vae(cfg.vae, cfg.seed);
    std::vector<MelSpectrogram> mels;
    for (std::size_t i = 0; i < ds.scenes.size(); ++i)
      mels.push_back(compute_mel(load_scene_audio(ds, i), cfg.mel));
    const std::vector<double> losses = train_vae(vae, mels, cfg.vae_train);
    for (std::size_t s = 0; s < losses.size(); ++s)
      log_text += std::to_string(s) + "\t" + fmt_double(losses[s]) + "\t" +
                  fmt_double(cfg.vae_train.lr) + "\n";
    result.checkpoint = out_dir / "checkpoints" / "vae.ckpt";
    save_params(result.checkpoint, vae.store, ckpt_echo);
  } else {
    require_config(component == "ldm", "train: component must be ldm or vae");
    const VaeParams vae = detail::load_vae(cfg, vae_ckpt);

    std::vector<Mat> latents;
    std::vector<ConditionerSet> conds;
    for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
      latents.push_back(latent_tokens(load_scene_audio(ds, i), cfg, vae));
      const auto frames = render_frames(ds.scenes[i]);
      conds.push_back(build_conditioners(ds.scenes[i], frames, cfg, cfg.modalities,
                                         derive_seed(cfg.seed, "grounding", i)));
    }
    const LatentNorm norm = detail::fit_latent_norm(latents);
    std::vector<TrainingExample> data;
    data.reserve(latents.size());
    for (std::size_t i = 0; i < latents.size(); ++i)
      data.push_back({(latents[i].array() - norm.shift).matrix() / norm.scale,
                      std::move(conds[i])});

    DenoiserParams params = make_denoiser(cfg.denoiser, cfg.seed);
    const NoiseSchedule schedule = cfg.schedule();
    const std::vector<TrainLogRow> log =
        train_denoiser(params, data, schedule, cfg.fusion, cfg.train);
    for (const auto& row : log)
      log_text += std::to_string(row.step) + "\t" + fmt_double(row.loss) + "\t" +
                  fmt_double(row.lr) + "\n";

    const std::size_t window = std::min<std::size_t>(50, log.size());
    for (std::size_t i = 0; i < window; ++i) {
      result.first_window_loss += log[i].loss / static_cast<double>(window);
      result.last_window_loss += log[log.size() - 1 - i].loss / static_cast<double>(window);
    }

    ckpt_echo += "latent.shift = " + fmt_double(norm.shift) + "\n";
    ckpt_echo += "latent.scale = " + fmt_double(norm.scale) + "\n";
    result.checkpoint = out_dir / "checkpoints" / "final.ckpt";
    save_params(result.checkpoint, params.store, ckpt_echo);
  }

  write_file_atomic(out_dir / "train_log.tsv", log_text);
  m.artifacts.emplace_back("checkpoints/" + result.checkpoint.filename().string(),
                           hash_file(result.checkpoint));
  m.artifacts.emplace_back("train_log.tsv", hash_file(out_dir / "train_log.tsv"));
  m.metrics.emplace_back("final_window_loss", fmt_double(result.last_window_loss));
  m.wall_clock_s = clock.seconds();
  result.manifest_hash = write_manifest(out_dir, m);
  return result;
}

// ---------------------------------------------------------------------------
// generate

inline std::string run_generate(const ExperimentConfig& cfg, const fs::path& ckpt_path,
                                const fs::path& dataset_dir, const fs::path& out_dir,
                                bool unconditional = false,
                                const fs::path& vae_ckpt = {}) {
  Stopwatch clock;
  cfg.validate(unconditional);
  const Dataset ds = load_dataset(dataset_dir);
  require_config(!ds.scenes.empty(), "generate: dataset is empty");

  const LoadedCheckpoint loaded = load_params(ckpt_path);
  DenoiserParams params;
  params.config = cfg.denoiser;
  validate_denoiser_config(params.config);
  {
    DenoiserParams expected = make_denoiser(cfg.denoiser, cfg.seed);
    for (const auto& name : expected.store.names()) {
      if (!loaded.store.has(name))
        throw ConfigError("checkpoint is missing parameter " + name +
                          "; model profile does not match");
      const Mat& got = loaded.store.at(name);
      const Mat& want = expected.store.at(name);
      if (got.rows() != want.rows() || got.cols() != want.cols())
        throw ConfigError("checkpoint shape mismatch for " + name);
    }
    params.store = loaded.store;
  }
  const LatentNorm norm = detail::parse_latent_norm(loaded.config_echo);
  const VaeParams vae = detail::load_vae(cfg, vae_ckpt);
  const NoiseSchedule schedule = cfg.schedule();

  fs::create_directories(out_dir / "audio");
  fs::create_directories(out_dir / "mel");

  RunManifest m;
  m.command = "generate";
  m.seed = cfg.seed;
  m.config_echo = cfg.config_echo;
  m.inputs.emplace_back("dataset", hash_file(dataset_dir / "manifest"));
  m.inputs.emplace_back("checkpoint", hash_file(ckpt_path));

  const ModalitySet mods = unconditional ? ModalitySet{false, false, false} : cfg.modalities;
  for (std::size_t i = 0; i < ds.scenes.size(); ++i) {
    const SceneScript& script = ds.scenes[i];
    const auto frames = render_frames(script);
    const ConditionerSet cond =
        build_conditioners(script, frames, cfg, mods, derive_seed(cfg.seed, "grounding", i));
    const int t_lat = latent_len_for_duration(cfg, script.duration_s);
    const Mat z = sample(cond, params, schedule, cfg.guidance, cfg.fusion, t_lat,
                         derive_seed(cfg.seed, "generate", i));

    Latent latent;
    latent.downsample = cfg.vae.downsample;
    latent.values = (z.array() * norm.scale + norm.shift).matrix().transpose();
    const MelSpectrogram mel = vae_decode(latent, vae, cfg.mel);
    std::vector<double> wave = reconstruct_waveform(mel, cfg.gl_iters);
    const auto want_len = static_cast<std::size_t>(
        std::llround(script.duration_s * script.sample_rate_hz));
    wave.resize(want_len, 0.0);
    for (auto& s : wave) s = std::clamp(s, -1.0, 1.0);

    const std::string stem = scene_stem(i);
    write_pcm(out_dir / "audio" / (stem + ".pcm"), wave);
    write_matrix_f32(out_dir / "mel" / (stem + ".f32mat"), mel.values);
    m.artifacts.emplace_back("audio/" + stem + ".pcm",
                             hash_file(out_dir / "audio" / (stem + ".pcm")));
    m.artifacts.emplace_back("mel/" + stem + ".f32mat",
                             hash_file(out_dir / "mel" / (stem + ".f32mat")));
  }
  m.metrics.emplace_back("scenes", std::to_string(ds.scenes.size()));
  m.wall_clock_s = clock.seconds();
  return write_manifest(out_dir, m);
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalRow {
  std::string clip;
  double kl = 0.0;
  double av_align = 0.0;
};

struct EvalSummary {
  double fd = 0.0;
  double mean_kl = 0.0;
  double mean_av_align = 0.0;
  std::vector<EvalRow> rows;
  std::string manifest_hash;
};

namespace detail {

inline fs::path find_clip_audio(const fs::path& dir, const std::string& stem) {
  const fs::path nested = dir / "audio" / (stem + ".pcm");
  if (fs::exists(nested)) return nested;
  const fs::path flat = dir / (stem + ".pcm");
  if (fs::exists(flat)) return flat;
  return {};
}

}  // namespace detail

inline EvalSummary run_evaluate(const ExperimentConfig& cfg, const fs::path& generated_dir,
                                const fs::path& reference_dir, const fs::path& out_dir) {
  Stopwatch clock;
  const Dataset ref = load_dataset(reference_dir);
  require_config(ref.scenes.size() >= 2, "evaluate: need at least 2 reference clips");

  // Match clip ids up front; report every missing id at once.
  std::vector<fs::path> gen_paths(ref.scenes.size());
  std::string missing;
  for (std::size_t i = 0; i < ref.scenes.size(); ++i) {
    const std::string stem = scene_stem(i);
    gen_paths[i] = detail::find_clip_audio(generated_dir, stem);
    if (gen_paths[i].empty()) missing += (missing.empty() ? "" : ", ") + stem;
  }
  if (!missing.empty())
    throw DataError("evaluate: generated clips missing for ids: " + missing);

  const AudioClassifierParams classifier = make_audio_classifier(ref.sample_rate_hz);
  const AudioEmbedder embedder = make_mel_stats_embedder(cfg.mel);

  EvalSummary summary;
  Mat gen_embeds, ref_embeds;
  std::vector<std::pair<ClassPosterior, ClassPosterior>> kl_pairs;
  for (std::size_t i = 0; i < ref.scenes.size(); ++i) {
    const std::vector<double> gen_wave = read_pcm(gen_paths[i]);
    const std::vector<double> ref_wave = load_scene_audio(ref, i);
    const auto frames = render_frames(ref.scenes[i]);
    Mat frame_embeds(static_cast<Eigen::Index>(frames.size()), cfg.space.dimension);
    for (std::size_t f = 0; f < frames.size(); ++f)
      frame_embeds.row(static_cast<Eigen::Index>(f)) =
          embed_frame(frames[f], cfg.space).transpose();

    EvalRow row;
    row.clip = scene_stem(i);
    kl_pairs.emplace_back(classify_audio(gen_wave, classifier),
                          classify_audio(ref_wave, classifier));
    row.kl = kl_metric({kl_pairs.back()});
    row.av_align = av_align(detect_onsets(gen_wave, ref.sample_rate_hz, cfg.onset),
                            detect_video_peaks(frame_embeds, ref.fps), cfg.av_window);
    summary.rows.push_back(row);

    const Vec ge = embedder(gen_wave);
    const Vec re = embedder(ref_wave);
    if (i == 0) {
      gen_embeds = Mat(static_cast<Eigen::Index>(ref.scenes.size()), ge.size());
      ref_embeds = Mat(static_cast<Eigen::Index>(ref.scenes.size()), re.size());
    }
    gen_embeds.row(static_cast<Eigen::Index>(i)) = ge.transpose();
    ref_embeds.row(static_cast<Eigen::Index>(i)) = re.transpose();
  }

  summary.fd = frechet_distance({gen_embeds, "generated"}, {ref_embeds, "reference"});
  summary.mean_kl = kl_metric(kl_pairs);
  for (const auto& row : summary.rows)
    summary.mean_av_align += row.av_align / static_cast<double>(summary.rows.size());

  fs::create_directories(out_dir);
  std::string report = "vta-report v1\nclip\tkl\tav_align\n";
  for (const auto& row : summary.rows)
    report += row.clip + "\t" + fmt_double(row.kl) + "\t" + fmt_double(row.av_align) + "\n";
  report += "summary fd = " + fmt_double(summary.fd) + "\n";
  report += "summary mean_kl = " + fmt_double(summary.mean_kl) + "\n";
  report += "summary mean_av_align = " + fmt_double(summary.mean_av_align) + "\n";
  write_file_atomic(out_dir / "report", report);

  RunManifest m;
  m.command = "evaluate";
  m.seed = cfg.seed;
  m.config_echo = cfg.config_echo;
  m.inputs.emplace_back("reference", hash_file(reference_dir / "manifest"));
  m.artifacts.emplace_back("report", hash_file(out_dir / "report"));
  m.metrics.emplace_back("fd", fmt_double(summary.fd));
  m.metrics.emplace_back("mean_kl", fmt_double(summary.mean_kl));
  m.metrics.emplace_back("mean_av_align", fmt_double(summary.mean_av_align));
  m.wall_clock_s = clock.seconds();
  summary.manifest_hash = write_manifest(out_dir, m);
  return summary;
}

// ---------------------------------------------------------------------------
// ablate

struct AblationCell {
  std::string name;
  ModalitySet modalities;
  FusionMode fusion;
};

inline AblationCell ablation_cell_from_name(const std::string& name) {
  if (name == "t_only") return {name, {false, false, true}, FusionMode::kXattnV};
  if (name == "v_only") return {name, {true, false, false}, FusionMode::kXattnV};
  if (name == "v_t") return {name, {true, false, true}, FusionMode::kXattnV};
  if (name == "v_o") return {name, {true, true, false}, FusionMode::kXattnVAddO};
  if (name == "v_o_t") return {name, {true, true, true}, FusionMode::kXattnVAddO};
  if (name == "z_at_v") return {name, {true, false, false}, FusionMode::kXattnV};
  if (name == "z_at_vo_concat")
    return {name, {true, true, false}, FusionMode::kXattnConcatVO};
  if (name == "z_at_o_add_v") return {name, {true, true, false}, FusionMode::kXattnOAddV};
  if (name == "z_at_v_add_o") return {name, {true, true, false}, FusionMode::kXattnVAddO};
  throw ConfigError("unknown ablation cell '" + name + "'");
}

struct AblationRow {
  std::string cell;
  bool ok = false;
  std::string error;
  EvalSummary eval;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  bool all_ok = true;
  std::string manifest_hash;
};

inline AblationResult run_ablate(const ExperimentConfig& cfg, const fs::path& train_ds,
                                 const fs::path& eval_ds, const fs::path& out_dir,
                                 const std::string& cells_csv = "") {
  Stopwatch clock;
  const std::string spec = cells_csv.empty() ? cfg.ablate_cells : cells_csv;
  std::vector<AblationCell> cells;
  {
    std::istringstream ss(spec);
    std::string name;
    while (std::getline(ss, name, ',')) {
      const std::string t = trim(name);
      if (!t.empty()) cells.push_back(ablation_cell_from_name(t));
    }
  }
  require_config(!cells.empty(), "ablate: no cells requested");

  AblationResult result;
  fs::create_directories(out_dir / "cells");
  for (const auto& cell : cells) {
    AblationRow row;
    row.cell = cell.name;
    ExperimentConfig cell_cfg = cfg;
    cell_cfg.modalities = cell.modalities;
    cell_cfg.fusion = cell.fusion;
    cell_cfg.config_echo = cfg.config_echo + "cell.name = " + cell.name + "\n" +
                           "cell.modalities = " + cell.modalities.to_string() + "\n" +
                           "cell.fusion = " + to_string(cell.fusion) + "\n";
    const fs::path cell_dir = out_dir / "cells" / cell.name;
    try {
      const TrainResult tr = run_train(cell_cfg, train_ds, cell_dir / "train");
      run_generate(cell_cfg, tr.checkpoint, eval_ds, cell_dir / "generate");
      row.eval = run_evaluate(cell_cfg, cell_dir / "generate", eval_ds, cell_dir / "evaluate");
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      result.all_ok = false;
    }
    result.rows.push_back(row);
  }

  // Table + charts.
  std::string table = "cell\tfd\tkl\tav_align\tstatus\n";
  std::vector<std::pair<std::string, double>> fd_bars, kl_bars, av_bars;
  for (const auto& row : result.rows) {
    if (row.ok) {
      table += row.cell + "\t" + fmt_double(row.eval.fd) + "\t" +
               fmt_double(row.eval.mean_kl) + "\t" + fmt_double(row.eval.mean_av_align) +
               "\tok\n";
      fd_bars.emplace_back(row.cell, row.eval.fd);
      kl_bars.emplace_back(row.cell, row.eval.mean_kl);
      av_bars.emplace_back(row.cell, row.eval.mean_av_align);
    } else {
      table += row.cell + "\tnan\tnan\tnan\tfailed: " + row.error + "\n";
    }
  }
  write_file_atomic(out_dir / "report", table);
  if (!fd_bars.empty()) {
    write_bar_chart(out_dir / "fd.svg", "Frechet distance (lower is better)", fd_bars);
    write_bar_chart(out_dir / "kl.svg", "KL (lower is better)", kl_bars);
    write_bar_chart(out_dir / "av_align.svg", "AV-Align (higher is better)", av_bars);
  }

  RunManifest m;
  m.command = "ablate";
  m.seed = cfg.seed;  // shared by every cell
  m.config_echo = cfg.config_echo;
  m.inputs.emplace_back("train_dataset", hash_file(train_ds / "manifest"));
  m.inputs.emplace_back("eval_dataset", hash_file(eval_ds / "manifest"));
  m.artifacts.emplace_back("report", hash_file(out_dir / "report"));
  for (const auto& row : result.rows) {
    const std::string prefix = "cell." + row.cell + ".";
    if (row.ok) {
      m.metrics.emplace_back(prefix + "fd", fmt_double(row.eval.fd));
      m.metrics.emplace_back(prefix + "kl", fmt_double(row.eval.mean_kl));
      m.metrics.emplace_back(prefix + "av_align", fmt_double(row.eval.mean_av_align));
    } else {
      m.metrics.emplace_back(prefix + "status", "failed");
    }
  }
  m.wall_clock_s = clock.seconds();
  result.manifest_hash = write_manifest(out_dir, m);
  return result;
}

}  // namespace vta
