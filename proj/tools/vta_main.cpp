// Batch front door for the video-to-audio lab: dataset synthesis, VAE/LDM
// training, generation, evaluation and the ablation driver.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vta/config.hpp"
#include "vta/pipeline.hpp"

namespace {

struct CommonArgs {
  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_files, "Config file(s), later files override");
  cmd->add_option("--set", args.overrides, "Inline override key=value (repeatable)");
  cmd->add_option("--out", args.out_dir, "Output run directory")->required();
}

vta::ExperimentConfig load_config(const CommonArgs& args) {
  vta::ConfigMap map;
  for (const auto& f : args.config_files) {
    vta::ConfigMap file_map = vta::ConfigMap::from_file(f);
    // later files override earlier ones
    std::istringstream echo(file_map.echo());
    std::string line;
    while (std::getline(echo, line)) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) map.set(line.substr(0, eq), line.substr(eq + 3));
    }
  }
  for (const auto& kv : args.overrides) map.set_kv(kv);
  return vta::experiment_config_from_map(map);
}

bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  return *reinterpret_cast<const unsigned char*>(&probe) == 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (!host_is_little_endian()) {
    std::cerr << "vta: little-endian host required by the binary formats\n";
    return 2;
  }

  CLI::App app{"vta: desk-scale video-to-audio generation lab"};
  app.require_subcommand(1);

  CommonArgs synth_args;
  int synth_n = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic paired dataset");
  add_common(synth, synth_args);
  synth->add_option("--n", synth_n, "Number of scenes")->required();

  CommonArgs train_args;
  std::string train_dataset, train_component = "ldm", train_vae_ckpt;
  auto* train = app.add_subcommand("train", "Train the denoiser (or the VAE)");
  add_common(train, train_args);
  train->add_option("--dataset", train_dataset, "Training dataset directory")->required();
  train->add_option("--component", train_component, "ldm (default) or vae");
  train->add_option("--vae", train_vae_ckpt, "Trained VAE checkpoint (vae.mode=trained)");

  CommonArgs gen_args;
  std::string gen_ckpt, gen_dataset, gen_vae_ckpt;
  bool gen_unconditional = false;
  auto* generate = app.add_subcommand("generate", "Sample audio for a dataset's scenes");
  add_common(generate, gen_args);
  generate->add_option("--checkpoint", gen_ckpt, "Denoiser checkpoint")->required();
  generate->add_option("--dataset", gen_dataset, "Scenes to condition on")->required();
  generate->add_option("--vae", gen_vae_ckpt, "Trained VAE checkpoint (vae.mode=trained)");
  generate->add_flag("--unconditional", gen_unconditional,
                     "Ignore the modality set and sample with null conditioners");

  CommonArgs eval_args;
  std::string eval_generated, eval_reference;
  auto* evaluate = app.add_subcommand("evaluate", "Score generated audio against a reference");
  add_common(evaluate, eval_args);
  evaluate->add_option("--generated", eval_generated, "Generated run directory")->required();
  evaluate->add_option("--reference", eval_reference, "Reference dataset directory")
      ->required();

  CommonArgs abl_args;
  std::string abl_train_ds, abl_eval_ds, abl_cells;
  auto* ablate = app.add_subcommand("ablate", "Train/evaluate a grid of conditioning cells");
  add_common(ablate, abl_args);
  ablate->add_option("--train-dataset", abl_train_ds, "Training dataset")->required();
  ablate->add_option("--eval-dataset", abl_eval_ds, "Held-out dataset")->required();
  ablate->add_option("--cells", abl_cells,
                     "Comma-separated cells (t_only,v_only,v_t,v_o,v_o_t or "
                     "z_at_v,z_at_vo_concat,z_at_o_add_v,z_at_v_add_o)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto cfg = load_config(synth_args);
      const std::string hash = vta::run_synth(cfg, synth_args.out_dir, synth_n);
      std::cout << "synth ok: " << synth_n << " scenes, manifest_hash=" << hash << "\n";
    } else if (train->parsed()) {
      const auto cfg = load_config(train_args);
      const auto result = vta::run_train(cfg, train_dataset, train_args.out_dir,
                                         train_component, train_vae_ckpt);
      std::cout << "train ok: checkpoint=" << result.checkpoint.string()
                << " manifest_hash=" << result.manifest_hash << "\n";
    } else if (generate->parsed()) {
      const auto cfg = load_config(gen_args);
      const std::string hash = vta::run_generate(cfg, gen_ckpt, gen_dataset,
                                                 gen_args.out_dir, gen_unconditional,
                                                 gen_vae_ckpt);
      std::cout << "generate ok: manifest_hash=" << hash << "\n";
    } else if (evaluate->parsed()) {
      const auto cfg = load_config(eval_args);
      const auto summary =
          vta::run_evaluate(cfg, eval_generated, eval_reference, eval_args.out_dir);
      std::cout << "evaluate ok: fd=" << summary.fd << " mean_kl=" << summary.mean_kl
                << " mean_av_align=" << summary.mean_av_align
                << " manifest_hash=" << summary.manifest_hash << "\n";
    } else if (ablate->parsed()) {
      const auto cfg = load_config(abl_args);
      const auto result =
          vta::run_ablate(cfg, abl_train_ds, abl_eval_ds, abl_args.out_dir, abl_cells);
      for (const auto& row : result.rows) {
        if (row.ok)
          std::cout << row.cell << ": fd=" << row.eval.fd << " kl=" << row.eval.mean_kl
                    << " av_align=" << row.eval.mean_av_align << "\n";
        else
          std::cout << row.cell << ": FAILED (" << row.error << ")\n";
      }
      std::cout << "ablate manifest_hash=" << result.manifest_hash << "\n";
      if (!result.all_ok) return 4;
    }
  } catch (const vta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vta::ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 2;
  } catch (const vta::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const vta::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
