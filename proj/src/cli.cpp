#include "fewgan/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>

#include "fewgan/checkpoint.hpp"
#include "fewgan/errors.hpp"
#include "fewgan/image_io.hpp"
#include "fewgan/manipulate.hpp"
#include "fewgan/metrics.hpp"
#include "fewgan/prior.hpp"
#include "fewgan/trainer.hpp"

namespace fewgan {
namespace fs = std::filesystem;
namespace {

struct TrainArgs {
  std::string config;
  std::string train_dir;
  std::string side_dir;
  std::string out;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::optional<int64_t> steps;
  std::optional<int64_t> prior_epochs;
  bool resume = false;
  bool quiet = false;
};

struct SampleArgs {
  std::string ckpt;
  std::string out;
  uint64_t seed = 0;
  double temperature = 1.0;
  bool argmax = false;
  int count = 1;
};

struct RenderArgs {
  std::string ckpt;
  std::string input;
  std::string out;
};

struct InpaintArgs {
  std::string ckpt;
  std::string input;
  std::string mask;
  std::string out;
  uint64_t seed = 0;
  double temperature = 1.0;
};

struct DiversityArgs {
  std::string dir;
  std::string ckpt;
  int count = 200;
  uint64_t seed = 0;
  double temperature = 1.0;
  bool sample_std = false;
};

struct ReconstructArgs {
  std::string ckpt;
  std::string input;
  std::string out;
};

fs::path numbered(const fs::path& base, int i, int count) {
  if (count == 1) return base;
  auto p = base;
  p.replace_filename(base.stem().string() + "_" + std::to_string(i) + base.extension().string());
  return p;
}

void apply_threads(const TrainConfig& cfg) {
  if (cfg.threads > 0) torch::set_num_threads(cfg.threads);
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : TrainConfig::from_file(a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.steps) cfg.steps_per_scale = *a.steps;
  if (a.prior_epochs) cfg.prior_epochs = *a.prior_epochs;
  if (!a.side_dir.empty()) cfg.side_dataset_path = a.side_dir;
  if (cfg.side_dataset_path.empty()) throw InvalidArgument("no side dataset: pass --side-dir or set side_dataset_path");
  cfg.validate();
  apply_threads(cfg);

  auto train_images = load_image_dir(a.train_dir);
  auto side_images = load_image_dir(cfg.side_dataset_path);
  const auto data = prepare_data(cfg, train_images, side_images);

  PyramidModel resume{nullptr};
  if (a.resume && fs::exists(a.out)) {
    auto ckpt = load_checkpoint(a.out);
    resume = ckpt.model;
    if (!a.quiet) out << "resuming from scale " << resume->trained_scales() << "\n";
  }

  TrainHooks hooks;
  hooks.on_scale_done = [&](const PyramidModel& model, int t) {
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.model = model;
    save_checkpoint(ckpt, a.out);
    if (!a.quiet) out << "scale " << t << " trained; checkpoint written to " << a.out << "\n";
  };
  auto model = train_all(cfg, data, hooks, resume);

  torch::manual_seed(cfg.seed + 0x5eedull);
  auto grids = encode_side_dataset(model, data.side.levels.front());
  AutoregressivePrior prior(prior_options(cfg));
  auto fit = train_prior(prior, grids, cfg.prior_epochs, cfg.prior_lr);

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.model = model;
  ckpt.prior = prior;
  ckpt.prior_codebook_tag = codebook_tag(*model->codebook);
  save_checkpoint(ckpt, a.out);
  if (!a.quiet) {
    out << "prior trained on " << grids.size(0) << " side grids: NLL " << std::setprecision(4)
        << fit.initial_nll << " -> " << fit.final_nll << " nats/token\n";
  }
  return 0;
}

Checkpoint load_for_inference(const std::string& path) {
  auto ckpt = load_checkpoint(path);
  apply_threads(ckpt.config);
  ckpt.model->eval();
  return ckpt;
}

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  auto ckpt = load_for_inference(a.ckpt);
  for (int i = 0; i < a.count; ++i) {
    SampleOptions opts{a.temperature, a.argmax, a.seed + static_cast<uint64_t>(i)};
    auto image = generate_unconditional(ckpt.model, ckpt.prior, opts);
    const auto path = numbered(a.out, i, a.count);
    save_image(path, image);
    out << path.string() << "\n";
  }
  return 0;
}

int cmd_render(const RenderArgs& a, std::ostream& out) {
  auto ckpt = load_for_inference(a.ckpt);
  save_image(a.out, render_conditional(ckpt.model, load_image(a.input)));
  out << a.out << "\n";
  return 0;
}

int cmd_inpaint(const InpaintArgs& a, std::ostream& out) {
  auto ckpt = load_for_inference(a.ckpt);
  auto image = load_image(a.input);
  auto mask = load_mask(a.mask);
  auto result = inpaint(ckpt.model, ckpt.prior, image, mask, SampleOptions{a.temperature, false, a.seed});
  save_image(a.out, result.image);
  const auto refilled = result.observed.logical_not().sum().item<int64_t>();
  out << a.out << " (" << refilled << " of " << result.observed.numel() << " tokens resampled)\n";
  return 0;
}

int cmd_eval_diversity(const DiversityArgs& a, std::ostream& out) {
  torch::Tensor batch;
  if (!a.dir.empty()) {
    auto images = load_image_dir(a.dir);
    if (images.size() < 2) throw InvalidArgument("eval-diversity: need at least two images in " + a.dir);
    for (const auto& img : images) {
      if (img.sizes() != images.front().sizes()) throw InvalidArgument("eval-diversity: images differ in size");
    }
    batch = torch::stack(images, 0);
  } else {
    auto ckpt = load_for_inference(a.ckpt);
    std::vector<torch::Tensor> samples;
    for (int i = 0; i < a.count; ++i) {
      samples.push_back(generate_unconditional(
          ckpt.model, ckpt.prior, SampleOptions{a.temperature, false, a.seed + static_cast<uint64_t>(i)}));
    }
    batch = torch::cat(samples, 0);
  }
  out << std::setprecision(6) << diversity(to_unit_range(batch), a.sample_std) << "\n";
  return 0;
}

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out) {
  auto ckpt = load_for_inference(a.ckpt);
  auto input = load_image(a.input).unsqueeze(0);
  auto rendered = render_conditional(ckpt.model, input);
  const auto& finest = ckpt.model->spec(ckpt.model->T());
  auto target = resize(input, finest.height, finest.width);
  const double p = psnr(to_unit_range(rendered), to_unit_range(target));
  out << "psnr " << (psnr_is_exact(p) ? std::string("exact") : std::to_string(p)) << " dB\n";
  out << "ssim " << ssim_metric(rendered, target) << "\n";
  if (!a.out.empty()) save_image(a.out, rendered);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-image generative pyramid: train, sample, render, inpaint, evaluate", "fewgan"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train every scale and the prior; writes a checkpoint");
  train_cmd->add_option("--config", train.config, "key=value config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--train-dir", train.train_dir, "directory of training images")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--side-dir", train.side_dir, "directory of side images")->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train.out, "checkpoint path")->required();
  train_cmd->add_option("--set", train.overrides, "override a config key (key=value), repeatable");
  train_cmd->add_option("--seed", train.seed, "random seed");
  train_cmd->add_option("--steps", train.steps, "training steps per scale");
  train_cmd->add_option("--prior-epochs", train.prior_epochs, "prior training epochs");
  train_cmd->add_flag("--resume", train.resume, "continue from the last completed scale in --out");
  train_cmd->add_flag("--quiet", train.quiet, "suppress progress output");

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "Generate unconditional samples");
  sample_cmd->add_option("--ckpt", sample.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--out", sample.out, "output PNG (numbered when --count > 1)")->required();
  sample_cmd->add_option("--seed", sample.seed, "sampling seed");
  sample_cmd->add_option("--temperature", sample.temperature, "softmax temperature")->check(CLI::PositiveNumber);
  sample_cmd->add_flag("--argmax", sample.argmax, "greedy decoding");
  sample_cmd->add_option("--count", sample.count, "number of samples")->check(CLI::PositiveNumber);

  RenderArgs render;
  auto* render_cmd = app.add_subcommand("render", "Re-render an image (conditional generation, editing, harmonization)");
  render_cmd->add_option("--ckpt", render.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--input", render.input, "input image")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", render.out, "output PNG")->required();

  InpaintArgs inp;
  auto* inpaint_cmd = app.add_subcommand("inpaint", "Fill the masked region of an image");
  inpaint_cmd->add_option("--ckpt", inp.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  inpaint_cmd->add_option("--input", inp.input, "input image")->required()->check(CLI::ExistingFile);
  inpaint_cmd->add_option("--mask", inp.mask, "mask image; white marks pixels to fill")->required()->check(CLI::ExistingFile);
  inpaint_cmd->add_option("--out", inp.out, "output PNG")->required();
  inpaint_cmd->add_option("--seed", inp.seed, "sampling seed");
  inpaint_cmd->add_option("--temperature", inp.temperature, "softmax temperature")->check(CLI::PositiveNumber);

  DiversityArgs div;
  auto* div_cmd = app.add_subcommand("eval-diversity", "Mean per-pixel standard deviation across images");
  auto* dir_opt = div_cmd->add_option("--dir", div.dir, "directory of equally sized images")->check(CLI::ExistingDirectory);
  auto* ckpt_opt = div_cmd->add_option("--ckpt", div.ckpt, "checkpoint to sample from")->check(CLI::ExistingFile);
  dir_opt->excludes(ckpt_opt);
  div_cmd->add_option("--count", div.count, "samples to draw from --ckpt")->check(CLI::Range(2, 100000));
  div_cmd->add_option("--seed", div.seed, "first sampling seed");
  div_cmd->add_option("--temperature", div.temperature, "softmax temperature")->check(CLI::PositiveNumber);
  div_cmd->add_flag("--sample-std", div.sample_std, "use the n-1 standard deviation");

  ReconstructArgs recon;
  auto* recon_cmd = app.add_subcommand("reconstruct", "Render an image and report PSNR/SSIM against it");
  recon_cmd->add_option("--ckpt", recon.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  recon_cmd->add_option("--input", recon.input, "input image")->required()->check(CLI::ExistingFile);
  recon_cmd->add_option("--out", recon.out, "optional output PNG");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (div_cmd->parsed() && div.dir.empty() && div.ckpt.empty()) {
      throw CLI::ValidationError("eval-diversity", "one of --dir or --ckpt is required");
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train, out);
    if (sample_cmd->parsed()) return cmd_sample(sample, out);
    if (render_cmd->parsed()) return cmd_render(render, out);
    if (inpaint_cmd->parsed()) return cmd_inpaint(inp, out);
    if (div_cmd->parsed()) return cmd_eval_diversity(div, out);
    if (recon_cmd->parsed()) return cmd_reconstruct(recon, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace fewgan
