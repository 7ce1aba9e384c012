#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fewgan/config.hpp"
#include "fewgan/generators.hpp"
#include "fewgan/image_io.hpp"

namespace fewgan {

// Training and side images, each rendered at every scale of the same schedule.
struct TrainData {
  ImagePyramid train;  // levels[t] is [N, 3, H_t, W_t]
  ImagePyramid side;   // levels[t] is [S, 3, H_t, W_t]

  int64_t num_train() const { return train.levels.front().size(0); }
  int64_t num_side() const { return side.levels.front().size(0); }
};

// Resizes everything to the configured working size (or the first training image's
// size), then builds both pyramids. Needs N >= 2 training images and >= 1 side image.
TrainData prepare_data(const TrainConfig& cfg, const std::vector<torch::Tensor>& train_images,
                       const std::vector<torch::Tensor>& side_images);

// Seeds the global generator from cfg.seed, then constructs a model sized for `data`.
PyramidModel build_model(const TrainConfig& cfg, const TrainData& data);

// One batch shown to a critic during training.
struct CriticFeed {
  enum class Role { Real, Fake };
  enum class Source { Training, Side };
  int scale = 0;
  Role role = Role::Real;
  Source source = Source::Training;
  int64_t count = 0;
};

struct StepRecord {
  int scale = 0;
  int64_t step = 0;
  double lr_g = 0.0;
  double critic_loss = 0.0;
  double wasserstein = 0.0;
  double penalty = 0.0;
  double gen_loss = 0.0;
  double adv = 0.0;
  double adv_ref = 0.0;
  double ssim = 0.0;
  double rec = 0.0;
  double vq = 0.0;
  double cont = 0.0;
};

struct TrainHooks {
  std::function<void(const CriticFeed&)> on_critic_input;
  std::function<void(const StepRecord&)> on_step;
  // Called after scale t finishes and is marked trained.
  std::function<void(const PyramidModel&, int)> on_scale_done;
};

// Scale 0: encoder, decoder, codebook and D_0. The critic sees only training images
// as real; side images drive the generator through the SSIM and adv-ref terms.
std::vector<StepRecord> train_scale0(const TrainConfig& cfg, PyramidModel& model, const TrainData& data,
                                     const TrainHooks& hooks = {});

// Scale t >= 1: only G_t and D_t change; scales below t run frozen.
std::vector<StepRecord> train_scale_t(const TrainConfig& cfg, int t, PyramidModel& model,
                                      const TrainData& data, const TrainHooks& hooks = {});

// Trains every scale not yet marked trained, in order. Passing a partially trained
// model resumes from its first untrained scale; each scale reseeds from cfg.seed and t,
// so a resumed run reproduces an uninterrupted one.
PyramidModel train_all(const TrainConfig& cfg, const TrainData& data, const TrainHooks& hooks = {},
                       PyramidModel resume = nullptr);

// Tab-separated run log columns, in StepRecord order.
std::string run_log_header();
std::string run_log_line(const StepRecord& r);

}  // namespace fewgan
