#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace fewgan {

// Per-term weights of the scale objectives. The defaults give an unweighted sum.
struct LossWeights {
  double adv = 1.0;
  double adv_ref = 1.0;
  double ssim = 1.0;
  double rec = 1.0;
  double vq = 1.0;
  double cont = 1.0;

  void validate() const;
};

// How the continuity term enters the scale-0 objective.
enum class ContinuityReduction { Sum, Mean };

// Every hyperparameter of a training run. Serialized as flat key=value text;
// each field has exactly one key (see config.cpp for the key table).
struct TrainConfig {
  // Pyramid schedule. T < 0 derives the finest index from min_size.
  int T = -1;
  double scale_factor = 0.75;
  int64_t min_size = 32;
  // Common working resolution; 0 adopts the first training image's size.
  int64_t image_height = 0;
  int64_t image_width = 0;

  // Scale-0 codebook.
  int64_t K = 128;
  int64_t n_z = 16;
  int64_t lambda_pos = 2;
  double beta = 0.25;

  // Network widths.
  int64_t channels = 32;
  int64_t encoder_channels = 64;

  double lambda_gp = 0.1;
  LossWeights weights;
  ContinuityReduction continuity_reduction = ContinuityReduction::Mean;
  // Feed side-derived fakes to the critic as additional fakes.
  bool side_as_fake = false;

  int64_t steps_per_scale = 2000;
  int64_t critic_steps = 3;
  double lr_g = 5e-4;
  double lr_d = 5e-4;
  // Codebook entries start near zero and must travel to the encoder's output scale; Adam
  // moves each entry by at most about lr per step, so they get their own rate.
  double lr_codebook = 2e-2;
  double lr_decay_at = 0.8;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;

  // Autoregressive prior.
  int64_t prior_embed = 32;
  int64_t prior_channels = 64;
  int64_t prior_layers = 7;
  int64_t prior_epochs = 300;
  double prior_lr = 1e-3;

  uint64_t seed = 0;
  int threads = 1;
  std::string side_dataset_path;
  std::string run_log;

  // Throws InvalidArgument when any field is out of range.
  void validate() const;

  // Applies one "key=value" assignment; unknown keys are an error.
  void set(std::string_view key, std::string_view value);

  std::string to_text() const;
  static TrainConfig from_text(std::string_view text);
  static TrainConfig from_file(const std::filesystem::path& path);
};

bool operator==(const LossWeights& a, const LossWeights& b);

}  // namespace fewgan
