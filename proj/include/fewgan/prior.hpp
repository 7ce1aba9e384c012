#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "fewgan/generators.hpp"

namespace fewgan {

struct PriorOptions {
  int64_t K = 128;
  int64_t embed = 32;
  int64_t channels = 64;
  int64_t layers = 7;
  // false builds the same network with every mask set to one. Only useful as a
  // negative control for causality checks.
  bool causal = true;
};

// Convolution whose kernel is multiplied by a fixed 0/1 mask on every forward.
struct MaskedConv2dImpl : torch::nn::Module {
  MaskedConv2dImpl(int64_t in, int64_t out, int64_t kh, int64_t kw, torch::Tensor mask);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::Tensor mask;
};
TORCH_MODULE(MaskedConv2d);

// PixelCNN-style prior over index grids in raster order (row-major, top-left first).
// A vertical stack sees only rows above the current one; a horizontal stack sees the
// current row to the left and receives the vertical features. Together they cover the
// whole raster prefix with no blind spot. The output layer starts at zero so an
// untrained prior predicts the uniform distribution.
struct AutoregressivePriorImpl : torch::nn::Module {
  explicit AutoregressivePriorImpl(PriorOptions options);

  // [B, h, w] int64 -> logits [B, K, h, w].
  torch::Tensor forward(const torch::Tensor& grid);

  PriorOptions options;
  torch::nn::Embedding embedding{nullptr};
  std::vector<MaskedConv2d> vertical;
  std::vector<MaskedConv2d> horizontal;
  std::vector<torch::nn::Conv2d> v_to_h;
  torch::nn::Conv2d head{nullptr}, out{nullptr};
};
TORCH_MODULE(AutoregressivePrior);

struct SampleOptions {
  double temperature = 1.0;
  // Greedy decoding: the limit temperature -> 0.
  bool argmax = false;
  uint64_t seed = 0;
};

// Z(E(s)) for each side image: [S, 3, H_0, W_0] -> [S, h, w].
torch::Tensor encode_side_dataset(const PyramidModel& model, const torch::Tensor& side_images);

// Mean negative log-likelihood in nats per token.
double prior_nll(const AutoregressivePrior& prior, const torch::Tensor& grids);

struct PriorTrainResult {
  double initial_nll = 0.0;
  double final_nll = 0.0;
  std::vector<double> history;  // NLL per epoch
};

// Full-batch Adam on the mean token NLL.
PriorTrainResult train_prior(AutoregressivePrior& prior, const torch::Tensor& grids, int64_t epochs,
                             double lr = 1e-3);

// Ancestral sampling of an h x w grid.
torch::Tensor sample_grid(const AutoregressivePrior& prior, int64_t h, int64_t w, const SampleOptions& opts);

// Observed (mask true) tokens are copied; the rest are drawn in raster order, each
// conditioned on every fixed or already drawn token. grid and mask are [h, w].
torch::Tensor conditional_fill(const AutoregressivePrior& prior, const torch::Tensor& grid,
                               const torch::Tensor& observed, const SampleOptions& opts);

// True iff changing tokens after `position` (raster order) leaves the logits at
// `position` unchanged within `tol`. Perturbs every later token to each of `trials`
// random alternatives.
bool causality_check(const AutoregressivePrior& prior, const torch::Tensor& grid, int64_t position,
                     int trials = 3, double tol = 1e-6, uint64_t seed = 0);

}  // namespace fewgan
