#pragma once

#include <torch/torch.h>

#include <functional>
#include <vector>

#include "fewgan/config.hpp"

namespace fewgan {

// Anything mapping an image batch to a score map [B, 1, H', W'] (or [B, ...]).
// E[D(x)] is the mean over every element of the map and the batch.
using Critic = std::function<torch::Tensor(const torch::Tensor&)>;

struct CriticLoss {
  torch::Tensor total;        // -E[D(real)] + E[D(fake)] + lambda_gp * penalty
  torch::Tensor wasserstein;  // E[D(real)] - E[D(fake)]
  torch::Tensor penalty;      // E[(||grad D(x_bar)|| - 1)^2], unweighted
};

// x_bar = eps * real + (1 - eps) * fake with one eps per batch element ([B]).
torch::Tensor interpolate_samples(const torch::Tensor& real, const torch::Tensor& fake,
                                  const torch::Tensor& eps);

// Gradient of each sample's summed score map with respect to its interpolate; the graph is
// kept so the penalty can be differentiated with respect to the critic parameters.
torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, const torch::Tensor& eps);

// WGAN-GP critic objective (minimized by the critic). `fake` is detached. When `eps`
// is undefined one value per sample is drawn uniformly from [0, 1).
CriticLoss adv_critic_loss(const Critic& critic, const torch::Tensor& real, const torch::Tensor& fake,
                           double lambda_gp, torch::Tensor eps = {});

// -E[D(fake)]. The critic must be frozen by the caller (see FreezeGuard).
torch::Tensor adv_generator_loss(const Critic& critic, const torch::Tensor& fake);

// -E[D(s_hat)] for generated side images; generator-only, same formula as above.
torch::Tensor adv_ref_loss(const Critic& critic, const torch::Tensor& s_hat);

// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2, after
// remapping [-1, 1] inputs to [0, 1]. Borders use replicate padding.
torch::Tensor ssim_index(const torch::Tensor& a, const torch::Tensor& b);
torch::Tensor ssim_loss(const torch::Tensor& a, const torch::Tensor& b);

// Sum over (i, j) in [0, w-2] x [0, h-2] of |m[i+1,j] - m[i,j]|_1 + |m[i,j+1] - m[i,j]|_1,
// summed over channels and batch. m is [B, C, h, w] with h, w >= 2.
torch::Tensor continuity_loss(const torch::Tensor& m);

// Number of absolute differences the continuity sum adds up for a grid of this shape.
int64_t continuity_terms(const torch::Tensor& m);

torch::Tensor reconstruction_loss(const torch::Tensor& x, const torch::Tensor& x_hat);

struct ScaleTTerms {
  torch::Tensor adv;
  torch::Tensor adv_ref;
  torch::Tensor ssim;
  torch::Tensor rec;
};

struct Scale0Terms {
  torch::Tensor adv;
  torch::Tensor vq;
  torch::Tensor adv_ref;
  torch::Tensor ssim;
  torch::Tensor continuity;
};

// Weighted sums; undefined terms count as zero.
torch::Tensor scale_t_loss(const ScaleTTerms& terms, const LossWeights& w);
torch::Tensor scale_0_loss(const Scale0Terms& terms, const LossWeights& w);

// Disables gradient tracking on a set of parameters for the guard's lifetime.
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<torch::Tensor> params);
  ~FreezeGuard();
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<torch::Tensor> params_;
  std::vector<bool> previous_;
};

}  // namespace fewgan
