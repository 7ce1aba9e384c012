#pragma once

#include <torch/torch.h>

#include <limits>

namespace fewgan {

// Mean over pixels and channels of the per-position standard deviation across a batch
// [n, C, H, W] (n >= 2). Expects images in [0, 1]. Population std unless `sample_std`.
double diversity(const torch::Tensor& batch, bool sample_std = false);

// 10 * log10(1 / MSE) for images in [0, 1]. Identical inputs give +infinity.
double psnr(const torch::Tensor& a, const torch::Tensor& b);
inline bool psnr_is_exact(double value) { return value == std::numeric_limits<double>::infinity(); }

// Mean SSIM for images in [-1, 1]; same kernel as ssim_loss.
double ssim_metric(const torch::Tensor& a, const torch::Tensor& b);

// [-1, 1] -> [0, 1].
inline torch::Tensor to_unit_range(const torch::Tensor& x) { return (x + 1.0) * 0.5; }

}  // namespace fewgan
