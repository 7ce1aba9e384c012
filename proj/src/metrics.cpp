#include "fewgan/metrics.hpp"

#include <cmath>

#include "fewgan/errors.hpp"
#include "fewgan/losses.hpp"
#include "tensor_checks.hpp"

namespace fewgan {

double diversity(const torch::Tensor& batch, bool sample_std) {
  detail::require_rank(batch, 4, "diversity");
  if (batch.size(0) < 2) throw InvalidArgument("diversity: need at least two images");
  auto x = batch.detach().to(torch::kDouble);
  auto mean = x.mean(0, /*keepdim=*/true);
  auto sq = (x - mean).square().sum(0);
  const double denom = static_cast<double>(batch.size(0) - (sample_std ? 1 : 0));
  return (sq / denom).sqrt().mean().item<double>();
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  detail::require_same_shape(a, b, "psnr");
  const double mse = (a.detach().to(torch::kDouble) - b.detach().to(torch::kDouble)).square().mean().item<double>();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim_metric(const torch::Tensor& a, const torch::Tensor& b) {
  torch::NoGradGuard no_grad;
  return ssim_index(a, b).item<double>();
}

}  // namespace fewgan
