#include "fewgan/losses.hpp"

#include <cmath>

#include "fewgan/errors.hpp"
#include "tensor_checks.hpp"

namespace fewgan {
namespace F = torch::nn::functional;
namespace {

constexpr int64_t kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

torch::Tensor gaussian_window(int64_t channels, torch::TensorOptions options) {
  auto g = torch::empty({kSsimWindow}, options.dtype(torch::kDouble));
  auto acc = g.accessor<double, 1>();
  const double center = (kSsimWindow - 1) / 2.0;
  for (int64_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - center;
    acc[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
  }
  g = (g / g.sum()).to(options.dtype());
  auto w2 = g.unsqueeze(1).mm(g.unsqueeze(0));
  return w2.expand({channels, 1, kSsimWindow, kSsimWindow}).contiguous();
}

torch::Tensor local_mean(const torch::Tensor& x, const torch::Tensor& window) {
  const int64_t pad = kSsimWindow / 2;
  auto padded = F::pad(x, F::PadFuncOptions({pad, pad, pad, pad}).mode(torch::kReplicate));
  return F::conv2d(padded, window, F::Conv2dFuncOptions().groups(x.size(1)));
}

torch::Tensor term_or_zero(const torch::Tensor& t, const torch::TensorOptions& options) {
  return t.defined() ? t : torch::zeros({}, options);
}

torch::TensorOptions first_options(std::initializer_list<const torch::Tensor*> ts) {
  for (const auto* t : ts) {
    if (t->defined()) return t->options();
  }
  return torch::TensorOptions(torch::kFloat);
}

}  // namespace

torch::Tensor interpolate_samples(const torch::Tensor& real, const torch::Tensor& fake,
                                  const torch::Tensor& eps) {
  detail::require_same_shape(real, fake, "interpolate_samples");
  if (eps.dim() != 1 || eps.size(0) != real.size(0)) {
    throw InvalidArgument("interpolate_samples: eps must hold one value per sample");
  }
  std::vector<int64_t> shape(static_cast<size_t>(real.dim()), 1);
  shape[0] = real.size(0);
  auto e = eps.to(real.options()).view(shape);
  return e * real + (1.0 - e) * fake;
}

torch::Tensor gradient_penalty(const Critic& critic, const torch::Tensor& real,
                               const torch::Tensor& fake, const torch::Tensor& eps) {
  auto x_bar = interpolate_samples(real.detach(), fake.detach(), eps).requires_grad_(true);
  auto scores = critic(x_bar);
  const auto B = x_bar.size(0);

  torch::Tensor grad;
  if (scores.requires_grad()) {
    // Each sample's gradient is that of its summed score map; samples don't interact.
    auto grads = torch::autograd::grad({scores.sum()}, {x_bar}, {}, /*retain_graph=*/true,
                                       /*create_graph=*/true, /*allow_unused=*/true);
    grad = grads[0];
  }
  if (!grad.defined()) grad = torch::zeros_like(x_bar);
  auto norm = grad.reshape({B, -1}).norm(2, 1);
  return (norm - 1.0).square().mean();
}

CriticLoss adv_critic_loss(const Critic& critic, const torch::Tensor& real, const torch::Tensor& fake,
                           double lambda_gp, torch::Tensor eps) {
  detail::require_same_shape(real, fake, "adv_critic_loss");
  if (lambda_gp < 0.0) throw InvalidArgument("adv_critic_loss: lambda_gp must be non-negative");
  if (!eps.defined()) eps = torch::rand({real.size(0)}, real.options().requires_grad(false));

  auto fake_c = fake.detach();
  CriticLoss out;
  out.wasserstein = critic(real).mean() - critic(fake_c).mean();
  out.penalty = gradient_penalty(critic, real, fake_c, eps);
  out.total = -out.wasserstein + lambda_gp * out.penalty;
  return out;
}

torch::Tensor adv_generator_loss(const Critic& critic, const torch::Tensor& fake) {
  return -critic(fake).mean();
}

torch::Tensor adv_ref_loss(const Critic& critic, const torch::Tensor& s_hat) {
  return adv_generator_loss(critic, s_hat);
}

torch::Tensor ssim_index(const torch::Tensor& a, const torch::Tensor& b) {
  detail::require_same_shape(a, b, "ssim");
  detail::require_rank(a, 4, "ssim");
  auto x = (a + 1.0) * 0.5;
  auto y = (b + 1.0) * 0.5;
  auto window = gaussian_window(x.size(1), x.options().requires_grad(false));

  auto mu_x = local_mean(x, window);
  auto mu_y = local_mean(y, window);
  auto mu_xx = mu_x * mu_x;
  auto mu_yy = mu_y * mu_y;
  auto mu_xy = mu_x * mu_y;
  auto var_x = local_mean(x * x, window) - mu_xx;
  auto var_y = local_mean(y * y, window) - mu_yy;
  auto cov = local_mean(x * y, window) - mu_xy;

  auto map = ((2.0 * mu_xy + kSsimC1) * (2.0 * cov + kSsimC2)) /
             ((mu_xx + mu_yy + kSsimC1) * (var_x + var_y + kSsimC2));
  return map.mean();
}

torch::Tensor ssim_loss(const torch::Tensor& a, const torch::Tensor& b) {
  return 1.0 - ssim_index(a, b);
}

torch::Tensor continuity_loss(const torch::Tensor& m) {
  detail::require_rank(m, 4, "continuity_loss");
  const auto h = m.size(2), w = m.size(3);
  if (h < 2 || w < 2) throw InvalidArgument("continuity_loss: grid must be at least 2x2");
  using torch::indexing::Slice;
  auto anchor = m.index({Slice(), Slice(), Slice(0, h - 1), Slice(0, w - 1)});
  auto right = m.index({Slice(), Slice(), Slice(0, h - 1), Slice(1, w)});
  auto below = m.index({Slice(), Slice(), Slice(1, h), Slice(0, w - 1)});
  return (right - anchor).abs().sum() + (below - anchor).abs().sum();
}

int64_t continuity_terms(const torch::Tensor& m) {
  return 2 * m.size(0) * m.size(1) * (m.size(2) - 1) * (m.size(3) - 1);
}

torch::Tensor reconstruction_loss(const torch::Tensor& x, const torch::Tensor& x_hat) {
  detail::require_same_shape(x, x_hat, "reconstruction_loss");
  return (x - x_hat).square().mean();
}

torch::Tensor scale_t_loss(const ScaleTTerms& terms, const LossWeights& w) {
  const auto opts = first_options({&terms.adv, &terms.adv_ref, &terms.ssim, &terms.rec});
  return w.adv * term_or_zero(terms.adv, opts) + w.adv_ref * term_or_zero(terms.adv_ref, opts) +
         w.ssim * term_or_zero(terms.ssim, opts) + w.rec * term_or_zero(terms.rec, opts);
}

torch::Tensor scale_0_loss(const Scale0Terms& terms, const LossWeights& w) {
  const auto opts =
      first_options({&terms.adv, &terms.vq, &terms.adv_ref, &terms.ssim, &terms.continuity});
  return w.adv * term_or_zero(terms.adv, opts) + w.vq * term_or_zero(terms.vq, opts) +
         w.adv_ref * term_or_zero(terms.adv_ref, opts) + w.ssim * term_or_zero(terms.ssim, opts) +
         w.cont * term_or_zero(terms.continuity, opts);
}

FreezeGuard::FreezeGuard(std::vector<torch::Tensor> params) : params_(std::move(params)) {
  previous_.reserve(params_.size());
  for (auto& p : params_) {
    previous_.push_back(p.requires_grad());
    p.requires_grad_(false);
  }
}

FreezeGuard::~FreezeGuard() {
  for (size_t i = 0; i < params_.size(); ++i) params_[i].requires_grad_(previous_[i]);
}

}  // namespace fewgan
