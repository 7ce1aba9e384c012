#include "fewgan/manipulate.hpp"

#include "fewgan/errors.hpp"
#include "fewgan/image_io.hpp"
#include "tensor_checks.hpp"

namespace fewgan {
namespace {

torch::Tensor as_batch(const torch::Tensor& image) {
  auto x = image.dim() == 3 ? image.unsqueeze(0) : image;
  detail::require_image(x, "input image");
  if (x.size(0) != 1) throw InvalidArgument("expected a single input image");
  return x.to(torch::kFloat);
}

torch::Tensor at_scale0(const PyramidModel& model, const torch::Tensor& image) {
  auto x = as_batch(image);
  const auto& s = model->spec(0);
  if (x.size(2) != s.height || x.size(3) != s.width) x = resize(x, s.height, s.width);
  return x;
}

void require_prior(const PyramidModel& model, const AutoregressivePrior& prior) {
  if (!prior) throw InvalidState("no autoregressive prior available");
  if (prior->options.K != model->codebook->K) {
    throw InvalidState("prior vocabulary does not match the codebook size");
  }
}

}  // namespace

void ManipulationRequest::validate() const {
  if (mode != Mode::Unconditional && !image) throw InvalidArgument("this mode requires an input image");
  if (mode == Mode::Inpaint && !mask) throw InvalidArgument("inpainting requires a mask");
}

torch::Tensor generate_unconditional(const PyramidModel& model, const AutoregressivePrior& prior,
                                     const SampleOptions& opts) {
  require_prior(model, prior);
  auto grid = sample_grid(prior, model->latent_height(), model->latent_width(), opts);
  torch::NoGradGuard no_grad;
  return model->full_forward_indices(grid.unsqueeze(0)).clamp(-1.0, 1.0);
}

torch::Tensor render_conditional(const PyramidModel& model, const torch::Tensor& image) {
  torch::NoGradGuard no_grad;
  return model->full_forward(at_scale0(model, image)).clamp(-1.0, 1.0);
}

torch::Tensor token_mask_from_pixels(const torch::Tensor& pixel_mask, int64_t h, int64_t w) {
  detail::require_rank(pixel_mask, 2, "pixel mask");
  const int64_t H = pixel_mask.size(0), W = pixel_mask.size(1);
  if (H < h || W < w) throw InvalidArgument("pixel mask is smaller than the token grid");
  auto occluded = torch::zeros({h, w}, torch::kBool);
  auto m = pixel_mask.to(torch::kBool).contiguous();
  const auto* p = m.data_ptr<bool>();
  auto acc = occluded.accessor<bool, 2>();
  for (int64_t y = 0; y < H; ++y) {
    const int64_t r = std::min(y * h / H, h - 1);
    for (int64_t x = 0; x < W; ++x) {
      if (p[y * W + x]) acc[r][std::min(x * w / W, w - 1)] = true;
    }
  }
  return occluded.logical_not();
}

InpaintResult inpaint(const PyramidModel& model, const AutoregressivePrior& prior, const torch::Tensor& image,
                      const torch::Tensor& pixel_mask, const SampleOptions& opts) {
  require_prior(model, prior);
  auto x = as_batch(image);
  detail::require_rank(pixel_mask, 2, "pixel mask");
  if (pixel_mask.size(0) != x.size(2) || pixel_mask.size(1) != x.size(3)) {
    throw InvalidArgument("inpaint: mask " + detail::shape_str(pixel_mask) + " does not match image " +
                          detail::shape_str(x));
  }
  x = at_scale0(model, x);

  InpaintResult result;
  {
    torch::NoGradGuard no_grad;
    result.encoded = model->scale0_forward(x).indices.squeeze(0);
  }
  result.observed = token_mask_from_pixels(pixel_mask, result.encoded.size(0), result.encoded.size(1));
  result.filled = conditional_fill(prior, result.encoded, result.observed, opts);
  torch::NoGradGuard no_grad;
  result.image = model->full_forward_indices(result.filled.unsqueeze(0)).clamp(-1.0, 1.0);
  return result;
}

torch::Tensor run_request(const PyramidModel& model, const AutoregressivePrior& prior,
                          const ManipulationRequest& request) {
  request.validate();
  switch (request.mode) {
    case Mode::Unconditional:
      return generate_unconditional(model, prior, request.sampling);
    case Mode::Conditional:
    case Mode::Edit:
    case Mode::Harmonize:
      return render_conditional(model, *request.image);
    case Mode::Inpaint:
      return inpaint(model, prior, *request.image, *request.mask, request.sampling).image;
  }
  throw InvalidArgument("unknown manipulation mode");
}

}  // namespace fewgan
