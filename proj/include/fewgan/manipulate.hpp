#pragma once

#include <torch/torch.h>

#include <optional>

#include "fewgan/generators.hpp"
#include "fewgan/prior.hpp"

namespace fewgan {

enum class Mode { Unconditional, Conditional, Edit, Harmonize, Inpaint };

struct ManipulationRequest {
  Mode mode = Mode::Unconditional;
  std::optional<torch::Tensor> image;  // [3, H, W] or [1, 3, H, W]
  std::optional<torch::Tensor> mask;   // [H, W] bool, true = occluded (inpaint only)
  SampleOptions sampling;

  // Throws InvalidArgument when the mode's required inputs are missing.
  void validate() const;
};

// Prior sample -> decode -> residual chain; output [1, 3, H_T, W_T] clamped to [-1, 1].
torch::Tensor generate_unconditional(const PyramidModel& model, const AutoregressivePrior& prior,
                                     const SampleOptions& opts);

// full_forward on the input, resized to scale 0 first if needed. Serves conditional
// generation, editing and harmonization alike.
torch::Tensor render_conditional(const PyramidModel& model, const torch::Tensor& image);

// A token is unobserved iff any pixel it covers is occluded. Returns [h, w] bool with
// true = observed.
torch::Tensor token_mask_from_pixels(const torch::Tensor& pixel_mask, int64_t h, int64_t w);

struct InpaintResult {
  torch::Tensor image;        // [1, 3, H_T, W_T]
  torch::Tensor encoded;      // plain encoding of the input, [h, w]
  torch::Tensor filled;       // grid after conditional fill, [h, w]
  torch::Tensor observed;     // token mask, [h, w] bool
};

// Encode and quantize, drop occluded tokens, refill them with the prior, then decode
// and refine. Masked pixel content is discarded.
InpaintResult inpaint(const PyramidModel& model, const AutoregressivePrior& prior, const torch::Tensor& image,
                      const torch::Tensor& pixel_mask, const SampleOptions& opts);

torch::Tensor run_request(const PyramidModel& model, const AutoregressivePrior& prior,
                          const ManipulationRequest& request);

}  // namespace fewgan
