#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "fewgan/quantizer.hpp"

namespace fewgan {

// Spatial downsampling factor of the scale-0 encoder.
inline constexpr int64_t kEncoderStride = 4;
// Conv layers in each residual generator and patch critic (3x3 kernels).
inline constexpr int64_t kPatchLayers = 5;
// Effective receptive field of kPatchLayers stacked 3x3 convolutions.
inline constexpr int64_t kReceptiveField = 2 * kPatchLayers + 1;

struct ScaleSpec {
  int t = 0;
  int64_t height = 0;
  int64_t width = 0;
  int64_t receptive_field = kReceptiveField;
  int64_t channels = 32;
};

struct ModelOptions {
  int64_t K = 128;
  int64_t n_z = 16;
  int64_t lambda_pos = 2;
  int64_t channels = 32;
  int64_t encoder_channels = 64;
};

// Bilinear, corner-aligned. Same-size targets return the input unchanged.
torch::Tensor upsample(const torch::Tensor& x, int64_t height, int64_t width);

// Latent grid extent produced by the encoder for an input extent.
int64_t latent_extent(int64_t pixels);

// Fully convolutional; [B, 3, H, W] -> [B, n_z, H/4, W/4] (floor at each stride).
struct EncoderImpl : torch::nn::Module {
  EncoderImpl(int64_t width, int64_t n_z);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Sequential net{nullptr};
};
TORCH_MODULE_IMPL(EncoderNet, EncoderImpl);

// [B, d_aug, h, w] -> [B, 3, H, W], tanh output. The target size is explicit because
// the encoder floors odd extents.
struct DecoderImpl : torch::nn::Module {
  DecoderImpl(int64_t d_aug, int64_t width);
  torch::Tensor forward(const torch::Tensor& z, int64_t height, int64_t width);

  torch::nn::Conv2d in{nullptr}, mid{nullptr}, up{nullptr}, out{nullptr};
};
TORCH_MODULE_IMPL(DecoderNet, DecoderImpl);

// Five 3x3 convs producing a residual image; the last layer starts at zero.
struct ResidualGeneratorImpl : torch::nn::Module {
  explicit ResidualGeneratorImpl(int64_t width);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Sequential body{nullptr};
  torch::nn::Conv2d out{nullptr};
};
TORCH_MODULE(ResidualGenerator);

// Five 3x3 convs producing a single-channel score map of the input's spatial size.
// No output squashing: it is a Wasserstein critic.
struct PatchCriticImpl : torch::nn::Module {
  explicit PatchCriticImpl(int64_t width);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Sequential body{nullptr};
  torch::nn::Conv2d out{nullptr};
};
TORCH_MODULE(PatchCritic);

struct Scale0Output {
  torch::Tensor image;    // x_hat_0 = Dec(Z(E(x0)))
  torch::Tensor content;  // raw encoder output, [B, n_z, h, w]
  torch::Tensor z_e;      // augmented encoder output, [B, d_aug, h, w]
  torch::Tensor z_q;      // selected codebook rows (gradient reaches the codebook)
  torch::Tensor indices;  // [B, h, w]
};

// Scale-0 encoder/decoder/codebook, residual generators for scales 1..T and
// critics for scales 0..T. Submodule names are stable and used by checkpoints.
struct PyramidModelImpl : torch::nn::Module {
  PyramidModelImpl(ModelOptions options, std::vector<ScaleSpec> specs);

  int T() const { return static_cast<int>(specs.size()) - 1; }
  const ScaleSpec& spec(int t) const;
  int64_t latent_height() const { return latent_extent(specs.front().height); }
  int64_t latent_width() const { return latent_extent(specs.front().width); }

  torch::Tensor encode(const torch::Tensor& x) const;
  torch::Tensor augmented(const torch::Tensor& content) const;
  Scale0Output scale0_forward(const torch::Tensor& x0) const;
  torch::Tensor decode(const torch::Tensor& z_q) const;
  torch::Tensor decode_from_indices(const torch::Tensor& indices) const;
  torch::Tensor residual_forward(const torch::Tensor& prev, int t) const;
  torch::Tensor discriminate(const torch::Tensor& x, int t) const;
  // Scale-0 image (conditioned or decoded) carried up through scales 1..up_to.
  torch::Tensor refine(const torch::Tensor& scale0_image, int up_to) const;
  torch::Tensor full_forward(const torch::Tensor& x0) const;
  torch::Tensor full_forward_indices(const torch::Tensor& indices) const;

  // Parameters trained at scale t: encoder, decoder, codebook and D_0 for t = 0,
  // G_t and D_t otherwise.
  std::vector<torch::Tensor> generator_parameters(int t) const;
  std::vector<torch::Tensor> critic_parameters(int t) const;
  std::vector<torch::Tensor> scale_parameters(int t) const;

  // Per-scale training status; scale t is marked once its training run finishes.
  bool is_trained(int t) const;
  void mark_trained(int t, bool done = true);
  int trained_scales() const;

  ModelOptions options;
  std::vector<ScaleSpec> specs;
  std::vector<bool> trained;
  EncoderNet encoder{nullptr};
  DecoderNet decoder{nullptr};
  Codebook codebook{nullptr};
  std::vector<ResidualGenerator> generators;  // generators[t - 1] is G_t
  std::vector<PatchCritic> critics;           // critics[t] is D_t
};
TORCH_MODULE(PyramidModel);

}  // namespace fewgan
