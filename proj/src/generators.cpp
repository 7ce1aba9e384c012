#include "fewgan/generators.hpp"

#include <string>

#include "fewgan/errors.hpp"
#include "tensor_checks.hpp"

namespace fewgan {
namespace F = torch::nn::functional;
namespace {

constexpr double kSlope = 0.2;

torch::nn::Conv2d conv3(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::nn::Conv2d down4(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1));
}

torch::nn::LeakyReLU lrelu() {
  return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kSlope));
}

// The first kPatchLayers - 1 convolutions; callers append the output conv.
torch::nn::Sequential patch_body(int64_t width) {
  torch::nn::Sequential net;
  net->push_back(conv3(3, width));
  net->push_back(lrelu());
  for (int64_t i = 0; i < kPatchLayers - 2; ++i) {
    net->push_back(conv3(width, width));
    net->push_back(lrelu());
  }
  return net;
}

void require_scale(const PyramidModelImpl& m, int t, int lo) {
  if (t < lo || t > m.T()) {
    throw InvalidArgument("scale index " + std::to_string(t) + " outside [" + std::to_string(lo) +
                          ", " + std::to_string(m.T()) + "]");
  }
}

void require_resolution(const torch::Tensor& x, const ScaleSpec& s, const std::string& what) {
  detail::require_image(x, what);
  if (x.size(2) != s.height || x.size(3) != s.width) {
    throw InvalidArgument(what + ": expected " + std::to_string(s.height) + "x" +
                          std::to_string(s.width) + " input at scale " + std::to_string(s.t) +
                          ", got " + detail::shape_str(x));
  }
}

}  // namespace

torch::Tensor upsample(const torch::Tensor& x, int64_t height, int64_t width) {
  detail::require_rank(x, 4, "upsample");
  if (height < x.size(2) || width < x.size(3)) {
    throw InvalidArgument("upsample: target " + std::to_string(height) + "x" + std::to_string(width) +
                          " is smaller than source " + detail::shape_str(x));
  }
  if (height == x.size(2) && width == x.size(3)) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(true));
}

int64_t latent_extent(int64_t pixels) { return (pixels / 2) / 2; }

EncoderImpl::EncoderImpl(int64_t width, int64_t n_z) {
  net = torch::nn::Sequential(conv3(3, width), lrelu(), down4(width, width), lrelu(),
                              down4(width, width), lrelu(), conv3(width, n_z));
  register_module("net", net);
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& x) {
  detail::require_image(x, "encode");
  if (x.size(2) < kEncoderStride || x.size(3) < kEncoderStride) {
    throw InvalidArgument("encode: input smaller than the encoder stride: " + detail::shape_str(x));
  }
  return net->forward(x);
}

DecoderImpl::DecoderImpl(int64_t d_aug, int64_t width_) {
  in = register_module("in", conv3(d_aug, width_));
  mid = register_module("mid", conv3(width_, width_));
  up = register_module("up", conv3(width_, width_));
  out = register_module("out", conv3(width_, 3));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& z, int64_t height, int64_t width) {
  auto h = F::leaky_relu(in->forward(z), F::LeakyReLUFuncOptions().negative_slope(kSlope));
  h = upsample(h, std::max(height / 2, z.size(2)), std::max(width / 2, z.size(3)));
  h = F::leaky_relu(mid->forward(h), F::LeakyReLUFuncOptions().negative_slope(kSlope));
  h = upsample(h, height, width);
  h = F::leaky_relu(up->forward(h), F::LeakyReLUFuncOptions().negative_slope(kSlope));
  return torch::tanh(out->forward(h));
}

ResidualGeneratorImpl::ResidualGeneratorImpl(int64_t width) {
  body = register_module("body", patch_body(width));
  out = register_module("out", conv3(width, 3));
  torch::NoGradGuard no_grad;
  out->weight.zero_();
  out->bias.zero_();
}

torch::Tensor ResidualGeneratorImpl::forward(const torch::Tensor& x) {
  return out->forward(body->forward(x));
}

PatchCriticImpl::PatchCriticImpl(int64_t width) {
  body = register_module("body", patch_body(width));
  out = register_module("out", conv3(width, 1));
}

torch::Tensor PatchCriticImpl::forward(const torch::Tensor& x) {
  return out->forward(body->forward(x));
}

PyramidModelImpl::PyramidModelImpl(ModelOptions options_, std::vector<ScaleSpec> specs_)
    : options(options_), specs(std::move(specs_)) {
  if (specs.empty()) throw InvalidArgument("PyramidModel: at least one scale is required");
  for (size_t t = 0; t < specs.size(); ++t) {
    specs[t].t = static_cast<int>(t);
    specs[t].receptive_field = kReceptiveField;
    specs[t].channels = options.channels;
    if (t > 0 && (specs[t].height <= specs[t - 1].height || specs[t].width <= specs[t - 1].width)) {
      throw InvalidArgument("PyramidModel: scale resolutions must strictly increase");
    }
  }
  if (specs.front().height < kEncoderStride || specs.front().width < kEncoderStride) {
    throw InvalidArgument("PyramidModel: coarsest scale is smaller than the encoder stride");
  }

  trained.assign(specs.size(), false);
  encoder = register_module("encoder", EncoderNet(options.encoder_channels, options.n_z));
  codebook = register_module("codebook", Codebook(options.K, options.n_z, options.lambda_pos));
  decoder = register_module("decoder", DecoderNet(codebook->dim(), options.encoder_channels));
  for (int t = 1; t <= T(); ++t) {
    generators.push_back(register_module("g" + std::to_string(t), ResidualGenerator(options.channels)));
  }
  for (int t = 0; t <= T(); ++t) {
    critics.push_back(register_module("d" + std::to_string(t), PatchCritic(options.channels)));
  }
}

const ScaleSpec& PyramidModelImpl::spec(int t) const {
  require_scale(*this, t, 0);
  return specs[static_cast<size_t>(t)];
}

torch::Tensor PyramidModelImpl::encode(const torch::Tensor& x) const {
  require_resolution(x, specs.front(), "encode");
  return encoder.ptr()->forward(x);
}

torch::Tensor PyramidModelImpl::augmented(const torch::Tensor& content) const {
  auto pos = positional_encode(content.size(2), content.size(3), options.lambda_pos, content.options());
  return augment(content, pos);
}

Scale0Output PyramidModelImpl::scale0_forward(const torch::Tensor& x0) const {
  Scale0Output out;
  out.content = encode(x0);
  out.z_e = augmented(out.content);
  auto q = quantize(out.z_e, codebook->entries);
  out.indices = q.indices;
  out.z_q = q.quantized;
  out.image = decode(straight_through(out.z_e, out.z_q));
  return out;
}

torch::Tensor PyramidModelImpl::decode(const torch::Tensor& z_q) const {
  detail::require_rank(z_q, 4, "decode");
  if (z_q.size(1) != codebook->dim()) throw InvalidArgument("decode: latent dimension mismatch");
  return decoder.ptr()->forward(z_q, specs.front().height, specs.front().width);
}

torch::Tensor PyramidModelImpl::decode_from_indices(const torch::Tensor& indices) const {
  return decode(lookup(indices, codebook->entries));
}

torch::Tensor PyramidModelImpl::residual_forward(const torch::Tensor& prev, int t) const {
  require_scale(*this, t, 1);
  require_resolution(prev, specs[static_cast<size_t>(t - 1)], "residual_forward");
  const auto& s = specs[static_cast<size_t>(t)];
  auto base = upsample(prev, s.height, s.width);
  return base + generators[static_cast<size_t>(t - 1)].ptr()->forward(base);
}

torch::Tensor PyramidModelImpl::discriminate(const torch::Tensor& x, int t) const {
  require_scale(*this, t, 0);
  require_resolution(x, specs[static_cast<size_t>(t)], "discriminate");
  return critics[static_cast<size_t>(t)].ptr()->forward(x);
}

torch::Tensor PyramidModelImpl::refine(const torch::Tensor& scale0_image, int up_to) const {
  require_scale(*this, up_to, 0);
  auto x = scale0_image;
  for (int t = 1; t <= up_to; ++t) x = residual_forward(x, t);
  return x;
}

torch::Tensor PyramidModelImpl::full_forward(const torch::Tensor& x0) const {
  return refine(scale0_forward(x0).image, T());
}

torch::Tensor PyramidModelImpl::full_forward_indices(const torch::Tensor& indices) const {
  return refine(decode_from_indices(indices), T());
}

bool PyramidModelImpl::is_trained(int t) const {
  require_scale(*this, t, 0);
  return trained[static_cast<size_t>(t)];
}

void PyramidModelImpl::mark_trained(int t, bool done) {
  require_scale(*this, t, 0);
  trained[static_cast<size_t>(t)] = done;
}

int PyramidModelImpl::trained_scales() const {
  int n = 0;
  while (n <= T() && trained[static_cast<size_t>(n)]) ++n;
  return n;
}

std::vector<torch::Tensor> PyramidModelImpl::generator_parameters(int t) const {
  require_scale(*this, t, 0);
  if (t > 0) return generators[static_cast<size_t>(t - 1)]->parameters();
  std::vector<torch::Tensor> params;
  for (const auto* m : {static_cast<const torch::nn::Module*>(encoder.get()),
                        static_cast<const torch::nn::Module*>(decoder.get()),
                        static_cast<const torch::nn::Module*>(codebook.get())}) {
    auto p = m->parameters();
    params.insert(params.end(), p.begin(), p.end());
  }
  return params;
}

std::vector<torch::Tensor> PyramidModelImpl::critic_parameters(int t) const {
  require_scale(*this, t, 0);
  return critics[static_cast<size_t>(t)]->parameters();
}

std::vector<torch::Tensor> PyramidModelImpl::scale_parameters(int t) const {
  auto params = generator_parameters(t);
  auto c = critic_parameters(t);
  params.insert(params.end(), c.begin(), c.end());
  return params;
}

}  // namespace fewgan
