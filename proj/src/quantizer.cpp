#include "fewgan/quantizer.hpp"

#include "fewgan/errors.hpp"
#include "tensor_checks.hpp"

namespace fewgan {
namespace {

torch::Tensor axis_coords(int64_t n, torch::TensorOptions options) {
  if (n == 1) return torch::zeros({1}, options);
  auto idx = torch::arange(n, options);
  return idx * (2.0 / static_cast<double>(n - 1)) - 1.0;
}

struct StraightThrough : torch::autograd::Function<StraightThrough> {
  static torch::Tensor forward(torch::autograd::AutogradContext*, const torch::Tensor& z,
                               const torch::Tensor& z_q) {
    (void)z;
    return z_q.clone();
  }

  static torch::autograd::variable_list backward(torch::autograd::AutogradContext*,
                                                 torch::autograd::variable_list grad_out) {
    return {grad_out[0], torch::Tensor()};
  }
};

}  // namespace

torch::Tensor positional_encode(int64_t h, int64_t w, int64_t lambda_pos,
                                torch::TensorOptions options) {
  if (h <= 0 || w <= 0) throw InvalidArgument("positional_encode: grid dimensions must be positive");
  if (lambda_pos <= 0) throw InvalidArgument("positional_encode: lambda_pos must be positive");

  auto cols = axis_coords(w, options).view({1, w}).expand({h, w});
  auto rows = axis_coords(h, options).view({h, 1}).expand({h, w});
  auto pair = torch::stack({cols, rows}, 0);  // [2, h, w]
  return pair.repeat({lambda_pos, 1, 1}).unsqueeze(0).contiguous();
}

torch::Tensor augment(const torch::Tensor& content, const torch::Tensor& pos) {
  detail::require_rank(content, 4, "augment: content");
  detail::require_rank(pos, 4, "augment: pos");
  if (pos.size(1) == 0) throw InvalidArgument("augment: positional grid has no channels");
  if (pos.size(1) % 2 != 0) throw InvalidArgument("augment: positional channels must come in pairs");
  if (content.size(2) != pos.size(2) || content.size(3) != pos.size(3)) {
    throw InvalidArgument("augment: spatial shapes differ");
  }
  if (pos.size(0) != 1 && pos.size(0) != content.size(0)) {
    throw InvalidArgument("augment: batch sizes differ");
  }
  auto p = pos.to(content.options()).expand({content.size(0), pos.size(1), pos.size(2), pos.size(3)});
  return torch::cat({content, p}, 1);
}

CodebookImpl::CodebookImpl(int64_t K_, int64_t n_z_, int64_t lambda_pos_)
    : K(K_), n_z(n_z_), lambda_pos(lambda_pos_) {
  if (K < 1 || n_z < 1 || lambda_pos < 1) {
    throw InvalidArgument("Codebook: K, n_z and lambda_pos must be positive");
  }
  entries = register_parameter("entries", torch::empty({K, dim()}));
  reset_parameters();
}

void CodebookImpl::reset_parameters() {
  torch::NoGradGuard no_grad;
  const double bound = 1.0 / static_cast<double>(K);
  entries.narrow(1, 0, n_z).uniform_(-bound, bound);
  entries.narrow(1, n_z, 2 * lambda_pos).uniform_(-1.0, 1.0);
}

QuantizeResult quantize(const torch::Tensor& z, const torch::Tensor& entries) {
  detail::require_rank(z, 4, "quantize: z");
  detail::require_rank(entries, 2, "quantize: codebook");
  if (z.size(1) != entries.size(1)) {
    throw InvalidArgument("quantize: latent dimension " + std::to_string(z.size(1)) +
                          " does not match codebook dimension " + std::to_string(entries.size(1)));
  }
  const auto B = z.size(0), d = z.size(1), h = z.size(2), w = z.size(3);

  torch::Tensor indices;
  {
    torch::NoGradGuard no_grad;
    auto flat = z.permute({0, 2, 3, 1}).reshape({-1, d});
    // Accumulate channel by channel with elementwise ops: a vectorized reduction can round
    // identical rows differently, which would break the lowest-index tie rule.
    auto dist = torch::zeros({flat.size(0), entries.size(0)}, flat.options());  // [cells, K]
    for (int64_t c = 0; c < d; ++c) {
      dist += (flat.select(1, c).unsqueeze(1) - entries.select(1, c).unsqueeze(0)).square();
    }
    indices = dist.argmin(1).view({B, h, w});
  }
  return {indices, lookup(indices, entries)};
}

torch::Tensor lookup(const torch::Tensor& indices, const torch::Tensor& entries) {
  detail::require_rank(indices, 3, "lookup: indices");
  if (indices.numel() > 0) {
    const auto lo = indices.min().item<int64_t>();
    const auto hi = indices.max().item<int64_t>();
    if (lo < 0 || hi >= entries.size(0)) {
      throw InvalidArgument("lookup: index out of range [0, " + std::to_string(entries.size(0)) + ")");
    }
  }
  const auto B = indices.size(0), h = indices.size(1), w = indices.size(2);
  auto rows = entries.index_select(0, indices.reshape({-1}).to(torch::kLong));
  return rows.view({B, h, w, entries.size(1)}).permute({0, 3, 1, 2}).contiguous();
}

torch::Tensor straight_through(const torch::Tensor& z, const torch::Tensor& z_q) {
  detail::require_same_shape(z, z_q, "straight_through");
  return StraightThrough::apply(z, z_q.detach());
}

torch::Tensor vq_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& z_e,
                      const torch::Tensor& z_q, double beta) {
  detail::require_same_shape(x, x_hat, "vq_loss: images");
  detail::require_same_shape(z_e, z_q, "vq_loss: latents");
  if (beta < 0.0) throw InvalidArgument("vq_loss: beta must be non-negative");
  auto reconstruction = (x - x_hat).square().mean();
  auto codebook = (z_e.detach() - z_q).square().mean();
  auto commitment = (z_e - z_q.detach()).square().mean();
  return reconstruction + codebook + beta * commitment;
}

}  // namespace fewgan
