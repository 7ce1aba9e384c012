#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace fewgan {

// Tensor layouts used throughout:
//   image       [B, 3, H, W], values in [-1, 1]
//   latent grid [B, C, h, w]
//   index grid  [B, h, w], int64 values in [0, K)

// Normalized grid coordinates, shape [1, 2 * lambda_pos, h, w]. Channel 2r holds the
// column coordinate 2i/(w-1) - 1 and channel 2r+1 the row coordinate 2j/(h-1) - 1 for
// every replica r. A dimension of extent 1 maps to 0.
torch::Tensor positional_encode(int64_t h, int64_t w, int64_t lambda_pos,
                                torch::TensorOptions options = torch::kFloat);

// Per-cell concatenation: content channels first, positional channels last.
// A single-sample positional grid broadcasts over the content batch.
torch::Tensor augment(const torch::Tensor& content, const torch::Tensor& pos);

// The discrete patch vocabulary: K entries of dimension n_z + 2 * lambda_pos.
struct CodebookImpl : torch::nn::Module {
  CodebookImpl(int64_t K, int64_t n_z, int64_t lambda_pos);

  // Content slots uniform in [-1/K, 1/K], positional slots uniform in [-1, 1].
  void reset_parameters();

  int64_t size() const { return K; }
  int64_t dim() const { return n_z + 2 * lambda_pos; }

  int64_t K;
  int64_t n_z;
  int64_t lambda_pos;
  torch::Tensor entries;  // [K, dim]
};
TORCH_MODULE(Codebook);

struct QuantizeResult {
  torch::Tensor indices;    // [B, h, w]
  torch::Tensor quantized;  // [B, d, h, w], rows of the codebook
};

// Nearest entry by squared Euclidean distance over the full vector; ties go to
// the lowest index. Gradients reach `entries` through the returned values.
QuantizeResult quantize(const torch::Tensor& z, const torch::Tensor& entries);

// Looks up entries for an index grid, returning [B, d, h, w].
torch::Tensor lookup(const torch::Tensor& indices, const torch::Tensor& entries);

// Forward value is exactly z_q; the backward pass hands the incoming gradient to z
// unchanged and none to z_q.
torch::Tensor straight_through(const torch::Tensor& z, const torch::Tensor& z_q);

// Reconstruction + codebook + beta * commitment, each a mean over elements.
torch::Tensor vq_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& z_e,
                      const torch::Tensor& z_q, double beta);

}  // namespace fewgan
