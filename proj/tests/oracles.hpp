#pragma once

// Independent reference implementations used to check the library. Everything here
// is written with plain loops over double-precision accessors.

#include <torch/torch.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

// Nearest codebook row per cell by exhaustive search; strict < keeps the lowest index
// on ties. z is [B, d, h, w], entries [K, d]. Returns [B, h, w].
inline torch::Tensor brute_force_quantize(const torch::Tensor& z, const torch::Tensor& entries) {
  auto zd = z.to(torch::kDouble).contiguous();
  auto ed = entries.to(torch::kDouble).contiguous();
  auto za = zd.accessor<double, 4>();
  auto ea = ed.accessor<double, 2>();
  const auto B = z.size(0), d = z.size(1), h = z.size(2), w = z.size(3), K = entries.size(0);
  auto out = torch::zeros({B, h, w}, torch::kLong);
  auto oa = out.accessor<int64_t, 3>();
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) {
        double best = std::numeric_limits<double>::infinity();
        int64_t arg = -1;
        for (int64_t k = 0; k < K; ++k) {
          double s = 0;
          for (int64_t c = 0; c < d; ++c) {
            const double diff = za[b][c][i][j] - ea[k][c];
            s += diff * diff;
          }
          if (s < best) {
            best = s;
            arg = k;
          }
        }
        oa[b][i][j] = arg;
      }
  return out;
}

// The continuity sum evaluated term by term: for i in [0, w-2], j in [0, h-2] add
// |m[j][i+1] - m[j][i]| + |m[j+1][i] - m[j][i]| over every batch element and channel.
inline double continuity_double_loop(const torch::Tensor& m) {
  auto md = m.to(torch::kDouble).contiguous();
  auto a = md.accessor<double, 4>();
  double total = 0;
  for (int64_t b = 0; b < m.size(0); ++b)
    for (int64_t c = 0; c < m.size(1); ++c)
      for (int64_t i = 0; i + 1 < m.size(3); ++i)
        for (int64_t j = 0; j + 1 < m.size(2); ++j) {
          total += std::abs(a[b][c][j][i + 1] - a[b][c][j][i]);
          total += std::abs(a[b][c][j + 1][i] - a[b][c][j][i]);
        }
  return total;
}

// Central finite-difference gradient of a scalar function at x (double tensor).
inline torch::Tensor numeric_gradient(const std::function<double(const torch::Tensor&)>& f,
                                      const torch::Tensor& x, double step = 1e-6) {
  auto base = x.detach().to(torch::kDouble).contiguous().clone();
  auto grad = torch::zeros_like(base);
  auto flat = base.view({-1});
  auto g = grad.view({-1});
  auto fa = flat.accessor<double, 1>();
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = fa[i];
    fa[i] = orig + step;
    const double up = f(base);
    fa[i] = orig - step;
    const double down = f(base);
    fa[i] = orig;
    g[i] = (up - down) / (2 * step);
  }
  return grad;
}

// max |a - n| / max(max |n|, floor): relative error of a whole gradient tensor.
inline double relative_error(const torch::Tensor& analytic, const torch::Tensor& numeric, double floor = 1e-8) {
  const double diff = (analytic.to(torch::kDouble) - numeric).abs().max().item<double>();
  const double scale = std::max(numeric.abs().max().item<double>(), floor);
  return diff / scale;
}

// Two-pass population (or sample) variance per position, then sqrt and mean.
inline double diversity_two_pass(const torch::Tensor& batch, bool sample_std = false) {
  auto bd = batch.to(torch::kDouble).contiguous().view({batch.size(0), -1});
  auto a = bd.accessor<double, 2>();
  const int64_t n = bd.size(0), P = bd.size(1);
  double total = 0;
  for (int64_t p = 0; p < P; ++p) {
    double mean = 0;
    for (int64_t i = 0; i < n; ++i) mean += a[i][p];
    mean /= static_cast<double>(n);
    double ss = 0;
    for (int64_t i = 0; i < n; ++i) ss += (a[i][p] - mean) * (a[i][p] - mean);
    total += std::sqrt(ss / static_cast<double>(sample_std ? n - 1 : n));
  }
  return total / static_cast<double>(P);
}

// SSIM between two constant images with values u, v in [0, 1]: variances and
// covariance vanish, leaving the luminance term (2uv + C1) / (u^2 + v^2 + C1).
inline double ssim_of_constants(double u, double v) {
  const double C1 = 0.01 * 0.01;
  return (2 * u * v + C1) / (u * u + v * v + C1);
}

// Corner-aligned bilinear sample of a single-channel [H, W] array at (H2, W2).
inline std::vector<std::vector<double>> bilinear_aligned(const std::vector<std::vector<double>>& src, int H2, int W2) {
  const int H = static_cast<int>(src.size()), W = static_cast<int>(src[0].size());
  std::vector<std::vector<double>> out(H2, std::vector<double>(W2));
  for (int y = 0; y < H2; ++y)
    for (int x = 0; x < W2; ++x) {
      const double sy = H2 == 1 ? 0 : y * double(H - 1) / (H2 - 1);
      const double sx = W2 == 1 ? 0 : x * double(W - 1) / (W2 - 1);
      const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
      const double fy = sy - y0, fx = sx - x0;
      out[y][x] = (1 - fy) * ((1 - fx) * src[y0][x0] + fx * src[y0][x1]) + fy * ((1 - fx) * src[y1][x0] + fx * src[y1][x1]);
    }
  return out;
}

// Round-half-away pyramid sizes n * rho^(T - t), coarsest first.
inline std::vector<long> pyramid_sizes(long n, double rho, int T) {
  std::vector<long> out;
  for (int t = 0; t <= T; ++t) out.push_back(std::lround(static_cast<double>(n) * std::pow(rho, T - t)));
  return out;
}

}  // namespace oracle
