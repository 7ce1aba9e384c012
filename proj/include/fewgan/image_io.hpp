#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fewgan {

// Decodes a PNG or JPEG into a [3, H, W] float tensor in [-1, 1] (8-bit v -> 2v/255 - 1).
// Grayscale and alpha inputs are converted to RGB with a warning on stderr.
torch::Tensor load_image(const std::filesystem::path& path);

// Encodes a [3, H, W] or [1, 3, H, W] image in [-1, 1] as 8-bit RGB PNG. Values outside
// the range are clamped. Written atomically.
void save_image(const std::filesystem::path& path, const torch::Tensor& image);

// Every PNG/JPEG in a directory, sorted by file name, decoded on worker threads.
std::vector<torch::Tensor> load_image_dir(const std::filesystem::path& dir);

// Single-channel mask; any pixel brighter than mid-gray is true. Returns [H, W] bool.
torch::Tensor load_mask(const std::filesystem::path& path);

// Exact area-weighted downsampling of [B, C, H, W] to a size no larger than the input.
torch::Tensor resize_area(const torch::Tensor& x, int64_t height, int64_t width);

// Area averaging when shrinking, corner-aligned bilinear when enlarging.
torch::Tensor resize(const torch::Tensor& x, int64_t height, int64_t width);

struct PyramidShape {
  int64_t height;
  int64_t width;
};

// Level sizes H_t = round(H * rho^(T - t)), coarsest first. With T < 0 the finest index
// is the largest T whose coarsest level still has min(H_0, W_0) >= min_size.
std::vector<PyramidShape> pyramid_schedule(int64_t height, int64_t width, double scale_factor,
                                           int64_t min_size, int T = -1);

struct ImagePyramid {
  std::vector<torch::Tensor> levels;  // levels[t] is [B, 3, H_t, W_t]; levels.back() is the source
  double scale_factor = 0.75;
  int64_t min_size = 32;

  int T() const { return static_cast<int>(levels.size()) - 1; }
};

ImagePyramid build_pyramid(const torch::Tensor& x, double scale_factor, int64_t min_size, int T = -1);

// Stacks equally sized [3, H, W] images into a batch after resizing to (height, width).
torch::Tensor stack_resized(const std::vector<torch::Tensor>& images, int64_t height, int64_t width);

}  // namespace fewgan
