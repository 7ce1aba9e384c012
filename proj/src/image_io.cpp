#include "fewgan/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fewgan/errors.hpp"
#include "fewgan/generators.hpp"
#include "tensor_checks.hpp"

namespace fewgan {
namespace {

bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

cv::Mat read_raw(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("cannot read image " + path.string());
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot decode image " + path.string());
  if (raw.depth() == CV_16U) {
    raw.convertTo(raw, CV_8U, 1.0 / 257.0);
  } else if (raw.depth() != CV_8U) {
    throw IoError("unsupported sample depth in " + path.string());
  }
  return raw;
}

// Row i of the result spreads output pixel i over the input pixels it covers.
torch::Tensor area_weights(int64_t in, int64_t out) {
  auto w = torch::zeros({out, in}, torch::kDouble);
  auto acc = w.accessor<double, 2>();
  const double step = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    const double lo = o * step, hi = (o + 1) * step;
    const auto first = static_cast<int64_t>(std::floor(lo));
    const auto last = std::min(in - 1, static_cast<int64_t>(std::ceil(hi)) - 1);
    for (int64_t k = first; k <= last; ++k) {
      const double overlap = std::min(hi, static_cast<double>(k + 1)) - std::max(lo, static_cast<double>(k));
      if (overlap > 0.0) acc[o][k] = overlap / step;
    }
  }
  return w;
}

}  // namespace

torch::Tensor load_image(const std::filesystem::path& path) {
  cv::Mat raw = read_raw(path);
  cv::Mat rgb;
  switch (raw.channels()) {
    case 1:
      std::cerr << "warning: " << path.string() << " is grayscale; replicating to RGB\n";
      cv::cvtColor(raw, rgb, cv::COLOR_GRAY2RGB);
      break;
    case 3:
      cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
      break;
    case 4:
      std::cerr << "warning: " << path.string() << " has an alpha channel; dropping it\n";
      cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB);
      break;
    default:
      throw IoError("unsupported channel count in " + path.string());
  }
  auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).to(torch::kFloat).mul(2.0 / 255.0).sub(1.0).contiguous();
}

void save_image(const std::filesystem::path& path, const torch::Tensor& image) {
  auto x = image.detach().to(torch::kCPU);
  if (x.dim() == 4) {
    if (x.size(0) != 1) throw InvalidArgument("save_image: expected a single image");
    x = x.squeeze(0);
  }
  detail::require_rank(x, 3, "save_image");
  if (x.size(0) != 3) throw InvalidArgument("save_image: expected 3 channels");
  auto bytes = x.to(torch::kDouble)
                   .clamp(-1.0, 1.0)
                   .add(1.0)
                   .mul(255.0 / 2.0)
                   .round()
                   .to(torch::kUInt8)
                   .permute({1, 2, 0})
                   .contiguous();
  cv::Mat rgb(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC3, bytes.data_ptr());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<uchar> encoded;
  if (!cv::imencode(".png", bgr, encoded)) throw IoError("cannot encode PNG for " + path.string());

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(encoded.data()), static_cast<std::streamsize>(encoded.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<torch::Tensor> load_image_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<std::future<torch::Tensor>> pending;
  pending.reserve(files.size());
  for (const auto& f : files) {
    pending.push_back(std::async(std::launch::async, [f] { return load_image(f); }));
  }
  std::vector<torch::Tensor> images;
  images.reserve(files.size());
  for (auto& p : pending) images.push_back(p.get());
  return images;
}

torch::Tensor load_mask(const std::filesystem::path& path) {
  cv::Mat raw = read_raw(path);
  cv::Mat gray;
  switch (raw.channels()) {
    case 1: gray = raw; break;
    case 3: cv::cvtColor(raw, gray, cv::COLOR_BGR2GRAY); break;
    case 4: cv::cvtColor(raw, gray, cv::COLOR_BGRA2GRAY); break;
    default: throw IoError("unsupported channel count in " + path.string());
  }
  auto t = torch::from_blob(gray.data, {gray.rows, gray.cols}, torch::kUInt8).clone();
  return t.gt(127);
}

torch::Tensor resize_area(const torch::Tensor& x, int64_t height, int64_t width) {
  detail::require_rank(x, 4, "resize_area");
  if (height <= 0 || width <= 0 || height > x.size(2) || width > x.size(3)) {
    throw InvalidArgument("resize_area: target must be positive and no larger than the source");
  }
  if (height == x.size(2) && width == x.size(3)) return x;
  auto rows = area_weights(x.size(2), height).to(x.dtype());
  auto cols = area_weights(x.size(3), width).to(x.dtype());
  return torch::matmul(torch::matmul(rows, x), cols.t());
}

torch::Tensor resize(const torch::Tensor& x, int64_t height, int64_t width) {
  detail::require_rank(x, 4, "resize");
  if (height <= x.size(2) && width <= x.size(3)) return resize_area(x, height, width);
  if (height >= x.size(2) && width >= x.size(3)) return upsample(x, height, width);
  // Mixed: shrink one axis, grow the other.
  auto shrunk = resize_area(x, std::min(height, x.size(2)), std::min(width, x.size(3)));
  return upsample(shrunk, height, width);
}

std::vector<PyramidShape> pyramid_schedule(int64_t height, int64_t width, double scale_factor,
                                           int64_t min_size, int T) {
  if (!(scale_factor > 0.0 && scale_factor < 1.0)) {
    throw InvalidArgument("pyramid: scale factor must lie in (0, 1)");
  }
  if (min_size < 8) throw InvalidArgument("pyramid: min_size must be at least 8");
  if (height <= 0 || width <= 0) throw InvalidArgument("pyramid: empty image");

  auto level = [&](int64_t extent, int steps) {
    return static_cast<int64_t>(std::lround(static_cast<double>(extent) * std::pow(scale_factor, steps)));
  };

  if (T < 0) {
    if (std::min(height, width) < min_size) {
      throw InvalidArgument("pyramid: image " + std::to_string(height) + "x" + std::to_string(width) +
                            " is smaller than min_size " + std::to_string(min_size));
    }
    T = 0;
    const double shorter = static_cast<double>(std::min(height, width));
    while (shorter * std::pow(scale_factor, T + 1) >= static_cast<double>(min_size)) ++T;
  }

  std::vector<PyramidShape> shapes;
  for (int t = 0; t <= T; ++t) {
    shapes.push_back({level(height, T - t), level(width, T - t)});
  }
  if (shapes.front().height < kEncoderStride || shapes.front().width < kEncoderStride) {
    throw InvalidArgument("pyramid: coarsest level is smaller than the encoder stride");
  }
  for (size_t t = 1; t < shapes.size(); ++t) {
    if (shapes[t].height <= shapes[t - 1].height || shapes[t].width <= shapes[t - 1].width) {
      throw InvalidArgument("pyramid: levels " + std::to_string(t - 1) + " and " + std::to_string(t) +
                            " round to the same size; use fewer scales or a smaller scale factor");
    }
  }
  return shapes;
}

ImagePyramid build_pyramid(const torch::Tensor& x, double scale_factor, int64_t min_size, int T) {
  auto batch = x.dim() == 3 ? x.unsqueeze(0) : x;
  detail::require_image(batch, "build_pyramid");
  ImagePyramid pyramid;
  pyramid.scale_factor = scale_factor;
  pyramid.min_size = min_size;
  for (const auto& s : pyramid_schedule(batch.size(2), batch.size(3), scale_factor, min_size, T)) {
    pyramid.levels.push_back(resize_area(batch, s.height, s.width));
  }
  return pyramid;
}

torch::Tensor stack_resized(const std::vector<torch::Tensor>& images, int64_t height, int64_t width) {
  if (images.empty()) throw InvalidArgument("stack_resized: no images");
  std::vector<torch::Tensor> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    detail::require_rank(img, 3, "stack_resized");
    out.push_back(resize(img.unsqueeze(0), height, width));
  }
  return torch::cat(out, 0);
}

}  // namespace fewgan
