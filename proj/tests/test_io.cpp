#include "testing.hpp"

#include <opencv2/imgcodecs.hpp>

#include <fstream>
#include <iterator>

#include "fewgan/checkpoint.hpp"
#include "fewgan/errors.hpp"
#include "fewgan/image_io.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace fewgan;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

PyramidModel tiny_model(uint64_t seed) {
  TrainConfig cfg;
  cfg.K = 8;
  cfg.n_z = 3;
  cfg.lambda_pos = 1;
  cfg.channels = 4;
  cfg.encoder_channels = 4;
  std::vector<ScaleSpec> specs(2);
  specs[0].height = specs[0].width = 8;
  specs[1].height = specs[1].width = 11;
  torch::manual_seed(seed);
  return PyramidModel(model_options(cfg), specs);
}

Checkpoint tiny_checkpoint(uint64_t seed, bool with_prior) {
  Checkpoint c;
  c.config.K = 8;
  c.config.n_z = 3;
  c.config.lambda_pos = 1;
  c.config.channels = 4;
  c.config.encoder_channels = 4;
  c.config.prior_embed = 4;
  c.config.prior_channels = 8;
  c.config.prior_layers = 2;
  c.model = tiny_model(seed);
  c.model->mark_trained(0);
  if (with_prior) {
    c.prior = AutoregressivePrior(prior_options(c.config));
    c.prior_codebook_tag = codebook_tag(*c.model->codebook);
  }
  return c;
}

}  // namespace

TEST_CASE("pixel values map affinely to the model range") {
  auto dir = scratch_dir("io_values");
  cv::Mat m(1, 3, CV_8UC3);
  m.at<cv::Vec3b>(0, 0) = {255, 255, 255};
  m.at<cv::Vec3b>(0, 1) = {0, 0, 0};
  m.at<cv::Vec3b>(0, 2) = {128, 64, 32};  // stored BGR
  cv::imwrite((dir / "px.png").string(), m);
  auto img = load_image(dir / "px.png");
  REQUIRE(img.sizes() == torch::IntArrayRef({3, 1, 3}));
  CHECK(img[0][0][0].item<float>() == 1.0f);
  CHECK(img[1][0][1].item<float>() == -1.0f);
  CHECK(img[2][0][2].item<float>() == doctest::Approx(2.0 * 128 / 255 - 1).epsilon(1e-6));
  CHECK(img[0][0][2].item<float>() == doctest::Approx(2.0 * 32 / 255 - 1).epsilon(1e-6));
}

TEST_CASE("grayscale images are replicated to three channels") {
  auto dir = scratch_dir("io_gray");
  cv::Mat g(4, 5, CV_8UC1, cv::Scalar(200));
  cv::imwrite((dir / "g.png").string(), g);
  auto img = load_image(dir / "g.png");
  CHECK(img.sizes() == torch::IntArrayRef({3, 4, 5}));
  CHECK(torch::equal(img[0], img[2]));
  CHECK_THROWS_AS(load_image(dir / "missing.png"), IoError);
}

TEST_CASE("saving then loading a generated image stays within one 8-bit step") {
  auto dir = scratch_dir("io_roundtrip");
  auto img = synthetic_image(3, 17, 23);
  save_image(dir / "a.png", img);
  auto back = load_image(dir / "a.png");
  // 1/255 in [0, 1] is 2/255 in the model range
  CHECK((back - img).abs().max().item<float>() <= 1.0f / 255 + 1e-6f);
  save_image(dir / "clamped.png", img.unsqueeze(0) * 3);
  CHECK(load_image(dir / "clamped.png").abs().max().item<float>() <= 1.0f);
  CHECK_THROWS_AS(save_image(dir / "bad.png", torch::zeros({2, 3, 4, 4})), InvalidArgument);
}

TEST_CASE("directory loading is sorted and masks threshold at mid-gray") {
  auto dir = scratch_dir("io_dir");
  save_image(dir / "b.png", torch::ones({3, 4, 4}));
  save_image(dir / "a.png", -torch::ones({3, 4, 4}));
  write_bytes(dir / "notes.txt", "ignored");
  auto imgs = load_image_dir(dir);
  REQUIRE(imgs.size() == 2);
  CHECK(imgs[0].max().item<float>() == -1.0f);

  cv::Mat m(2, 2, CV_8UC1);
  m.at<uint8_t>(0, 0) = 0;
  m.at<uint8_t>(0, 1) = 127;
  m.at<uint8_t>(1, 0) = 128;
  m.at<uint8_t>(1, 1) = 255;
  cv::imwrite((dir / "mask.png").string(), m);
  auto mask = load_mask(dir / "mask.png");
  CHECK(torch::equal(mask, torch::tensor({false, false, true, true}).view({2, 2})));
}

TEST_CASE("area resize averages exactly") {
  auto x = torch::arange(16, torch::kDouble).view({1, 1, 4, 4});
  auto y = resize_area(x, 2, 2);
  CHECK(torch::allclose(y.view({4}), torch::tensor({2.5, 4.5, 10.5, 12.5}, torch::kDouble)));
  // fractional coverage: 3 -> 2 weights each output by 2/3 and 1/3
  auto r = resize_area(torch::tensor({0.0, 3.0, 6.0}, torch::kDouble).view({1, 1, 1, 3}), 1, 2);
  CHECK(r[0][0][0][0].item<double>() == doctest::Approx(1.0));
  CHECK(r[0][0][0][1].item<double>() == doctest::Approx(5.0));
  CHECK(torch::allclose(resize(torch::full({1, 3, 9, 7}, 0.3), 4, 5), torch::full({1, 3, 4, 5}, 0.3)));
  CHECK_THROWS_AS(resize_area(x, 5, 2), InvalidArgument);
}

TEST_CASE("pyramid schedule for a 128 pixel square") {
  auto s = pyramid_schedule(128, 128, 0.75, 32);
  REQUIRE(s.size() == 5);
  const std::vector<int64_t> expected{41, 54, 72, 96, 128};
  auto ref = oracle::pyramid_sizes(128, 0.75, 4);
  for (size_t t = 0; t < 5; ++t) {
    CHECK(s[t].height == expected[t]);
    CHECK(s[t].width == expected[t]);
    CHECK(s[t].height == ref[t]);
  }
  // one more level would fall below min_size, however the rounding is chained
  CHECK(std::lround(128 * std::pow(0.75, 5)) < 32);
  CHECK(std::lround(41 * 0.75) == 31);
}

TEST_CASE("pyramid schedule shape law and overrides") {
  for (int64_t H : {40, 64, 97}) {
    for (int64_t W : {48, 80}) {
      auto s = pyramid_schedule(H, W, 0.8, 32);
      const int T = static_cast<int>(s.size()) - 1;
      auto rh = oracle::pyramid_sizes(H, 0.8, T);
      auto rw = oracle::pyramid_sizes(W, 0.8, T);
      for (int t = 0; t <= T; ++t) {
        CHECK(s[static_cast<size_t>(t)].height == rh[static_cast<size_t>(t)]);
        CHECK(s[static_cast<size_t>(t)].width == rw[static_cast<size_t>(t)]);
      }
      CHECK(std::min(s[0].height, s[0].width) >= 32);
    }
  }
  CHECK(pyramid_schedule(40, 40, 0.75, 32).size() == 1);
  CHECK(pyramid_schedule(128, 128, 0.75, 32, 2).size() == 3);
  CHECK_THROWS_AS(pyramid_schedule(20, 40, 0.75, 32), InvalidArgument);
  CHECK_THROWS_AS(pyramid_schedule(64, 64, 1.0, 32), InvalidArgument);
  CHECK_THROWS_AS(pyramid_schedule(64, 64, 0.75, 4), InvalidArgument);
}

TEST_CASE("pyramid levels are deterministic and keep constants constant") {
  auto x = torch::full({2, 3, 64, 64}, -0.4);
  auto p = build_pyramid(x, 0.75, 32);
  CHECK(p.T() == 2);
  CHECK(torch::equal(p.levels.back(), x));
  for (const auto& level : p.levels) CHECK(torch::allclose(level, torch::full_like(level, -0.4)));
  auto y = torch::rand({1, 3, 64, 64});
  auto a = build_pyramid(y, 0.75, 32), b = build_pyramid(y, 0.75, 32);
  for (int t = 0; t <= a.T(); ++t) CHECK(torch::equal(a.levels[static_cast<size_t>(t)], b.levels[static_cast<size_t>(t)]));
}

TEST_CASE("config text round trip and validation") {
  TrainConfig cfg;
  cfg.K = 64;
  cfg.lambda_gp = 0.123456789012345;
  cfg.weights.ssim = 0.5;
  cfg.continuity_reduction = ContinuityReduction::Sum;
  cfg.side_dataset_path = "side dir/x";
  auto back = TrainConfig::from_text(cfg.to_text());
  CHECK(back.to_text() == cfg.to_text());
  CHECK(back.lambda_gp == cfg.lambda_gp);

  auto parsed = TrainConfig::from_text("# comment\nK = 32\n\nseed=7\nw_ssim=2\nside_as_fake=true\n");
  CHECK(parsed.K == 32);
  CHECK(parsed.seed == 7);
  CHECK(parsed.weights.ssim == 2.0);
  CHECK(parsed.side_as_fake);

  CHECK_THROWS_AS(TrainConfig::from_text("nonsense=1"), InvalidArgument);
  CHECK_THROWS_AS(TrainConfig::from_text("K"), InvalidArgument);
  CHECK_THROWS_AS(TrainConfig::from_text("K=abc"), InvalidArgument);
  CHECK_THROWS_AS(TrainConfig::from_text("scale_factor=1.5"), InvalidArgument);
  CHECK_THROWS_AS(TrainConfig::from_text("w_adv=-1"), InvalidArgument);
  CHECK_THROWS_AS(TrainConfig::from_text("lr_codebook=0"), InvalidArgument);
  CHECK(TrainConfig::from_text("lr_codebook=0.5").lr_codebook == 0.5);
  CHECK(TrainConfig{}.beta == 0.25);
}

TEST_CASE("checkpoint round trip is bit exact") {
  auto dir = scratch_dir("ckpt_roundtrip");
  auto ckpt = tiny_checkpoint(1, true);
  save_checkpoint(ckpt, dir / "m.ckpt");
  auto back = load_checkpoint(dir / "m.ckpt");
  CHECK(parameter_hash(*back.model) == parameter_hash(*ckpt.model));
  CHECK(parameter_hash(*back.prior) == parameter_hash(*ckpt.prior));
  CHECK(back.config.to_text() == ckpt.config.to_text());
  CHECK(back.model->is_trained(0));
  CHECK_FALSE(back.model->is_trained(1));
  CHECK(back.model->spec(1).height == 11);
  auto x = torch::rand({1, 3, 8, 8});
  CHECK(torch::equal(back.model->full_forward(x), ckpt.model->full_forward(x)));

  // saving the reloaded model reproduces the file byte for byte
  save_checkpoint(back, dir / "again.ckpt");
  CHECK(read_bytes(dir / "m.ckpt") == read_bytes(dir / "again.ckpt"));
}

TEST_CASE("checkpoint version, corruption and codebook guards") {
  auto dir = scratch_dir("ckpt_errors");
  save_checkpoint(tiny_checkpoint(2, true), dir / "m.ckpt");
  const auto bytes = read_bytes(dir / "m.ckpt");

  auto bumped = bytes;
  bumped[8] = static_cast<char>(bumped[8] + 1);
  write_bytes(dir / "bumped.ckpt", bumped);
  CHECK_THROWS_AS(load_checkpoint(dir / "bumped.ckpt"), UnsupportedVersion);

  write_bytes(dir / "short.ckpt", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), CorruptCheckpoint);

  auto flipped = bytes;
  flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 0x40);
  write_bytes(dir / "flipped.ckpt", flipped);
  CHECK_THROWS_AS(load_checkpoint(dir / "flipped.ckpt"), CorruptCheckpoint);

  write_bytes(dir / "junk.ckpt", "not a checkpoint at all");
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), CorruptCheckpoint);

  // prior recorded against codebook A, stored next to codebook B
  auto mismatched = tiny_checkpoint(3, true);
  mismatched.prior_codebook_tag = codebook_tag(*tiny_model(4)->codebook);
  REQUIRE(mismatched.prior_codebook_tag != codebook_tag(*mismatched.model->codebook));
  save_checkpoint(mismatched, dir / "mismatch.ckpt");
  CHECK_THROWS_AS(load_checkpoint(dir / "mismatch.ckpt"), CodebookMismatch);

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST_CASE("checkpoints refuse non-finite parameters") {
  auto dir = scratch_dir("ckpt_nan");
  auto ckpt = tiny_checkpoint(5, false);
  {
    torch::NoGradGuard no_grad;
    ckpt.model->critics[1]->out->bias.fill_(std::numeric_limits<float>::quiet_NaN());
  }
  CHECK_FALSE(all_finite(*ckpt.model));
  CHECK_THROWS_AS(save_checkpoint(ckpt, dir / "nan.ckpt"), InvalidState);
  CHECK_FALSE(fs::exists(dir / "nan.ckpt"));
}

TEST_CASE("parameter hashes distinguish models") {
  CHECK(parameter_hash(*tiny_model(1)) == parameter_hash(*tiny_model(1)));
  CHECK(parameter_hash(*tiny_model(1)) != parameter_hash(*tiny_model(2)));
}
