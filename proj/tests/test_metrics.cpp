#include "testing.hpp"

#include "fewgan/errors.hpp"
#include "fewgan/metrics.hpp"
#include "oracles.hpp"

using namespace fewgan;

TEST_CASE("diversity of identical images is zero") {
  auto one = torch::rand({1, 3, 8, 8});
  CHECK(diversity(one.expand({200, 3, 8, 8})) == 0.0);
}

TEST_CASE("diversity of a balanced black and white batch is one half") {
  auto batch = torch::zeros({200, 3, 8, 8});
  for (int i = 0; i < 200; i += 2) batch[i].fill_(1.0);
  CHECK(std::abs(diversity(batch) - 0.5) <= 1e-12);
  CHECK(std::abs(diversity(batch, true) - 0.5 * std::sqrt(200.0 / 199.0)) <= 1e-12);
}

TEST_CASE("diversity matches the two-pass oracle") {
  torch::manual_seed(1);
  for (int n = 2; n <= 16; ++n) {
    auto batch = torch::rand({n, 3, 8, 8}, torch::kDouble);
    CHECK(std::abs(diversity(batch) - oracle::diversity_two_pass(batch)) <= 1e-10);
    CHECK(std::abs(diversity(batch, true) - oracle::diversity_two_pass(batch, true)) <= 1e-10);
  }
}

TEST_CASE("diversity ignores batch order and scales linearly") {
  torch::manual_seed(2);
  auto batch = torch::rand({9, 3, 6, 6}, torch::kDouble);
  auto shuffled = batch.index_select(0, torch::randperm(9));
  CHECK(diversity(shuffled) == doctest::Approx(diversity(batch)).epsilon(1e-13));
  for (double alpha : {0.0, 0.3, 2.5}) {
    CHECK(diversity(batch * alpha) == doctest::Approx(alpha * diversity(batch)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(diversity(batch.narrow(0, 0, 1)), InvalidArgument);
}

TEST_CASE("psnr values") {
  auto a = torch::rand({1, 3, 10, 10}, torch::kDouble);
  CHECK(psnr_is_exact(psnr(a, a)));
  auto base = torch::full({1, 3, 10, 10}, 0.5, torch::kDouble);
  CHECK(psnr(base, base + 0.1) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(base, base + std::sqrt(0.001)) == doctest::Approx(30.0).epsilon(1e-12));

  double last = std::numeric_limits<double>::infinity();
  for (double d : {0.001, 0.01, 0.05, 0.2, 0.4}) {
    const double p = psnr(base, base + d);
    CHECK(p < last);
    last = p;
  }
}

TEST_CASE("ssim metric of identical images is one") {
  auto a = torch::rand({2, 3, 12, 12}) * 2 - 1;
  CHECK(ssim_metric(a, a) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(ssim_metric(a, -a) < 1.0);
  CHECK(to_unit_range(torch::tensor({-1.0, 1.0})).equal(torch::tensor({0.0, 1.0})));
}
