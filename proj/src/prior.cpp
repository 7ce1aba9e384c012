#include "fewgan/prior.hpp"

#include <cmath>
#include <random>

#include "fewgan/errors.hpp"
#include "tensor_checks.hpp"

namespace fewgan {
namespace F = torch::nn::functional;
namespace {

constexpr int64_t kFirstKernel = 7;
constexpr int64_t kKernel = 3;

// Vertical masks keep rows strictly above the centre (first layer) or up to and
// including it (later layers, whose input already excludes the current row).
torch::Tensor vertical_mask(int64_t k, bool first, bool causal) {
  auto m = torch::ones({k, k});
  if (!causal) return m;
  const int64_t keep = first ? k / 2 : k / 2 + 1;
  m.narrow(0, keep, k - keep).zero_();
  return m;
}

// Horizontal masks keep columns strictly left of the centre (first layer) or up to
// and including it.
torch::Tensor horizontal_mask(int64_t k, bool first, bool causal) {
  auto m = torch::ones({1, k});
  if (!causal) return m;
  const int64_t keep = first ? k / 2 : k / 2 + 1;
  m.narrow(1, keep, k - keep).zero_();
  return m;
}

void require_grid(const torch::Tensor& grid, int64_t K, const std::string& what) {
  if (grid.scalar_type() != torch::kLong) throw InvalidArgument(what + ": expected int64 indices");
  if (grid.numel() > 0 && (grid.min().item<int64_t>() < 0 || grid.max().item<int64_t>() >= K)) {
    throw InvalidArgument(what + ": index outside [0, " + std::to_string(K) + ")");
  }
}

int64_t draw(const torch::Tensor& logits, const SampleOptions& opts, std::mt19937_64& rng) {
  auto l = logits.to(torch::kDouble);
  if (opts.argmax) return l.argmax().item<int64_t>();
  auto probs = torch::softmax(l / opts.temperature, 0).contiguous();
  const auto* p = probs.data_ptr<double>();
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  const int64_t K = probs.size(0);
  for (int64_t k = 0; k < K; ++k) {
    acc += p[k];
    if (u < acc) return k;
  }
  // Rounding left u above the final cumulative sum; take the last non-zero entry.
  for (int64_t k = K - 1; k >= 0; --k) {
    if (p[k] > 0.0) return k;
  }
  return K - 1;
}

}  // namespace

MaskedConv2dImpl::MaskedConv2dImpl(int64_t in, int64_t out, int64_t kh, int64_t kw, torch::Tensor mask_) {
  conv = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, {kh, kw}).padding({kh / 2, kw / 2})));
  mask = register_buffer("mask", mask_.view({1, 1, kh, kw}).clone());
}

torch::Tensor MaskedConv2dImpl::forward(const torch::Tensor& x) {
  return F::conv2d(x, conv->weight * mask,
                   F::Conv2dFuncOptions().bias(conv->bias).padding(conv->options.padding()));
}

AutoregressivePriorImpl::AutoregressivePriorImpl(PriorOptions opts) : options(opts) {
  if (options.K < 1 || options.embed < 1 || options.channels < 1 || options.layers < 1) {
    throw InvalidArgument("AutoregressivePrior: sizes must be positive");
  }
  embedding = register_module("embedding", torch::nn::Embedding(options.K, options.embed));
  const int64_t C = options.channels;
  for (int64_t l = 0; l < options.layers; ++l) {
    const bool first = l == 0;
    const int64_t k = first ? kFirstKernel : kKernel;
    const int64_t in = first ? options.embed : C;
    vertical.push_back(register_module(
        "v" + std::to_string(l), MaskedConv2d(in, C, k, k, vertical_mask(k, first, options.causal))));
    horizontal.push_back(register_module(
        "h" + std::to_string(l), MaskedConv2d(in, C, 1, k, horizontal_mask(k, first, options.causal))));
    v_to_h.push_back(register_module("vh" + std::to_string(l),
                                     torch::nn::Conv2d(torch::nn::Conv2dOptions(C, C, 1))));
  }
  head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(C, C, 1)));
  out = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(C, options.K, 1)));
  torch::NoGradGuard no_grad;
  out->weight.zero_();
  out->bias.zero_();
}

torch::Tensor AutoregressivePriorImpl::forward(const torch::Tensor& grid) {
  detail::require_rank(grid, 3, "prior");
  auto e = embedding->forward(grid).permute({0, 3, 1, 2});
  auto v = torch::relu(vertical[0]->forward(e));
  auto h = torch::relu(horizontal[0]->forward(e) + v_to_h[0]->forward(v));
  for (size_t l = 1; l < vertical.size(); ++l) {
    v = torch::relu(vertical[l]->forward(v));
    h = h + torch::relu(horizontal[l]->forward(h) + v_to_h[l]->forward(v));
  }
  return out->forward(torch::relu(head->forward(h)));
}

torch::Tensor encode_side_dataset(const PyramidModel& model, const torch::Tensor& side_images) {
  if (!model) throw InvalidState("encode_side_dataset: no model");
  if (!model->is_trained(0)) throw InvalidState("encode_side_dataset: the codebook has not been trained");
  if (side_images.dim() == 3) return encode_side_dataset(model, side_images.unsqueeze(0));
  torch::NoGradGuard no_grad;
  auto z = model->augmented(model->encode(side_images));
  return quantize(z, model->codebook->entries).indices;
}

double prior_nll(const AutoregressivePrior& prior, const torch::Tensor& grids) {
  detail::require_rank(grids, 3, "prior_nll");
  require_grid(grids, prior->options.K, "prior_nll");
  torch::NoGradGuard no_grad;
  auto logits = prior.ptr()->forward(grids);
  return F::cross_entropy(logits, grids).item<double>();
}

PriorTrainResult train_prior(AutoregressivePrior& prior, const torch::Tensor& grids, int64_t epochs,
                             double lr) {
  if (!grids.defined() || grids.numel() == 0) throw InvalidArgument("train_prior: no grids");
  detail::require_rank(grids, 3, "train_prior");
  require_grid(grids, prior->options.K, "train_prior");
  if (epochs < 0) throw InvalidArgument("train_prior: epochs must be non-negative");

  PriorTrainResult result;
  result.initial_nll = prior_nll(prior, grids);
  result.final_nll = result.initial_nll;
  if (epochs == 0) return result;

  torch::optim::Adam opt(prior->parameters(), torch::optim::AdamOptions(lr));
  for (int64_t e = 0; e < epochs; ++e) {
    opt.zero_grad();
    auto loss = F::cross_entropy(prior->forward(grids), grids);
    const double value = loss.item<double>();
    if (!std::isfinite(value)) throw TrainingDivergence(-1, e, "prior NLL is not finite");
    loss.backward();
    opt.step();
    result.history.push_back(value);
  }
  result.final_nll = prior_nll(prior, grids);
  return result;
}

torch::Tensor conditional_fill(const AutoregressivePrior& prior, const torch::Tensor& grid,
                               const torch::Tensor& observed, const SampleOptions& opts) {
  detail::require_rank(grid, 2, "conditional_fill: grid");
  detail::require_same_shape(grid, observed, "conditional_fill");
  if (observed.scalar_type() != torch::kBool) throw InvalidArgument("conditional_fill: mask must be bool");
  if (!opts.argmax && !(opts.temperature > 0.0)) {
    throw InvalidArgument("conditional_fill: temperature must be positive");
  }
  const int64_t h = grid.size(0), w = grid.size(1);
  auto out = torch::where(observed, grid.to(torch::kLong), torch::zeros_like(grid, torch::kLong)).contiguous();
  require_grid(out, prior->options.K, "conditional_fill");
  auto obs = observed.contiguous();
  const auto* obs_p = obs.data_ptr<bool>();

  torch::NoGradGuard no_grad;
  std::mt19937_64 rng(opts.seed);
  auto* out_p = out.data_ptr<int64_t>();
  for (int64_t pos = 0; pos < h * w; ++pos) {
    if (obs_p[pos]) continue;
    const int64_t r = pos / w, c = pos % w;
    auto logits = prior.ptr()->forward(out.unsqueeze(0));
    out_p[pos] = draw(logits.index({0, torch::indexing::Slice(), r, c}), opts, rng);
  }
  return out;
}

torch::Tensor sample_grid(const AutoregressivePrior& prior, int64_t h, int64_t w, const SampleOptions& opts) {
  if (h <= 0 || w <= 0) throw InvalidArgument("sample: grid dimensions must be positive");
  auto empty = torch::zeros({h, w}, torch::kLong);
  return conditional_fill(prior, empty, torch::zeros({h, w}, torch::kBool), opts);
}

bool causality_check(const AutoregressivePrior& prior, const torch::Tensor& grid, int64_t position,
                     int trials, double tol, uint64_t seed) {
  detail::require_rank(grid, 2, "causality_check");
  const int64_t h = grid.size(0), w = grid.size(1), K = prior->options.K;
  if (position < 0 || position >= h * w) throw InvalidArgument("causality_check: position out of range");
  torch::NoGradGuard no_grad;
  const int64_t r = position / w, c = position % w;
  auto base = prior.ptr()->forward(grid.unsqueeze(0)).index({0, torch::indexing::Slice(), r, c});
  if (position == h * w - 1 || K == 1) return true;

  std::mt19937_64 rng(seed ^ static_cast<uint64_t>(position));
  std::uniform_int_distribution<int64_t> shift(1, K - 1);
  for (int trial = 0; trial < trials; ++trial) {
    auto perturbed = grid.clone().contiguous();
    auto* p = perturbed.data_ptr<int64_t>();
    for (int64_t q = position + 1; q < h * w; ++q) p[q] = (p[q] + shift(rng)) % K;
    auto logits = prior.ptr()->forward(perturbed.unsqueeze(0)).index({0, torch::indexing::Slice(), r, c});
    if ((logits - base).abs().max().item<double>() > tol) return false;
  }
  return true;
}

}  // namespace fewgan
