#include "fewgan/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "fewgan/checkpoint.hpp"
#include "fewgan/errors.hpp"
#include "fewgan/losses.hpp"
#include "fewgan/quantizer.hpp"

namespace fewgan {
namespace {

uint64_t scale_seed(const TrainConfig& cfg, int t) {
  return cfg.seed * 1000003ull + static_cast<uint64_t>(t) * 7919ull + 1ull;
}

torch::optim::Adam make_adam(std::vector<torch::Tensor> params, double lr, const TrainConfig& cfg) {
  return torch::optim::Adam(std::move(params),
                            torch::optim::AdamOptions(lr).betas({cfg.adam_beta1, cfg.adam_beta2}));
}

void scale_lr(torch::optim::Adam& opt, double factor) {
  for (auto& group : opt.param_groups()) {
    auto& o = static_cast<torch::optim::AdamOptions&>(group.options());
    o.lr(o.lr() * factor);
  }
}

double current_lr(torch::optim::Adam& opt) {
  return static_cast<torch::optim::AdamOptions&>(opt.param_groups().front().options()).lr();
}

double checked(const torch::Tensor& loss, int scale, int64_t step, const char* what) {
  const double v = loss.item<double>();
  if (!std::isfinite(v)) throw TrainingDivergence(scale, step, std::string(what) + " is not finite");
  return v;
}

void feed(const TrainHooks& hooks, int scale, CriticFeed::Role role, CriticFeed::Source source,
          int64_t count) {
  if (hooks.on_critic_input) hooks.on_critic_input({scale, role, source, count});
}

class RunLog {
 public:
  explicit RunLog(const std::string& path) {
    if (path.empty()) return;
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw IoError("cannot open run log " + path);
    if (fresh) out_ << run_log_header() << '\n';
  }
  void write(const StepRecord& r) {
    if (out_.is_open()) out_ << run_log_line(r) << '\n';
  }

 private:
  std::ofstream out_;
};

// Shared step bookkeeping for both kinds of scale.
struct ScaleLoop {
  const TrainConfig& cfg;
  int scale;
  torch::optim::Adam opt_g;
  torch::optim::Adam opt_d;
  int64_t decay_step;
  RunLog log;
  std::vector<StepRecord> records;

  ScaleLoop(const TrainConfig& c, int t, std::vector<torch::Tensor> g, std::vector<torch::Tensor> d)
      : cfg(c),
        scale(t),
        opt_g(make_adam(std::move(g), c.lr_g, c)),
        opt_d(make_adam(std::move(d), c.lr_d, c)),
        decay_step(static_cast<int64_t>(std::floor(c.lr_decay_at * static_cast<double>(c.steps_per_scale)))),
        log(c.run_log) {}

  void begin_step(int64_t step) {
    if (step == decay_step && step > 0) {
      scale_lr(opt_g, 0.5);
      scale_lr(opt_d, 0.5);
    }
  }

  void finish_step(StepRecord r, const TrainHooks& hooks) {
    r.lr_g = current_lr(opt_g);
    log.write(r);
    if (hooks.on_step) hooks.on_step(r);
    records.push_back(r);
  }
};

}  // namespace

TrainData prepare_data(const TrainConfig& cfg, const std::vector<torch::Tensor>& train_images,
                       const std::vector<torch::Tensor>& side_images) {
  cfg.validate();
  if (train_images.size() < 2) {
    throw InvalidArgument("need at least 2 training images, got " + std::to_string(train_images.size()));
  }
  if (side_images.empty()) throw InvalidArgument("need at least 1 side image");

  const int64_t H = cfg.image_height > 0 ? cfg.image_height : train_images.front().size(1);
  const int64_t W = cfg.image_width > 0 ? cfg.image_width : train_images.front().size(2);
  auto train = stack_resized(train_images, H, W);
  auto side = stack_resized(side_images, H, W);

  TrainData data;
  data.train = build_pyramid(train, cfg.scale_factor, cfg.min_size, cfg.T);
  data.side = build_pyramid(side, cfg.scale_factor, cfg.min_size, cfg.T);
  return data;
}

PyramidModel build_model(const TrainConfig& cfg, const TrainData& data) {
  std::vector<ScaleSpec> specs;
  for (const auto& level : data.train.levels) {
    ScaleSpec s;
    s.height = level.size(2);
    s.width = level.size(3);
    specs.push_back(s);
  }
  torch::manual_seed(cfg.seed);
  return PyramidModel(model_options(cfg), std::move(specs));
}

std::vector<StepRecord> train_scale0(const TrainConfig& cfg, PyramidModel& model, const TrainData& data,
                                     const TrainHooks& hooks) {
  cfg.validate();
  if (data.num_train() < 2) throw InvalidArgument("train_scale0: need at least 2 training images");
  if (data.num_side() < 1) throw InvalidArgument("train_scale0: need at least 1 side image");

  torch::manual_seed(scale_seed(cfg, 0));
  std::mt19937_64 side_rng(scale_seed(cfg, 0));
  std::uniform_int_distribution<int64_t> pick(0, data.num_side() - 1);

  const auto& x = data.train.levels.front();
  const auto& side = data.side.levels.front();
  const int64_t N = x.size(0);
  Critic critic = [&model](const torch::Tensor& in) { return model->discriminate(in, 0); };

  auto codebook_params = model->codebook->parameters();
  std::vector<torch::Tensor> net_params;
  for (const auto& p : model->generator_parameters(0)) {
    if (!p.is_same(codebook_params.front())) net_params.push_back(p);
  }
  ScaleLoop loop(cfg, 0, net_params, model->critic_parameters(0));
  loop.opt_g.add_param_group(torch::optim::OptimizerParamGroup(
      codebook_params, std::make_unique<torch::optim::AdamOptions>(
                           torch::optim::AdamOptions(cfg.lr_codebook).betas({cfg.adam_beta1, cfg.adam_beta2}))));
  for (int64_t step = 0; step < cfg.steps_per_scale; ++step) {
    loop.begin_step(step);
    StepRecord rec;
    rec.scale = 0;
    rec.step = step;

    const auto s = side.narrow(0, pick(side_rng), 1);

    torch::Tensor fake, side_fake;
    {
      torch::NoGradGuard no_grad;
      fake = model->scale0_forward(x).image;
      if (cfg.side_as_fake) side_fake = model->scale0_forward(s).image;
    }
    for (int64_t k = 0; k < cfg.critic_steps; ++k) {
      feed(hooks, 0, CriticFeed::Role::Real, CriticFeed::Source::Training, N);
      feed(hooks, 0, CriticFeed::Role::Fake, CriticFeed::Source::Training, N);
      auto d = adv_critic_loss(critic, x, fake, cfg.lambda_gp);
      auto total = d.total;
      if (cfg.side_as_fake) {
        feed(hooks, 0, CriticFeed::Role::Fake, CriticFeed::Source::Side, 1);
        total = total + critic(side_fake).mean();
      }
      rec.critic_loss = checked(total, 0, step, "critic loss");
      rec.wasserstein = d.wasserstein.item<double>();
      rec.penalty = d.penalty.item<double>();
      loop.opt_d.zero_grad();
      total.backward();
      loop.opt_d.step();
    }

    FreezeGuard frozen(model->critic_parameters(0));
    auto out = model->scale0_forward(x);
    auto out_s = model->scale0_forward(s);

    Scale0Terms terms;
    terms.adv = adv_generator_loss(critic, out.image);
    terms.vq = vq_loss(x, out.image, out.z_e, out.z_q, cfg.beta);
    terms.adv_ref = adv_ref_loss(critic, out_s.image);
    terms.ssim = ssim_loss(s, out_s.image);
    auto cont_x = continuity_loss(out.content);
    auto cont_s = continuity_loss(out_s.content);
    if (cfg.continuity_reduction == ContinuityReduction::Mean) {
      cont_x = cont_x / static_cast<double>(continuity_terms(out.content));
      cont_s = cont_s / static_cast<double>(continuity_terms(out_s.content));
    }
    terms.continuity = cont_x + cont_s;

    auto loss = scale_0_loss(terms, cfg.weights);
    rec.gen_loss = checked(loss, 0, step, "generator loss");
    rec.adv = terms.adv.item<double>();
    rec.vq = terms.vq.item<double>();
    rec.adv_ref = terms.adv_ref.item<double>();
    rec.ssim = terms.ssim.item<double>();
    rec.cont = terms.continuity.item<double>();
    rec.rec = reconstruction_loss(x, out.image).item<double>();
    loop.opt_g.zero_grad();
    loss.backward();
    loop.opt_g.step();
    loop.finish_step(rec, hooks);
  }
  return std::move(loop.records);
}

std::vector<StepRecord> train_scale_t(const TrainConfig& cfg, int t, PyramidModel& model,
                                      const TrainData& data, const TrainHooks& hooks) {
  cfg.validate();
  if (t < 1 || t > model->T()) throw InvalidArgument("train_scale_t: scale " + std::to_string(t) + " out of range");
  for (int below = 0; below < t; ++below) {
    if (!model->is_trained(below)) {
      throw InvalidState("train_scale_t: scale " + std::to_string(below) + " has not been trained");
    }
  }

  torch::manual_seed(scale_seed(cfg, t));
  std::mt19937_64 side_rng(scale_seed(cfg, t));
  std::uniform_int_distribution<int64_t> pick(0, data.num_side() - 1);

  const auto& x_t = data.train.levels[static_cast<size_t>(t)];
  const auto& s_t = data.side.levels[static_cast<size_t>(t)];
  const int64_t N = x_t.size(0);

  // Outputs of the frozen chain at scale t - 1, conditioned on each image.
  torch::Tensor prev_train, prev_side;
  {
    torch::NoGradGuard no_grad;
    prev_train = model->refine(model->scale0_forward(data.train.levels.front()).image, t - 1);
    prev_side = model->refine(model->scale0_forward(data.side.levels.front()).image, t - 1);
  }
  Critic critic = [&model, t](const torch::Tensor& in) { return model->discriminate(in, t); };

  ScaleLoop loop(cfg, t, model->generator_parameters(t), model->critic_parameters(t));
  for (int64_t step = 0; step < cfg.steps_per_scale; ++step) {
    loop.begin_step(step);
    StepRecord rec;
    rec.scale = t;
    rec.step = step;

    const auto idx = pick(side_rng);
    const auto s = s_t.narrow(0, idx, 1);
    const auto s_prev = prev_side.narrow(0, idx, 1);

    torch::Tensor fake, side_fake;
    {
      torch::NoGradGuard no_grad;
      fake = model->residual_forward(prev_train, t);
      if (cfg.side_as_fake) side_fake = model->residual_forward(s_prev, t);
    }
    for (int64_t k = 0; k < cfg.critic_steps; ++k) {
      feed(hooks, t, CriticFeed::Role::Real, CriticFeed::Source::Training, N);
      feed(hooks, t, CriticFeed::Role::Fake, CriticFeed::Source::Training, N);
      auto d = adv_critic_loss(critic, x_t, fake, cfg.lambda_gp);
      auto total = d.total;
      if (cfg.side_as_fake) {
        feed(hooks, t, CriticFeed::Role::Fake, CriticFeed::Source::Side, 1);
        total = total + critic(side_fake).mean();
      }
      rec.critic_loss = checked(total, t, step, "critic loss");
      rec.wasserstein = d.wasserstein.item<double>();
      rec.penalty = d.penalty.item<double>();
      loop.opt_d.zero_grad();
      total.backward();
      loop.opt_d.step();
    }

    FreezeGuard frozen(model->critic_parameters(t));
    auto x_hat = model->residual_forward(prev_train, t);
    auto s_hat = model->residual_forward(s_prev, t);

    ScaleTTerms terms;
    terms.adv = adv_generator_loss(critic, x_hat);
    terms.adv_ref = adv_ref_loss(critic, s_hat);
    terms.ssim = ssim_loss(s, s_hat);
    terms.rec = reconstruction_loss(x_t, x_hat);

    auto loss = scale_t_loss(terms, cfg.weights);
    rec.gen_loss = checked(loss, t, step, "generator loss");
    rec.adv = terms.adv.item<double>();
    rec.adv_ref = terms.adv_ref.item<double>();
    rec.ssim = terms.ssim.item<double>();
    rec.rec = terms.rec.item<double>();
    loop.opt_g.zero_grad();
    loss.backward();
    loop.opt_g.step();
    loop.finish_step(rec, hooks);
  }
  return std::move(loop.records);
}

PyramidModel train_all(const TrainConfig& cfg, const TrainData& data, const TrainHooks& hooks,
                       PyramidModel resume) {
  cfg.validate();
  if (cfg.threads > 0) torch::set_num_threads(cfg.threads);
  PyramidModel model = resume ? resume : build_model(cfg, data);
  if (model->T() != data.train.T()) {
    throw InvalidArgument("train_all: model has " + std::to_string(model->T() + 1) + " scales but data has " +
                          std::to_string(data.train.T() + 1));
  }
  for (int t = model->trained_scales(); t <= model->T(); ++t) {
    if (t == 0) {
      train_scale0(cfg, model, data, hooks);
    } else {
      train_scale_t(cfg, t, model, data, hooks);
    }
    if (!all_finite(*model)) {
      throw TrainingDivergence(t, cfg.steps_per_scale, "non-finite parameters after training");
    }
    model->mark_trained(t);
    if (hooks.on_scale_done) hooks.on_scale_done(model, t);
  }
  return model;
}

std::string run_log_header() {
  return "scale\tstep\tlr_g\tcritic_loss\twasserstein\tpenalty\tgen_loss\tadv\tadv_ref\tssim\trec\tvq\tcont";
}

std::string run_log_line(const StepRecord& r) {
  std::ostringstream os;
  os << std::setprecision(9) << r.scale << '\t' << r.step << '\t' << r.lr_g << '\t' << r.critic_loss << '\t'
     << r.wasserstein << '\t' << r.penalty << '\t' << r.gen_loss << '\t' << r.adv << '\t' << r.adv_ref << '\t'
     << r.ssim << '\t' << r.rec << '\t' << r.vq << '\t' << r.cont;
  return os.str();
}

}  // namespace fewgan
