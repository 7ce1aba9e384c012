#include "testing.hpp"

#include <fstream>
#include <sstream>

#include "fewgan/checkpoint.hpp"
#include "fewgan/errors.hpp"
#include "fewgan/trainer.hpp"
#include "tiny.hpp"

using namespace fewgan;

namespace {

struct Interrupted {};

std::vector<uint64_t> per_scale_hashes(const PyramidModel& m) {
  std::vector<uint64_t> out;
  for (int t = 0; t <= m->T(); ++t) out.push_back(parameter_hash(m->scale_parameters(t)));
  return out;
}

}  // namespace

TEST_CASE("data preparation checks counts and builds matching pyramids") {
  auto cfg = tiny_config();
  auto data = tiny_data(cfg);
  CHECK(data.train.T() == 2);
  CHECK(data.side.T() == 2);
  CHECK(data.num_train() == 3);
  CHECK(data.num_side() == 4);
  CHECK(data.train.levels[0].sizes() == torch::IntArrayRef({3, 3, 18, 18}));
  CHECK(data.side.levels[1].sizes() == torch::IntArrayRef({4, 3, 24, 24}));
  CHECK_THROWS_AS(prepare_data(cfg, synthetic_set(1, 1, 32, 32), synthetic_set(5, 2, 32, 32)), InvalidArgument);
  CHECK_THROWS_AS(prepare_data(cfg, synthetic_set(1, 2, 32, 32), {}), InvalidArgument);

  // without an explicit size the first training image sets it
  cfg.image_height = cfg.image_width = 0;
  cfg.T = -1;
  auto auto_sized = prepare_data(cfg, {synthetic_image(1, 40, 36), synthetic_image(2, 30, 30)}, synthetic_set(3, 1, 20, 20));
  CHECK(auto_sized.train.levels.back().sizes() == torch::IntArrayRef({2, 3, 40, 36}));
  CHECK(auto_sized.side.levels.back().sizes() == torch::IntArrayRef({1, 3, 40, 36}));
}

TEST_CASE("zero steps leave every parameter unchanged") {
  auto cfg = tiny_config(2, 0);
  auto data = tiny_data(cfg);
  auto model = build_model(cfg, data);
  const auto before = parameter_hash(*model);
  train_scale0(cfg, model, data);
  CHECK(parameter_hash(*model) == before);
  model->mark_trained(0);
  train_scale_t(cfg, 1, model, data);
  CHECK(parameter_hash(*model) == before);
}

TEST_CASE("training changes only the current scale") {
  auto cfg = tiny_config(2, 4);
  auto data = tiny_data(cfg);
  auto model = build_model(cfg, data);
  auto initial = per_scale_hashes(model);

  train_scale0(cfg, model, data);
  auto after0 = per_scale_hashes(model);
  CHECK(after0[0] != initial[0]);
  CHECK(after0[1] == initial[1]);
  CHECK(after0[2] == initial[2]);
  model->mark_trained(0);

  // every step at scale 1 leaves scale 0 bit-identical
  TrainHooks hooks;
  int steps = 0;
  hooks.on_step = [&](const StepRecord& r) {
    CHECK(r.scale == 1);
    CHECK(parameter_hash(model->scale_parameters(0)) == after0[0]);
    ++steps;
  };
  train_scale_t(cfg, 1, model, data, hooks);
  CHECK(steps == 4);
  auto after1 = per_scale_hashes(model);
  CHECK(after1[0] == after0[0]);
  CHECK(after1[1] != after0[1]);
  CHECK(after1[2] == after0[2]);
  CHECK_THROWS_AS(train_scale_t(cfg, 3, model, data), InvalidArgument);
}

TEST_CASE("scales must be trained in order") {
  auto cfg = tiny_config(2, 1);
  auto data = tiny_data(cfg);
  auto model = build_model(cfg, data);
  CHECK_THROWS_AS(train_scale_t(cfg, 1, model, data), InvalidState);
}

TEST_CASE("critics never see side images as real") {
  for (bool side_as_fake : {false, true}) {
    auto cfg = tiny_config(1, 3);
    cfg.side_as_fake = side_as_fake;
    auto data = tiny_data(cfg);
    std::vector<CriticFeed> log;
    TrainHooks hooks;
    hooks.on_critic_input = [&](const CriticFeed& f) { log.push_back(f); };
    train_all(cfg, data, hooks);

    int real_training = 0, fake_side = 0;
    for (const auto& f : log) {
      CHECK_FALSE((f.role == CriticFeed::Role::Real && f.source == CriticFeed::Source::Side));
      real_training += f.role == CriticFeed::Role::Real;
      fake_side += f.source == CriticFeed::Source::Side;
      if (f.role == CriticFeed::Role::Real) CHECK(f.count == 3);
    }
    CHECK(real_training == 2 * 3);
    CHECK((fake_side > 0) == side_as_fake);
  }
}

TEST_CASE("fixed seeds give identical parameters") {
  auto cfg = tiny_config(1, 3);
  auto data = tiny_data(cfg);
  auto a = train_all(cfg, data);
  auto b = train_all(cfg, data);
  CHECK(parameter_hash(*a) == parameter_hash(*b));
  cfg.seed = 43;
  CHECK(parameter_hash(*train_all(cfg, data)) != parameter_hash(*a));
}

TEST_CASE("a single-scale pyramid trains only scale 0") {
  auto cfg = tiny_config(0, 2);
  auto data = tiny_data(cfg);
  std::vector<int> done;
  TrainHooks hooks;
  hooks.on_scale_done = [&](const PyramidModel& m, int t) {
    CHECK(m->is_trained(t));
    done.push_back(t);
  };
  auto model = train_all(cfg, data, hooks);
  CHECK(model->T() == 0);
  CHECK(done == std::vector<int>{0});
}

TEST_CASE("resuming after an interruption matches an uninterrupted run") {
  auto dir = scratch_dir("resume");
  auto cfg = tiny_config(2, 3);
  auto data = tiny_data(cfg);
  auto full = train_all(cfg, data);

  TrainHooks hooks;
  hooks.on_scale_done = [&](const PyramidModel& m, int t) {
    Checkpoint c;
    c.config = cfg;
    c.model = m;
    save_checkpoint(c, dir / ("scale" + std::to_string(t) + ".ckpt"));
    if (t == 1) throw Interrupted{};
  };
  CHECK_THROWS_AS(train_all(cfg, data, hooks), Interrupted);

  // every written checkpoint loads with the right shapes and status
  for (int t = 0; t <= 1; ++t) {
    auto c = load_checkpoint(dir / ("scale" + std::to_string(t) + ".ckpt"));
    CHECK(c.model->trained_scales() == t + 1);
    for (int s = 0; s <= 2; ++s) CHECK(c.model->spec(s).height == data.train.levels[static_cast<size_t>(s)].size(2));
  }

  auto partial = load_checkpoint(dir / "scale1.ckpt");
  auto resumed = train_all(cfg, data, {}, partial.model);
  CHECK(resumed->trained_scales() == 3);
  CHECK(parameter_hash(*resumed) == parameter_hash(*full));
}

TEST_CASE("non-finite losses stop training before anything is saved") {
  auto dir = scratch_dir("diverge");
  auto cfg = tiny_config(1, 3);
  auto images = synthetic_set(1, 3, 32, 32);
  images[1][0][5][5] = std::numeric_limits<float>::quiet_NaN();
  auto data = prepare_data(cfg, images, synthetic_set(100, 2, 32, 32));
  TrainHooks hooks;
  hooks.on_scale_done = [&](const PyramidModel& m, int) {
    Checkpoint c;
    c.config = cfg;
    c.model = m;
    save_checkpoint(c, dir / "m.ckpt");
  };
  try {
    train_all(cfg, data, hooks);
    FAIL("expected divergence");
  } catch (const TrainingDivergence& e) {
    CHECK(e.scale() == 0);
    CHECK(e.step() == 0);
  }
  CHECK_FALSE(std::filesystem::exists(dir / "m.ckpt"));
}

TEST_CASE("the run log records one line per step") {
  auto dir = scratch_dir("runlog");
  auto cfg = tiny_config(1, 3);
  cfg.run_log = (dir / "run.tsv").string();
  auto data = tiny_data(cfg);
  std::vector<StepRecord> seen;
  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord& r) { seen.push_back(r); };
  train_all(cfg, data, hooks);

  std::ifstream in(cfg.run_log);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 1 + 6);
  CHECK(lines[0] == run_log_header());
  CHECK(lines[1].rfind("0\t0\t", 0) == 0);
  CHECK(lines[4].rfind("1\t0\t", 0) == 0);
  CHECK(lines[6] == run_log_line(seen.back()));
  for (const auto& r : seen) {
    CHECK(std::isfinite(r.gen_loss));
    CHECK(std::isfinite(r.critic_loss));
  }
  CHECK(seen[0].vq > 0.0);
  CHECK(seen[3].rec > 0.0);
}

TEST_CASE("learning rate halves at the configured fraction of the steps") {
  auto cfg = tiny_config(0, 5);
  cfg.lr_decay_at = 0.6;
  auto data = tiny_data(cfg);
  auto model = build_model(cfg, data);
  auto records = train_scale0(cfg, model, data);
  REQUIRE(records.size() == 5);
  CHECK(records[2].lr_g == cfg.lr_g);
  CHECK(records[3].lr_g == cfg.lr_g / 2);
  CHECK(records[4].lr_g == cfg.lr_g / 2);
}

TEST_CASE("the codebook steps at its own learning rate") {
  auto cfg = tiny_config(0, 1);
  cfg.critic_steps = 1;
  cfg.lr_g = 1e-4;
  cfg.lr_codebook = 1e-2;
  auto data = tiny_data(cfg);
  auto model = build_model(cfg, data);
  const auto entries = model->codebook->entries.detach().clone();
  const auto enc = model->encoder->parameters().front().detach().clone();
  train_scale0(cfg, model, data);
  // Adam's first step moves every parameter with a gradient by about lr
  const double cb_step = (model->codebook->entries - entries).abs().max().item<double>();
  const double enc_step = (model->encoder->parameters().front() - enc).abs().max().item<double>();
  CHECK(cb_step == doctest::Approx(1e-2).epsilon(1e-3));
  CHECK(enc_step == doctest::Approx(1e-4).epsilon(1e-3));
}
