#include "fewgan/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <vector>

#include "fewgan/errors.hpp"

namespace fewgan {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw InvalidArgument("config key '" + std::string(key) + "': cannot parse '" +
                          std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no") return false;
  throw InvalidArgument("config key '" + std::string(key) + "': expected a boolean, got '" +
                        std::string(text) + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Field {
  std::string key;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number_field(std::string key, T TrainConfig::*member) {
  return {key,
          [key, member](TrainConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

Field weight_field(std::string key, double LossWeights::*member) {
  return {key,
          [key, member](TrainConfig& c, std::string_view v) {
            c.weights.*member = parse_number<double>(key, v);
          },
          [member](const TrainConfig& c) { return format_double(c.weights.*member); }};
}

Field string_field(std::string key, std::string TrainConfig::*member) {
  return {key, [member](TrainConfig& c, std::string_view v) { c.*member = std::string(v); },
          [member](const TrainConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number_field("T", &TrainConfig::T),
      number_field("scale_factor", &TrainConfig::scale_factor),
      number_field("min_size", &TrainConfig::min_size),
      number_field("image_height", &TrainConfig::image_height),
      number_field("image_width", &TrainConfig::image_width),
      number_field("K", &TrainConfig::K),
      number_field("n_z", &TrainConfig::n_z),
      number_field("lambda_pos", &TrainConfig::lambda_pos),
      number_field("beta", &TrainConfig::beta),
      number_field("channels", &TrainConfig::channels),
      number_field("encoder_channels", &TrainConfig::encoder_channels),
      number_field("lambda_gp", &TrainConfig::lambda_gp),
      weight_field("w_adv", &LossWeights::adv),
      weight_field("w_adv_ref", &LossWeights::adv_ref),
      weight_field("w_ssim", &LossWeights::ssim),
      weight_field("w_rec", &LossWeights::rec),
      weight_field("w_vq", &LossWeights::vq),
      weight_field("w_cont", &LossWeights::cont),
      {"continuity_reduction",
       [](TrainConfig& c, std::string_view v) {
         if (v == "sum") {
           c.continuity_reduction = ContinuityReduction::Sum;
         } else if (v == "mean") {
           c.continuity_reduction = ContinuityReduction::Mean;
         } else {
           throw InvalidArgument("config key 'continuity_reduction': expected sum or mean");
         }
       },
       [](const TrainConfig& c) {
         return std::string(c.continuity_reduction == ContinuityReduction::Sum ? "sum" : "mean");
       }},
      {"side_as_fake",
       [](TrainConfig& c, std::string_view v) { c.side_as_fake = parse_bool("side_as_fake", v); },
       [](const TrainConfig& c) { return std::string(c.side_as_fake ? "true" : "false"); }},
      number_field("steps_per_scale", &TrainConfig::steps_per_scale),
      number_field("critic_steps", &TrainConfig::critic_steps),
      number_field("lr_g", &TrainConfig::lr_g),
      number_field("lr_d", &TrainConfig::lr_d),
      number_field("lr_codebook", &TrainConfig::lr_codebook),
      number_field("lr_decay_at", &TrainConfig::lr_decay_at),
      number_field("adam_beta1", &TrainConfig::adam_beta1),
      number_field("adam_beta2", &TrainConfig::adam_beta2),
      number_field("prior_embed", &TrainConfig::prior_embed),
      number_field("prior_channels", &TrainConfig::prior_channels),
      number_field("prior_layers", &TrainConfig::prior_layers),
      number_field("prior_epochs", &TrainConfig::prior_epochs),
      number_field("prior_lr", &TrainConfig::prior_lr),
      number_field("seed", &TrainConfig::seed),
      number_field("threads", &TrainConfig::threads),
      string_field("side_dataset_path", &TrainConfig::side_dataset_path),
      string_field("run_log", &TrainConfig::run_log),
  };
  return table;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument("invalid config: " + message);
}

}  // namespace

bool operator==(const LossWeights& a, const LossWeights& b) {
  return a.adv == b.adv && a.adv_ref == b.adv_ref && a.ssim == b.ssim && a.rec == b.rec &&
         a.vq == b.vq && a.cont == b.cont;
}

void LossWeights::validate() const {
  for (double w : {adv, adv_ref, ssim, rec, vq, cont}) {
    require(std::isfinite(w) && w >= 0.0, "loss weights must be finite and non-negative");
  }
}

void TrainConfig::validate() const {
  require(T >= -1, "T must be >= 0 (or -1 for automatic)");
  require(scale_factor > 0.0 && scale_factor < 1.0, "scale_factor must lie in (0, 1)");
  require(min_size >= 8, "min_size must be >= 8");
  require(image_height >= 0 && image_width >= 0, "image size must be non-negative");
  require(K >= 1, "K must be positive");
  require(n_z >= 1, "n_z must be positive");
  require(lambda_pos >= 1, "lambda_pos must be positive");
  require(beta >= 0.0, "beta must be non-negative");
  require(channels >= 1 && encoder_channels >= 1, "channel counts must be positive");
  require(lambda_gp >= 0.0, "lambda_gp must be non-negative");
  weights.validate();
  require(steps_per_scale >= 0, "steps_per_scale must be non-negative");
  require(critic_steps >= 1, "critic_steps must be positive");
  require(lr_g > 0.0 && lr_d > 0.0 && lr_codebook > 0.0 && prior_lr > 0.0, "learning rates must be positive");
  require(lr_decay_at > 0.0 && lr_decay_at <= 1.0, "lr_decay_at must lie in (0, 1]");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "adam betas must lie in [0, 1)");
  require(prior_embed >= 1 && prior_channels >= 1 && prior_layers >= 1,
          "prior sizes must be positive");
  require(prior_epochs >= 0, "prior_epochs must be non-negative");
  require(threads >= 0, "threads must be non-negative");
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw InvalidArgument("unknown config key '" + std::string(key) + "'");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += '=';
    out += f.get(*this);
    out += '\n';
  }
  return out;
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  TrainConfig cfg;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key=value");
    }
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

}  // namespace fewgan
