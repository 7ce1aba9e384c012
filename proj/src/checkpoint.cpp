#include "fewgan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fewgan/errors.hpp"

namespace fewgan {
namespace {

constexpr char kMagic[8] = {'F', 'E', 'W', 'G', 'A', 'N', 'C', 'K'};

struct Fnv1a {
  uint64_t state = 14695981039346656037ull;
  void update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 1099511628211ull;
    }
  }
};

void hash_tensor(Fnv1a& h, const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU).contiguous();
  h.update(c.data_ptr(), c.numel() * c.element_size());
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    append(&v, sizeof(T));
  }
  void put_bytes(const void* p, size_t n) { append(p, n); }
  void put_string(const std::string& s) {
    put<uint32_t>(static_cast<uint32_t>(s.size()));
    append(s.data(), s.size());
  }
  std::string& data() { return buf_; }

 private:
  void append(const void* p, size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

class Reader {
 public:
  Reader(const char* data, size_t size, std::string context)
      : p_(data), end_(data + size), context_(std::move(context)) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(size_t n) {
    if (static_cast<size_t>(end_ - p_) < n) throw CorruptCheckpoint(context_ + ": truncated data");
    const char* at = p_;
    p_ += n;
    return at;
  }
  std::string get_string() {
    const auto n = get<uint32_t>();
    return std::string(take(n), n);
  }
  bool done() const { return p_ == end_; }

 private:
  const char* p_;
  const char* end_;
  std::string context_;
};

uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat: return 0;
    case torch::kDouble: return 1;
    case torch::kLong: return 2;
    default: throw InvalidArgument("checkpoint: unsupported tensor dtype");
  }
}

torch::ScalarType dtype_from_code(uint8_t c) {
  switch (c) {
    case 0: return torch::kFloat;
    case 1: return torch::kDouble;
    case 2: return torch::kLong;
    default: throw CorruptCheckpoint("checkpoint: unknown tensor dtype code");
  }
}

std::vector<std::pair<std::string, torch::Tensor>> named_state(const torch::nn::Module& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : m.named_parameters()) out.emplace_back(p.key(), p.value());
  for (const auto& b : m.named_buffers()) out.emplace_back(b.key(), b.value());
  return out;
}

std::string encode_state(const torch::nn::Module& m) {
  Writer w;
  const auto state = named_state(m);
  w.put<uint32_t>(static_cast<uint32_t>(state.size()));
  for (const auto& [name, tensor] : state) {
    auto t = tensor.detach().to(torch::kCPU).contiguous();
    w.put_string(name);
    w.put<uint8_t>(dtype_code(t.scalar_type()));
    w.put<uint32_t>(static_cast<uint32_t>(t.dim()));
    for (auto d : t.sizes()) w.put<int64_t>(d);
    const auto nbytes = static_cast<uint64_t>(t.numel() * t.element_size());
    w.put<uint64_t>(nbytes);
    w.put_bytes(t.data_ptr(), nbytes);
  }
  return std::move(w.data());
}

void decode_state(torch::nn::Module& m, const std::string& payload, const std::string& what) {
  Reader r(payload.data(), payload.size(), what);
  std::map<std::string, torch::Tensor> targets;
  for (auto& [name, t] : named_state(m)) targets.emplace(name, t);

  const auto count = r.get<uint32_t>();
  if (count != targets.size()) throw CorruptCheckpoint(what + ": tensor count does not match the model");
  torch::NoGradGuard no_grad;
  for (uint32_t i = 0; i < count; ++i) {
    const auto name = r.get_string();
    const auto dtype = dtype_from_code(r.get<uint8_t>());
    const auto ndim = r.get<uint32_t>();
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) d = r.get<int64_t>();
    const auto nbytes = r.get<uint64_t>();
    const char* bytes = r.take(nbytes);

    auto it = targets.find(name);
    if (it == targets.end()) throw CorruptCheckpoint(what + ": unexpected tensor '" + name + "'");
    auto& target = it->second;
    if (target.sizes() != torch::IntArrayRef(dims) || target.scalar_type() != dtype ||
        static_cast<uint64_t>(target.numel() * target.element_size()) != nbytes) {
      throw CorruptCheckpoint(what + ": tensor '" + name + "' has an incompatible shape or type");
    }
    auto src = torch::from_blob(const_cast<char*>(bytes), dims, dtype);
    target.copy_(src);
  }
  if (!r.done()) throw CorruptCheckpoint(what + ": trailing bytes");
}

std::string encode_specs(const PyramidModelImpl& m) {
  std::ostringstream os;
  for (const auto& s : m.specs) os << s.t << ' ' << s.height << ' ' << s.width << '\n';
  return os.str();
}

std::vector<ScaleSpec> decode_specs(const std::string& text) {
  std::istringstream is(text);
  std::vector<ScaleSpec> specs;
  ScaleSpec s;
  while (is >> s.t >> s.height >> s.width) specs.push_back(s);
  if (specs.empty()) throw CorruptCheckpoint("checkpoint: empty scale table");
  return specs;
}

std::string encode_status(const PyramidModelImpl& m) {
  std::string s;
  for (bool done : m.trained) s += done ? '1' : '0';
  return s;
}

}  // namespace

ModelOptions model_options(const TrainConfig& cfg) {
  ModelOptions o;
  o.K = cfg.K;
  o.n_z = cfg.n_z;
  o.lambda_pos = cfg.lambda_pos;
  o.channels = cfg.channels;
  o.encoder_channels = cfg.encoder_channels;
  return o;
}

PriorOptions prior_options(const TrainConfig& cfg) {
  PriorOptions o;
  o.K = cfg.K;
  o.embed = cfg.prior_embed;
  o.channels = cfg.prior_channels;
  o.layers = cfg.prior_layers;
  return o;
}

uint64_t parameter_hash(const torch::nn::Module& module) {
  Fnv1a h;
  for (const auto& [name, t] : named_state(module)) {
    h.update(name.data(), name.size());
    hash_tensor(h, t);
  }
  return h.state;
}

uint64_t parameter_hash(const std::vector<torch::Tensor>& tensors) {
  Fnv1a h;
  for (const auto& t : tensors) hash_tensor(h, t);
  return h.state;
}

uint64_t codebook_tag(const CodebookImpl& codebook) {
  Fnv1a h;
  const int64_t dims[3] = {codebook.K, codebook.n_z, codebook.lambda_pos};
  h.update(dims, sizeof(dims));
  hash_tensor(h, codebook.entries);
  return h.state;
}

bool all_finite(const torch::nn::Module& module) {
  for (const auto& p : module.parameters()) {
    if (!torch::isfinite(p.detach()).all().item<bool>()) return false;
  }
  return true;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (!ckpt.model) throw InvalidArgument("save_checkpoint: no model");
  if (!all_finite(*ckpt.model) || (ckpt.prior && !all_finite(*ckpt.prior))) {
    throw InvalidState("save_checkpoint: refusing to write non-finite parameters");
  }

  std::vector<std::pair<std::string, std::string>> sections = {
      {"config", ckpt.config.to_text()},
      {"specs", encode_specs(*ckpt.model)},
      {"status", encode_status(*ckpt.model)},
      {"model", encode_state(*ckpt.model)},
  };
  if (ckpt.prior) {
    sections.emplace_back("prior", encode_state(*ckpt.prior));
    Writer tag;
    tag.put<uint64_t>(ckpt.prior_codebook_tag);
    sections.emplace_back("prior_tag", std::move(tag.data()));
  }

  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<uint32_t>(kCheckpointVersion);
  w.put<uint32_t>(static_cast<uint32_t>(sections.size()));
  for (const auto& [name, payload] : sections) {
    w.put_string(name);
    w.put<uint64_t>(payload.size());
    w.put_bytes(payload.data(), payload.size());
  }
  Fnv1a digest;
  digest.update(w.data().data(), w.data().size());
  w.put<uint64_t>(digest.state);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string ctx = "checkpoint " + path.string();

  Reader header(bytes.data(), bytes.size(), ctx);
  if (std::memcmp(header.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw CorruptCheckpoint(ctx + ": bad magic bytes");
  }
  const auto version = header.get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw UnsupportedVersion(ctx + ": unsupported format version " + std::to_string(version) +
                             " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < sizeof(kMagic) + 2 * sizeof(uint32_t) + sizeof(uint64_t)) {
    throw CorruptCheckpoint(ctx + ": truncated data");
  }
  const size_t body = bytes.size() - sizeof(uint64_t);
  uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  Fnv1a digest;
  digest.update(bytes.data(), body);
  if (digest.state != stored) throw CorruptCheckpoint(ctx + ": checksum mismatch (truncated or damaged)");

  Reader r(bytes.data() + sizeof(kMagic) + sizeof(uint32_t), body - sizeof(kMagic) - sizeof(uint32_t), ctx);
  const auto count = r.get<uint32_t>();
  std::map<std::string, std::string> sections;
  for (uint32_t i = 0; i < count; ++i) {
    auto name = r.get_string();
    const auto n = r.get<uint64_t>();
    sections[name] = std::string(r.take(n), n);
  }
  for (const char* required : {"config", "specs", "status", "model"}) {
    if (!sections.count(required)) throw CorruptCheckpoint(ctx + ": missing section '" + required + "'");
  }

  Checkpoint ckpt;
  ckpt.config = TrainConfig::from_text(sections["config"]);
  ckpt.model = PyramidModel(model_options(ckpt.config), decode_specs(sections["specs"]));
  const auto& status = sections["status"];
  if (status.size() != ckpt.model->specs.size()) throw CorruptCheckpoint(ctx + ": status table size");
  for (size_t t = 0; t < status.size(); ++t) ckpt.model->mark_trained(static_cast<int>(t), status[t] == '1');
  decode_state(*ckpt.model, sections["model"], ctx + " [model]");

  if (sections.count("prior")) {
    if (!sections.count("prior_tag")) throw CorruptCheckpoint(ctx + ": prior without codebook tag");
    Reader tag(sections["prior_tag"].data(), sections["prior_tag"].size(), ctx);
    ckpt.prior_codebook_tag = tag.get<uint64_t>();
    const auto current = codebook_tag(*ckpt.model->codebook);
    if (ckpt.prior_codebook_tag != current) {
      throw CodebookMismatch(ctx + ": prior was trained against a different codebook");
    }
    ckpt.prior = AutoregressivePrior(prior_options(ckpt.config));
    decode_state(*ckpt.prior, sections["prior"], ctx + " [prior]");
  }
  return ckpt;
}

}  // namespace fewgan
