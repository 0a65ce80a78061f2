#include "rainsr/checkpoint.hpp"

#include <unistd.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "rainsr/error.hpp"
#include "rainsr/text_format.hpp"

namespace rainsr {

static_assert(std::numeric_limits<float>::is_iec559, "checkpoints store IEEE-754 binary32");

namespace {

constexpr char kMagic[8] = {'R', 'A', 'I', 'N', 'S', 'R', 'C', 'K'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }

  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size, const std::string& source)
      : data_(data), size_(size), source_(source) {}

  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw IoError(source_ + ": checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string source_;
};

std::string prefixed(const std::string& role, const std::string& name) { return role + "/" + name; }

void put_network(Checkpoint& c, const std::string& role, const NetworkSpec& spec, const BuiltNetwork<float>& net) {
  c.meta["spec." + role] = spec.describe();
  c.meta["seed." + role] = std::to_string(net.params.seed());
  for (const auto& e : net.params.entries()) c.tensors.push_back({prefixed(role, e.name), e.value});
}

void put_optimizer(Checkpoint& c, const std::string& role, const ParamStore<float>& params,
                   const OptimizerState<float>& opt) {
  const std::string key = "opt." + role;
  c.meta[key + ".step"] = std::to_string(opt.step);
  c.meta[key + ".lr"] = format_double(opt.settings.lr);
  c.meta[key + ".beta1"] = format_double(opt.settings.beta1);
  c.meta[key + ".beta2"] = format_double(opt.settings.beta2);
  c.meta[key + ".eps"] = format_double(opt.settings.eps);
  // Moments are stored only once the optimizer has been initialized.
  if (opt.m.empty()) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.tensors.push_back({prefixed(key + ".m", params.entry(i).name), opt.m[i]});
    c.tensors.push_back({prefixed(key + ".v", params.entry(i).name), opt.v[i]});
  }
}

void put_buffer(Checkpoint& c, const std::string& role, const ReplayBuffer& buf) {
  c.meta["buffer." + role + ".size"] = std::to_string(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    char name[24];
    std::snprintf(name, sizeof(name), "%04zu", i);
    c.tensors.push_back({prefixed("buffer." + role, name), buf.images()[i]});
  }
}

std::uint64_t meta_u64(const Checkpoint& c, const std::string& key) {
  return parse_u64(c.meta_value(key), key, 0);
}

double meta_double(const Checkpoint& c, const std::string& key) { return parse_double(c.meta_value(key), key, 0); }

void require_stage(const Checkpoint& c, const std::string& stage) {
  if (c.stage != stage) throw VersionError("expected a " + stage + " checkpoint, got stage '" + c.stage + "'");
}

void require_spec(const Checkpoint& c, const std::string& role, const NetworkSpec& expected) {
  const std::string& stored = c.meta_value("spec." + role);
  if (stored != expected.describe()) {
    throw VersionError("checkpoint network '" + role + "' is " + stored + " but the configuration expects " +
                       expected.describe());
  }
}

void load_params(const Checkpoint& c, const std::string& role, ParamStore<float>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = prefixed(role, params.entry(i).name);
    if (!c.has_tensor(name)) throw VersionError("checkpoint lacks tensor '" + name + "'");
    const Tensor<float>& t = c.tensor(name);
    if (t.shape() != params.entry(i).value.shape()) {
      throw VersionError("tensor '" + name + "' has shape " + shape_string(t.shape()) + ", expected " +
                         shape_string(params.entry(i).value.shape()));
    }
    params.mutable_value(i) = t;
  }
}

void load_optimizer(const Checkpoint& c, const std::string& role, const ParamStore<float>& params,
                    OptimizerState<float>& opt) {
  const std::string key = "opt." + role;
  opt.step = meta_u64(c, key + ".step");
  opt.settings.lr = meta_double(c, key + ".lr");
  opt.settings.beta1 = meta_double(c, key + ".beta1");
  opt.settings.beta2 = meta_double(c, key + ".beta2");
  opt.settings.eps = meta_double(c, key + ".eps");
  opt.m.clear();
  opt.v.clear();
  if (params.size() == 0 || !c.has_tensor(prefixed(key + ".m", params.entry(0).name))) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.m.push_back(c.tensor(prefixed(key + ".m", params.entry(i).name)));
    opt.v.push_back(c.tensor(prefixed(key + ".v", params.entry(i).name)));
  }
}

void load_buffer(const Checkpoint& c, const std::string& role, ReplayBuffer& buf) {
  const std::uint64_t n = meta_u64(c, "buffer." + role + ".size");
  std::vector<Tensor<float>> images;
  for (std::uint64_t i = 0; i < n; ++i) {
    char name[24];
    std::snprintf(name, sizeof(name), "%04llu", static_cast<unsigned long long>(i));
    images.push_back(c.tensor(prefixed("buffer." + role, name)));
  }
  buf.restore(std::move(images));
}

Checkpoint header(const std::string& stage, std::uint64_t step, std::uint64_t seed, const std::string& fingerprint) {
  Checkpoint c;
  c.stage = stage;
  c.step = step;
  c.seed = seed;
  c.config_fingerprint = fingerprint;
  return c;
}

}  // namespace

const Tensor<float>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw VersionError("checkpoint lacks tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw VersionError("checkpoint lacks metadata '" + key + "'");
  return it->second;
}

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(c.version);
  w.str(c.stage);
  w.u64(c.step);
  w.u64(c.seed);
  w.str(c.config_fingerprint);
  w.u32(static_cast<std::uint32_t>(c.meta.size()));
  for (const auto& [k, v] : c.meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (int d : t.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float f : t.value.values()) w.f32(f);
  }
  const std::uint64_t sum = fnv1a64(w.data().data(), w.data().size());
  w.u64(sum);
  return std::move(w.data());
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < sizeof(kMagic) + 4 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError(source + ": not a checkpoint file (bad magic)");
  }
  Reader r(bytes.data() + sizeof(kMagic), bytes.size() - sizeof(kMagic), source);
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw VersionError(source + ": checkpoint format version " + std::to_string(c.version) + ", this build reads " +
                       std::to_string(kCheckpointVersion));
  }
  if (bytes.size() < sizeof(kMagic) + 12) throw IoError(source + ": checkpoint truncated");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  if (stored != fnv1a64(bytes.data(), body)) throw IoError(source + ": checkpoint checksum mismatch");

  Reader b(bytes.data() + sizeof(kMagic) + 4, body - sizeof(kMagic) - 4, source);
  c.stage = b.str();
  c.step = b.u64();
  c.seed = b.u64();
  c.config_fingerprint = b.str();
  const std::uint32_t n_meta = b.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = b.str();
    c.meta[k] = b.str();
  }
  const std::uint32_t n_tensors = b.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = b.str();
    const std::uint32_t rank = b.u32();
    if (rank > 8) throw IoError(source + ": tensor '" + t.name + "' has implausible rank");
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = static_cast<int>(b.u32());
      count *= static_cast<std::size_t>(d);
    }
    b.need(count * 4);
    std::vector<float> data(count);
    for (auto& f : data) f = b.f32();
    t.value = Tensor<float>(std::move(shape), std::move(data));
    c.tensors.push_back(std::move(t));
  }
  if (!b.done()) throw IoError(source + ": trailing bytes after tensor table");
  return c;
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size() && std::fflush(f) == 0 &&
                    ::fsync(::fileno(f)) == 0;
    if (std::fclose(f) != 0 || !ok) {
      std::filesystem::remove(tmp);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes, path.string());
}

Checkpoint to_checkpoint(const TranslatorState& s, const std::string& fingerprint) {
  Checkpoint c = header("translator", s.step, s.seed, fingerprint);
  put_network(c, "g_s2r", s.settings.generator, s.g_s2r);
  put_network(c, "g_r2s", s.settings.generator, s.g_r2s);
  put_network(c, "d_rainy", s.settings.discriminator, s.d_rainy);
  put_network(c, "d_sunny", s.settings.discriminator, s.d_sunny);
  put_optimizer(c, "g_s2r", s.g_s2r.params, s.opt_g_s2r);
  put_optimizer(c, "g_r2s", s.g_r2s.params, s.opt_g_r2s);
  put_optimizer(c, "d_rainy", s.d_rainy.params, s.opt_d_rainy);
  put_optimizer(c, "d_sunny", s.d_sunny.params, s.opt_d_sunny);
  c.meta["buffer.capacity"] = std::to_string(s.settings.buffer_capacity);
  put_buffer(c, "rainy", s.buffer_rainy);
  put_buffer(c, "sunny", s.buffer_sunny);
  return c;
}

Checkpoint to_checkpoint(const DsnState& s, const std::string& fingerprint) {
  Checkpoint c = header("dsn", s.step, s.seed, fingerprint);
  put_network(c, "dsn", s.settings.dsn, s.dsn);
  put_network(c, "d_lr", s.settings.discriminator, s.d_lr);
  put_optimizer(c, "dsn", s.dsn.params, s.opt_dsn);
  put_optimizer(c, "d_lr", s.d_lr.params, s.opt_d_lr);
  return c;
}

Checkpoint to_checkpoint(const SrnState& s, const std::string& fingerprint) {
  Checkpoint c = header("srn", s.step, s.seed, fingerprint);
  put_network(c, "srn", s.settings.srn, s.srn);
  put_network(c, "d_hr", s.settings.discriminator, s.d_hr);
  put_optimizer(c, "srn", s.srn.params, s.opt_srn);
  put_optimizer(c, "d_hr", s.d_hr.params, s.opt_d_hr);
  return c;
}

TranslatorState translator_from_checkpoint(const Checkpoint& c, const TranslatorSettings& settings) {
  require_stage(c, "translator");
  for (const char* role : {"g_s2r", "g_r2s"}) require_spec(c, role, settings.generator);
  for (const char* role : {"d_rainy", "d_sunny"}) require_spec(c, role, settings.discriminator);
  if (meta_u64(c, "buffer.capacity") != static_cast<std::uint64_t>(settings.buffer_capacity)) {
    throw VersionError("checkpoint replay buffer capacity differs from the configuration");
  }
  TranslatorState s = TranslatorState::create(settings, c.seed);
  s.step = c.step;
  load_params(c, "g_s2r", s.g_s2r.params);
  load_params(c, "g_r2s", s.g_r2s.params);
  load_params(c, "d_rainy", s.d_rainy.params);
  load_params(c, "d_sunny", s.d_sunny.params);
  load_optimizer(c, "g_s2r", s.g_s2r.params, s.opt_g_s2r);
  load_optimizer(c, "g_r2s", s.g_r2s.params, s.opt_g_r2s);
  load_optimizer(c, "d_rainy", s.d_rainy.params, s.opt_d_rainy);
  load_optimizer(c, "d_sunny", s.d_sunny.params, s.opt_d_sunny);
  load_buffer(c, "rainy", s.buffer_rainy);
  load_buffer(c, "sunny", s.buffer_sunny);
  return s;
}

DsnState dsn_from_checkpoint(const Checkpoint& c, const DsnSettings& settings) {
  require_stage(c, "dsn");
  require_spec(c, "dsn", settings.dsn);
  require_spec(c, "d_lr", settings.discriminator);
  DsnState s = DsnState::create(settings, c.seed);
  s.step = c.step;
  load_params(c, "dsn", s.dsn.params);
  load_params(c, "d_lr", s.d_lr.params);
  load_optimizer(c, "dsn", s.dsn.params, s.opt_dsn);
  load_optimizer(c, "d_lr", s.d_lr.params, s.opt_d_lr);
  return s;
}

SrnState srn_from_checkpoint(const Checkpoint& c, const SrnSettings& settings) {
  require_stage(c, "srn");
  require_spec(c, "srn", settings.srn);
  require_spec(c, "d_hr", settings.discriminator);
  SrnState s = SrnState::create(settings, c.seed);
  s.step = c.step;
  load_params(c, "srn", s.srn.params);
  load_params(c, "d_hr", s.d_hr.params);
  load_optimizer(c, "srn", s.srn.params, s.opt_srn);
  load_optimizer(c, "d_hr", s.d_hr.params, s.opt_d_hr);
  return s;
}

BuiltNetwork<float> network_from_checkpoint(const Checkpoint& c, const std::string& role) {
  const NetworkSpec spec = NetworkSpec::parse(c.meta_value("spec." + role));
  BuiltNetwork<float> net = build_network<float>(spec, meta_u64(c, "seed." + role));
  load_params(c, role, net.params);
  return net;
}

}  // namespace rainsr
