#include "urm/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace urm::harness {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write checkpoint " + path.string());
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), std::streamsize(n)); }
  template <typename T>
  void pod(T v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void array(const core::NdArray<float>& a) {
    pod<std::uint64_t>(a.ndim());
    for (std::size_t d : a.shape()) pod<std::uint64_t>(d);
    bytes(a.data().data(), a.numel() * sizeof(float));
  }
  void optional_array(const core::NdArray<float>& a) {
    pod<std::uint8_t>(a.numel() > 0 ? 1 : 0);
    if (a.numel() > 0) array(a);
  }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("checkpoint write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open checkpoint " + path.string());
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(in_.gcount()) != n) throw std::runtime_error("checkpoint truncated");
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t count(std::uint64_t limit = std::uint64_t(1) << 32) {
    const auto n = pod<std::uint64_t>();
    if (n > limit) throw std::runtime_error("checkpoint corrupt: implausible length");
    return n;
  }
  std::string str() {
    std::string s(count(), '\0');
    bytes(s.data(), s.size());
    return s;
  }
  core::NdArray<float> array() {
    const auto rank = count(8);
    core::Shape shape(rank);
    for (auto& d : shape) d = count();
    core::NdArray<float> a(shape);
    bytes(a.data().data(), a.numel() * sizeof(float));
    return a;
  }
  core::NdArray<float> optional_array() { return pod<std::uint8_t>() ? array() : core::NdArray<float>(); }

 private:
  std::ifstream in_;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const std::size_t n = c.params.size();
  if (c.adam_m.size() != n || c.adam_v.size() != n || c.momentum.size() != n)
    throw std::invalid_argument("checkpoint: optimizer buffers do not match parameters");
  const auto tmp = path.string() + ".tmp";
  {
    Writer w(tmp);
    w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.pod(kCheckpointVersion);
    w.str(c.config_json);
    w.pod<std::uint64_t>(c.step);
    w.pod<std::uint64_t>(n);
    for (const auto& p : c.params) {
      w.str(p.name);
      w.array(p.value);
    }
    w.pod<std::uint64_t>(c.optimizer_step);
    w.pod<std::uint64_t>(n);
    for (std::size_t i = 0; i < n; ++i) {
      w.optional_array(c.adam_m[i]);
      w.optional_array(c.adam_v[i]);
      w.optional_array(c.momentum[i]);
    }
    w.pod<std::uint8_t>(c.has_ema ? 1 : 0);
    if (c.has_ema) {
      w.pod(c.ema_decay);
      w.pod<std::uint64_t>(c.ema.size());
      for (const auto& a : c.ema) w.array(a);
    }
    w.str(c.rng_state);
    w.finish();
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw std::runtime_error(path.string() + " is not a checkpoint (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config_json = r.str();
  c.step = r.pod<std::uint64_t>();
  const auto n = r.count();
  c.params.resize(n);
  for (auto& p : c.params) {
    p.name = r.str();
    p.value = r.array();
  }
  c.optimizer_step = r.pod<std::uint64_t>();
  if (r.count() != n) throw std::runtime_error("checkpoint corrupt: optimizer count mismatch");
  c.adam_m.resize(n);
  c.adam_v.resize(n);
  c.momentum.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.adam_m[i] = r.optional_array();
    c.adam_v[i] = r.optional_array();
    c.momentum[i] = r.optional_array();
  }
  c.has_ema = r.pod<std::uint8_t>() != 0;
  if (c.has_ema) {
    c.ema_decay = r.pod<double>();
    c.ema.resize(r.count());
    for (auto& a : c.ema) a = r.array();
  }
  c.rng_state = r.str();
  return c;
}

void capture_params(const nn::ParamStore<float>& store, Checkpoint& ckpt) {
  ckpt.params.clear();
  for (const auto& p : store.entries()) ckpt.params.push_back({p.name, p.tensor.value()});
}

void restore_params(const Checkpoint& ckpt, nn::ParamStore<float>& store) {
  if (ckpt.params.size() != store.size())
    throw std::runtime_error("checkpoint has " + std::to_string(ckpt.params.size()) + " parameters, model has " +
                             std::to_string(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& dst = store.entries()[i];
    const auto& src = ckpt.params[i];
    if (dst.name != src.name || dst.tensor.shape() != src.value.shape())
      throw std::runtime_error("checkpoint parameter " + src.name + " " + core::shape_string(src.value.shape()) +
                               " does not match model parameter " + dst.name + " " +
                               core::shape_string(dst.tensor.shape()));
    dst.tensor.mutable_value() = src.value;
  }
}

void capture_optimizer(const optim::OptimState<float>& state, Checkpoint& ckpt) {
  ckpt.optimizer_step = state.step;
  ckpt.adam_m = state.m;
  ckpt.adam_v = state.v;
  ckpt.momentum = state.momentum;
  ckpt.has_ema = !state.ema.values().empty();
  ckpt.ema_decay = state.ema.decay();
  ckpt.ema = state.ema.values();
}

void restore_optimizer(const Checkpoint& ckpt, optim::OptimState<float>& state) {
  auto check = [](const std::vector<core::NdArray<float>>& src, const std::vector<core::NdArray<float>>& dst,
                  const char* what) {
    if (src.size() != dst.size()) throw std::runtime_error(std::string("checkpoint ") + what + " count mismatch");
    for (std::size_t i = 0; i < src.size(); ++i)
      if (src[i].shape() != dst[i].shape()) throw std::runtime_error(std::string("checkpoint ") + what + " shape mismatch");
  };
  check(ckpt.adam_m, state.m, "adam m");
  check(ckpt.adam_v, state.v, "adam v");
  check(ckpt.momentum, state.momentum, "momentum");
  state.step = ckpt.optimizer_step;
  state.m = ckpt.adam_m;
  state.v = ckpt.adam_v;
  state.momentum = ckpt.momentum;
  if (ckpt.has_ema) {
    check(ckpt.ema, state.ema.values(), "ema");
    state.ema.values() = ckpt.ema;
  }
}

}  // namespace urm::harness
