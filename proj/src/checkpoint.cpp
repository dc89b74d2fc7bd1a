#include "ridepool/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "ridepool/common.hpp"

namespace ridepool {
namespace {

class Writer {
 public:
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& in) : in_(in) {}
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  void bytes(void* p, size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > in_.size()) throw Error(ErrorCode::kFormat, "checkpoint truncated");
  }
  const std::vector<uint8_t>& in_;
  size_t pos_ = 0;
};

template <typename Params>
void write_params(Writer& w, const Params& p, size_t count) {
  for (size_t k = 0; k < count; ++k) w.f64(p.param(k));
}

template <typename Params>
void read_params(Reader& r, Params& p, size_t count) {
  for (size_t k = 0; k < count; ++k) p.param(k) = r.f64();
}

}  // namespace

std::vector<uint8_t> serialize_checkpoint(const Mlp& net, const Adam& adam,
                                          const CheckpointMeta& meta) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<uint32_t>(net.sizes().size()));
  for (int s : net.sizes()) w.u32(static_cast<uint32_t>(s));
  const size_t count = net.parameter_count();
  write_params(w, net, count);

  const AdamConfig& ac = adam.config();
  w.u64(adam.steps());
  w.f64(adam.learning_rate());
  w.f64(ac.learning_rate);
  w.f64(ac.decay);
  w.f64(ac.beta1);
  w.f64(ac.beta2);
  w.f64(ac.epsilon);
  if (adam.first_moment().weights.size() == static_cast<size_t>(net.layers())) {
    write_params(w, adam.first_moment(), count);
    write_params(w, adam.second_moment(), count);
  } else {
    for (size_t k = 0; k < 2 * count; ++k) w.f64(0.0);
  }

  w.u64(meta.seed);
  w.u64(meta.episode);
  w.u32(static_cast<uint32_t>(meta.method.size()));
  w.bytes(meta.method.data(), meta.method.size());
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<uint8_t>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::kFormat, "not a ridepool checkpoint (bad magic)");
  }
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kFormat,
                "unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t n_sizes = r.u32();
  if (n_sizes < 2 || n_sizes > 64) throw Error(ErrorCode::kFormat, "bad layer count");
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) {
    const uint32_t v = r.u32();
    if (v == 0 || v > (1u << 20)) throw Error(ErrorCode::kFormat, "bad layer size");
    s = static_cast<int>(v);
  }

  Checkpoint ck;
  ck.net = Mlp(sizes);
  const size_t count = ck.net.parameter_count();
  read_params(r, ck.net, count);

  const uint64_t steps = r.u64();
  const double lr = r.f64();
  AdamConfig ac;
  ac.learning_rate = r.f64();
  ac.decay = r.f64();
  ac.beta1 = r.f64();
  ac.beta2 = r.f64();
  ac.epsilon = r.f64();
  MlpGrads m = MlpGrads::zeros_like(ck.net);
  MlpGrads v = MlpGrads::zeros_like(ck.net);
  read_params(r, m, count);
  read_params(r, v, count);
  ck.adam = Adam(ck.net, ac);
  ck.adam.restore(steps, lr, std::move(m), std::move(v));

  ck.meta.seed = r.u64();
  ck.meta.episode = r.u64();
  const uint32_t len = r.u32();
  if (len > 256) throw Error(ErrorCode::kFormat, "bad method name length");
  ck.meta.method.resize(len);
  r.bytes(ck.meta.method.data(), len);
  if (!r.at_end()) throw Error(ErrorCode::kFormat, "trailing bytes in checkpoint");
  return ck;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

void save_checkpoint(const std::string& path, const Mlp& net, const Adam& adam,
                     const CheckpointMeta& meta) {
  write_file_bytes(path, serialize_checkpoint(net, adam, meta));
}

Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

void require_layer_sizes(const Mlp& net, const std::vector<int>& sizes) {
  if (net.sizes() == sizes) return;
  auto fmt = [](const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
  };
  throw Error(ErrorCode::kShapeMismatch, "checkpoint layer sizes " + fmt(net.sizes()) +
                                             " do not match expected " + fmt(sizes));
}

}  // namespace ridepool
