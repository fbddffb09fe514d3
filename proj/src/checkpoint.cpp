#include "grasp/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace grasp {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'S', 'P'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }
  void put_params(const Parameters<float>& p) {
    p.visit([&](const MatrixXf& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) put<float>(m.data()[i]);
    });
  }
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  std::vector<char> take() { return std::move(bytes_); }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DataError("truncated checkpoint");
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }
  void get_params(Parameters<float>& p) {
    p.visit([&](MatrixXf& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<float>();
    });
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t variant_code(Variant v) { return static_cast<std::uint32_t>(v); }

Variant variant_from_code(std::uint32_t c) {
  if (c > 2) throw DataError("unknown variant tag " + std::to_string(c) + " in checkpoint");
  return static_cast<Variant>(c);
}

}  // namespace

std::vector<char> encode_checkpoint(const Checkpoint& c) {
  if (!same_layout(c.params, zero_parameters<float>(c.variant, c.dims)))
    throw UsageError("checkpoint parameters do not match its dimensions");
  Writer w;
  w.raw(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(variant_code(c.variant));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.dims.input));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.dims.hidden));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.dims.depth));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.dims.heads));
  w.put<double>(c.dims.dropout);
  w.put<std::uint8_t>(c.graph.use_semantic ? 1 : 0);
  w.put<std::uint8_t>(c.graph.connect_cls ? 1 : 0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.graph.k));
  w.put<std::uint32_t>(c.meta.epoch);
  w.put<std::uint64_t>(c.meta.seed);
  w.put<double>(c.meta.best_val_fmax);
  w.put_params(c.params);
  w.put<std::uint8_t>(c.optimizer ? 1 : 0);
  if (c.optimizer) {
    const auto& o = *c.optimizer;
    if (!same_layout(c.params, o.m) || !same_layout(c.params, o.v))
      throw UsageError("optimizer state does not match parameters");
    w.put<std::uint64_t>(o.step);
    w.put<double>(o.config.lr);
    w.put<double>(o.config.beta1);
    w.put<double>(o.config.beta2);
    w.put<double>(o.config.eps);
    w.put_params(o.m);
    w.put_params(o.v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("not a checkpoint (bad magic)");
  Reader r(bytes);
  for (int i = 0; i < 4; ++i) r.get<char>();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.variant = variant_from_code(r.get<std::uint32_t>());
  c.dims.input = static_cast<int>(r.get<std::uint32_t>());
  c.dims.hidden = static_cast<int>(r.get<std::uint32_t>());
  c.dims.depth = static_cast<int>(r.get<std::uint32_t>());
  c.dims.heads = static_cast<int>(r.get<std::uint32_t>());
  c.dims.dropout = r.get<double>();
  c.graph.use_semantic = r.get<std::uint8_t>() != 0;
  c.graph.connect_cls = r.get<std::uint8_t>() != 0;
  c.graph.k = static_cast<int>(r.get<std::uint32_t>());
  c.meta.epoch = r.get<std::uint32_t>();
  c.meta.seed = r.get<std::uint64_t>();
  c.meta.best_val_fmax = r.get<double>();
  try {
    c.params = zero_parameters<float>(c.variant, c.dims);
  } catch (const UsageError& e) {
    throw DataError(std::string("invalid checkpoint dimensions: ") + e.what());
  }
  r.get_params(c.params);
  if (r.get<std::uint8_t>() != 0) {
    AdamState<float> o = AdamState<float>::init(c.params);
    o.step = r.get<std::uint64_t>();
    o.config.lr = r.get<double>();
    o.config.beta1 = r.get<double>();
    o.config.beta2 = r.get<double>();
    o.config.eps = r.get<double>();
    r.get_params(o.m);
    r.get_params(o.v);
    c.optimizer = std::move(o);
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint payload");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const auto bytes = encode_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace grasp
