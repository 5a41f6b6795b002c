#include "cizsl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cizsl/error.hpp"

namespace cizsl {

namespace {

class Writer {
 public:
  template <typename T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    const U u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
  }
  void put_f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void put_raw(const char* data, std::size_t n) { bytes_.append(data, n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) fail(ErrorKind::LoadError, "truncated checkpoint");
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  bool exhausted() const { return pos_ == bytes_.size(); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

void put_network(Writer& w, const Mlp<double>& net) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.depth()));
  for (const auto& layer : net.layers()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.in_dim()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.out_dim()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(layer.activation));
    w.put_f64(layer.slope);
  }
  const VectorXd params = net.params();
  for (Eigen::Index i = 0; i < params.size(); ++i) w.put_f64(params[i]);
}

Mlp<double> get_network(Reader& r) {
  const auto depth = r.get<std::uint32_t>();
  if (depth > 1024) fail(ErrorKind::LoadError, "implausible layer count in checkpoint");
  std::vector<Layer<double>> layers;
  for (std::uint32_t i = 0; i < depth; ++i) {
    Layer<double> layer;
    const auto in = r.get<std::uint32_t>();
    const auto out = r.get<std::uint32_t>();
    const auto tag = r.get<std::uint8_t>();
    if (tag > static_cast<std::uint8_t>(Activation::Sigmoid)) fail(ErrorKind::LoadError, "unknown activation tag");
    if (in == 0 || out == 0 || in > (1u << 20) || out > (1u << 20)) fail(ErrorKind::LoadError, "bad layer dims");
    layer.activation = static_cast<Activation>(tag);
    layer.slope = r.get_f64();
    layer.weight = MatrixXd::Zero(out, in);
    layer.bias = VectorXd::Zero(out);
    layers.push_back(std::move(layer));
  }
  Mlp<double> net;
  try {
    net = Mlp<double>(std::move(layers));
  } catch (const Error& e) {
    fail(ErrorKind::LoadError, std::string("inconsistent checkpoint network: ") + e.what());
  }
  VectorXd params(net.num_params());
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = r.get_f64();
  if (params.size() > 0) net.set_params(params);
  return net;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Generator<double>& generator,
                     const Discriminator<double>& discriminator) {
  Writer w;
  w.put_raw(kCheckpointMagic, 4);
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(generator.noise_dim()));
  w.put<std::uint32_t>(3);
  put_network(w, generator.embed());
  put_network(w, generator.trunk());
  put_network(w, discriminator.net());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::InvalidInput, "cannot write checkpoint " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
}

NetworkPair load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::LoadError, "missing checkpoint: " + path.string());
  Reader r{std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>())};
  if (r.bytes().size() < 4 || std::memcmp(r.bytes().data(), kCheckpointMagic, 4) != 0)
    fail(ErrorKind::LoadError, "bad magic in checkpoint " + path.string());
  for (int i = 0; i < 4; ++i) r.get<std::uint8_t>();
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion)
    fail(ErrorKind::LoadError, "unsupported checkpoint version " + std::to_string(version));
  const auto noise_dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint32_t>();
  if (count != 3) fail(ErrorKind::LoadError, "checkpoint must hold three networks");
  Mlp<double> embed = get_network(r);
  Mlp<double> trunk = get_network(r);
  Mlp<double> critic = get_network(r);
  if (!r.exhausted()) fail(ErrorKind::LoadError, "trailing bytes in checkpoint");
  try {
    return {Generator<double>(std::move(embed), std::move(trunk), static_cast<Eigen::Index>(noise_dim)),
            Discriminator<double>(std::move(critic))};
  } catch (const Error& e) {
    fail(ErrorKind::LoadError, std::string("inconsistent checkpoint: ") + e.what());
  }
}

}  // namespace cizsl
