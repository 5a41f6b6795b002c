#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cizsl/error.hpp"
#include "cizsl/numerics.hpp"
#include "cizsl/rng.hpp"

namespace cizsl {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, LeakyRelu = 2, Sigmoid = 3 };

template <typename Scalar>
struct Layer {
  Matrix<Scalar> weight;  // out x in
  Vector<Scalar> bias;    // out
  Activation activation = Activation::Identity;
  Scalar slope = Scalar(0.2);  // leaky-relu only

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
  Eigen::Index num_params() const { return weight.size() + bias.size(); }
};

struct LayerSpec {
  Eigen::Index in = 0;
  Eigen::Index out = 0;
  Activation activation = Activation::Identity;
  double slope = 0.2;
};

namespace detail {

inline std::uint64_t next_revision() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

template <typename Scalar>
Matrix<Scalar> activate(const Layer<Scalar>& layer, const Matrix<Scalar>& z) {
  switch (layer.activation) {
    case Activation::Identity: return z;
    case Activation::Relu: return z.cwiseMax(Scalar(0));
    case Activation::LeakyRelu:
      return z.unaryExpr([s = layer.slope](Scalar v) { return v > Scalar(0) ? v : s * v; });
    case Activation::Sigmoid:
      return z.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
  }
  return z;
}

// sigma'(z); `a` is sigma(z).
template <typename Scalar>
Matrix<Scalar> activation_slope(const Layer<Scalar>& layer, const Matrix<Scalar>& z, const Matrix<Scalar>& a) {
  switch (layer.activation) {
    case Activation::Identity: return Matrix<Scalar>::Ones(z.rows(), z.cols());
    case Activation::Relu:
      return z.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); });
    case Activation::LeakyRelu:
      return z.unaryExpr([s = layer.slope](Scalar v) { return v > Scalar(0) ? Scalar(1) : s; });
    case Activation::Sigmoid: return (a.array() * (Scalar(1) - a.array())).matrix();
  }
  return Matrix<Scalar>::Ones(z.rows(), z.cols());
}

// sigma''(z); piecewise-linear activations are taken as zero off their kink.
template <typename Scalar>
Matrix<Scalar> activation_curvature(const Layer<Scalar>& layer, const Matrix<Scalar>& a) {
  if (layer.activation != Activation::Sigmoid) return Matrix<Scalar>::Zero(a.rows(), a.cols());
  return (a.array() * (Scalar(1) - a.array()) * (Scalar(1) - Scalar(2) * a.array())).matrix();
}

}  // namespace detail

/// Parameter-gradient and input-gradient of a backward pass.
template <typename Scalar>
struct Gradients {
  Vector<Scalar> params;
  Matrix<Scalar> input;
};

template <typename Scalar>
struct PenaltyResult {
  Scalar penalty = Scalar(0);      // mean over the batch
  Vector<Scalar> per_sample;       // (||grad_x out_k|| - 1)^2 per row
  Vector<Scalar> param_grad;       // gradient of the mean penalty
};

/// Fully connected feed-forward chain. Batches are one sample per row.
template <typename Scalar>
class Mlp {
 public:
  /// Activations recorded by forward(); consumed by backward().
  struct Cache {
    std::vector<Matrix<Scalar>> inputs;  // A_{l-1} per layer
    std::vector<Matrix<Scalar>> pre;     // Z_l
    std::vector<Matrix<Scalar>> post;    // A_l
    std::uint64_t revision = 0;
  };

  Mlp() : revision_(detail::next_revision()) {}

  explicit Mlp(std::vector<Layer<Scalar>> layers) : layers_(std::move(layers)), revision_(detail::next_revision()) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      require(l.bias.size() == l.out_dim(), ErrorKind::InvalidInput,
              "Mlp: bias size does not match layer " + std::to_string(i));
      if (i > 0)
        require(layers_[i - 1].out_dim() == l.in_dim(), ErrorKind::InvalidInput,
                "Mlp: layer " + std::to_string(i) + " input does not chain with previous output");
    }
  }

  /// Glorot-uniform weights in [-s, s], s = sqrt(6 / (fan_in + fan_out)); zero biases.
  static Mlp glorot(const std::vector<LayerSpec>& specs, RngStream& rng) {
    std::vector<Layer<Scalar>> layers;
    layers.reserve(specs.size());
    for (const auto& spec : specs) {
      require(spec.in >= 1 && spec.out >= 1, ErrorKind::InvalidInput, "Mlp::glorot: layer dims must be >= 1");
      Layer<Scalar> layer;
      const double s = std::sqrt(6.0 / static_cast<double>(spec.in + spec.out));
      layer.weight.resize(spec.out, spec.in);
      for (Eigen::Index r = 0; r < spec.out; ++r)
        for (Eigen::Index c = 0; c < spec.in; ++c) layer.weight(r, c) = static_cast<Scalar>(sample_uniform(rng, -s, s));
      layer.bias = Vector<Scalar>::Zero(spec.out);
      layer.activation = spec.activation;
      layer.slope = static_cast<Scalar>(spec.slope);
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  }

  bool empty() const { return layers_.empty(); }
  std::size_t depth() const { return layers_.size(); }
  const std::vector<Layer<Scalar>>& layers() const { return layers_; }
  Eigen::Index in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  Eigen::Index out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  std::uint64_t revision() const { return revision_; }

  Eigen::Index num_params() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.num_params();
    return n;
  }

  /// Flattened view: per layer, weights row-major then bias.
  Vector<Scalar> params() const {
    Vector<Scalar> out(num_params());
    Eigen::Index k = 0;
    for (const auto& l : layers_) {
      out.segment(k, l.weight.size()) = l.weight.template reshaped<Eigen::RowMajor>();
      k += l.weight.size();
      out.segment(k, l.bias.size()) = l.bias;
      k += l.bias.size();
    }
    return out;
  }

  void set_params(const Vector<Scalar>& flat) {
    require(flat.size() == num_params(), ErrorKind::InvalidInput, "Mlp::set_params: length mismatch");
    Eigen::Index k = 0;
    for (auto& l : layers_) {
      l.weight = flat.segment(k, l.weight.size()).template reshaped<Eigen::RowMajor>(l.out_dim(), l.in_dim());
      k += l.weight.size();
      l.bias = flat.segment(k, l.bias.size());
      k += l.bias.size();
    }
    revision_ = detail::next_revision();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    require(!layers_.empty(), ErrorKind::InvalidInput, "Mlp::forward: empty network");
    require(x.cols() == in_dim(), ErrorKind::InvalidInput,
            "Mlp::forward: input has " + std::to_string(x.cols()) + " columns, expected " + std::to_string(in_dim()));
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
      cache->post.clear();
      cache->revision = revision_;
    }
    Matrix<Scalar> a = x;
    for (const auto& l : layers_) {
      Matrix<Scalar> z = a * l.weight.transpose();
      z.rowwise() += l.bias.transpose();
      Matrix<Scalar> next = detail::activate(l, z);
      if (cache) {
        cache->inputs.push_back(std::move(a));
        cache->pre.push_back(std::move(z));
        cache->post.push_back(next);
      }
      a = std::move(next);
    }
    return a;
  }

  /// Reverse-mode pass for the scalar sum(out_grad .* output).
  Gradients<Scalar> backward(const Cache& cache, const Matrix<Scalar>& out_grad) const {
    require(cache.revision == revision_ && cache.pre.size() == layers_.size(), ErrorKind::InvalidState,
            "Mlp::backward: cache does not belong to this network state");
    require(out_grad.rows() == cache.post.back().rows() && out_grad.cols() == out_dim(), ErrorKind::InvalidInput,
            "Mlp::backward: output gradient shape mismatch");
    Vector<Scalar> grad(num_params());
    Eigen::Index offset = grad.size();
    Matrix<Scalar> upstream = out_grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& l = layers_[i];
      Matrix<Scalar> dz =
          (detail::activation_slope(l, cache.pre[i], cache.post[i]).array() * upstream.array()).matrix();
      offset -= l.num_params();
      Matrix<Scalar> dw = dz.transpose() * cache.inputs[i];
      grad.segment(offset, l.weight.size()) = dw.template reshaped<Eigen::RowMajor>();
      grad.segment(offset + l.weight.size(), l.bias.size()) = dz.colwise().sum().transpose();
      upstream = dz * l.weight;
    }
    return {std::move(grad), std::move(upstream)};
  }

  /// Gradient penalty mean_i (||d out_k / d x_i|| - 1)^2 and its exact
  /// gradient w.r.t. the parameters (double backprop). A row whose input
  /// gradient is exactly zero contributes penalty 1 and no gradient.
  PenaltyResult<Scalar> input_grad_penalty(const Matrix<Scalar>& x, Eigen::Index output_index) const {
    require(output_index >= 0 && output_index < out_dim(), ErrorKind::InvalidInput,
            "input_grad_penalty: output index out of range");
    Cache cache;
    forward(x, &cache);
    const std::size_t depth = layers_.size();
    const Eigen::Index m = x.rows();

    // Input-gradient pass, keeping G_l (gradient w.r.t. A_l) and Delta_l.
    std::vector<Matrix<Scalar>> g(depth + 1), delta(depth), slope(depth);
    g[depth] = Matrix<Scalar>::Zero(m, out_dim());
    g[depth].col(output_index).setOnes();
    for (std::size_t i = depth; i-- > 0;) {
      slope[i] = detail::activation_slope(layers_[i], cache.pre[i], cache.post[i]);
      delta[i] = (slope[i].array() * g[i + 1].array()).matrix();
      g[i] = delta[i] * layers_[i].weight;
    }

    PenaltyResult<Scalar> result;
    result.per_sample.resize(m);
    Matrix<Scalar> g_bar(m, in_dim());
    for (Eigen::Index r = 0; r < m; ++r) {
      const Scalar n = g[0].row(r).norm();
      result.per_sample[r] = (n - Scalar(1)) * (n - Scalar(1));
      if (n > Scalar(0))
        g_bar.row(r) = (Scalar(2) * (n - Scalar(1)) / (n * static_cast<Scalar>(m))) * g[0].row(r);
      else
        g_bar.row(r).setZero();
    }
    result.penalty = result.per_sample.mean();

    // Reverse through the input-gradient pass.
    std::vector<Matrix<Scalar>> weight_bar(depth), z_bar(depth);
    for (std::size_t i = 0; i < depth; ++i) {
      const auto& l = layers_[i];
      weight_bar[i] = delta[i].transpose() * g_bar;
      Matrix<Scalar> delta_bar = g_bar * l.weight.transpose();
      z_bar[i] = (detail::activation_curvature(l, cache.post[i]).array() * g[i + 1].array() * delta_bar.array())
                     .matrix();
      if (i + 1 < depth) g_bar = (slope[i].array() * delta_bar.array()).matrix();
    }

    // Reverse through the forward pass with the injected Z adjoints.
    result.param_grad.resize(num_params());
    Eigen::Index offset = num_params();
    Matrix<Scalar> a_bar = Matrix<Scalar>::Zero(m, out_dim());
    for (std::size_t i = depth; i-- > 0;) {
      const auto& l = layers_[i];
      Matrix<Scalar> dz = z_bar[i] + (slope[i].array() * a_bar.array()).matrix();
      Matrix<Scalar> dw = weight_bar[i] + dz.transpose() * cache.inputs[i];
      offset -= l.num_params();
      result.param_grad.segment(offset, l.weight.size()) = dw.template reshaped<Eigen::RowMajor>();
      result.param_grad.segment(offset + l.weight.size(), l.bias.size()) = dz.colwise().sum().transpose();
      a_bar = dz * l.weight;
    }
    return result;
  }

 private:
  std::vector<Layer<Scalar>> layers_;
  std::uint64_t revision_;
};

struct GeneratorArch {
  Eigen::Index text_dim = 0;
  Eigen::Index noise_dim = 0;
  Eigen::Index text_embed_dim = 64;  // 0 disables the noise-suppression layer
  std::vector<Eigen::Index> hidden = {128};
  Eigen::Index output_dim = 0;
  Activation output_activation = Activation::Relu;
  double slope = 0.2;
};

struct DiscriminatorArch {
  Eigen::Index input_dim = 0;
  std::vector<Eigen::Index> hidden = {128};
  Eigen::Index num_classes = 0;
  double slope = 0.2;
};

/// G(t, z): optional text-embedding layer on t, concatenated with z, then
/// the trunk chain. Parameters are flattened embed-first.
template <typename Scalar>
class Generator {
 public:
  struct Cache {
    typename Mlp<Scalar>::Cache embed;
    typename Mlp<Scalar>::Cache trunk;
    Eigen::Index embed_width = 0;
  };

  Generator() = default;
  Generator(Mlp<Scalar> embed, Mlp<Scalar> trunk, Eigen::Index noise_dim)
      : embed_(std::move(embed)), trunk_(std::move(trunk)), noise_dim_(noise_dim) {
    require(noise_dim_ >= 0, ErrorKind::InvalidInput, "Generator: negative noise dim");
    require(!trunk_.empty(), ErrorKind::InvalidInput, "Generator: trunk must have at least one layer");
    require(trunk_.in_dim() > noise_dim_, ErrorKind::InvalidInput, "Generator: trunk input narrower than noise");
    if (!embed_.empty())
      require(embed_.out_dim() + noise_dim_ == trunk_.in_dim(), ErrorKind::InvalidInput,
              "Generator: embed output + noise does not match trunk input");
  }

  static Generator create(const GeneratorArch& arch, RngStream& rng) {
    require(arch.text_dim >= 1 && arch.output_dim >= 1 && arch.noise_dim >= 0, ErrorKind::InvalidConfig,
            "GeneratorArch: dims must be >= 1");
    Mlp<Scalar> embed;
    Eigen::Index width = arch.text_dim;
    if (arch.text_embed_dim > 0) {
      embed = Mlp<Scalar>::glorot({{arch.text_dim, arch.text_embed_dim, Activation::LeakyRelu, arch.slope}}, rng);
      width = arch.text_embed_dim;
    }
    std::vector<LayerSpec> specs;
    Eigen::Index in = width + arch.noise_dim;
    for (Eigen::Index h : arch.hidden) {
      require(h >= 1, ErrorKind::InvalidConfig, "GeneratorArch: hidden width must be >= 1");
      specs.push_back({in, h, Activation::LeakyRelu, arch.slope});
      in = h;
    }
    specs.push_back({in, arch.output_dim, arch.output_activation, arch.slope});
    return Generator(std::move(embed), Mlp<Scalar>::glorot(specs, rng), arch.noise_dim);
  }

  const Mlp<Scalar>& embed() const { return embed_; }
  const Mlp<Scalar>& trunk() const { return trunk_; }
  Eigen::Index noise_dim() const { return noise_dim_; }
  Eigen::Index text_dim() const { return embed_.empty() ? trunk_.in_dim() - noise_dim_ : embed_.in_dim(); }
  Eigen::Index output_dim() const { return trunk_.out_dim(); }
  Eigen::Index num_params() const { return embed_.num_params() + trunk_.num_params(); }

  Vector<Scalar> params() const {
    Vector<Scalar> out(num_params());
    out << embed_.params(), trunk_.params();
    return out;
  }

  void set_params(const Vector<Scalar>& flat) {
    require(flat.size() == num_params(), ErrorKind::InvalidInput, "Generator::set_params: length mismatch");
    const Eigen::Index ne = embed_.num_params();
    if (ne > 0) embed_.set_params(flat.head(ne));
    trunk_.set_params(flat.tail(trunk_.num_params()));
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& texts, const Matrix<Scalar>& noise, Cache* cache = nullptr) const {
    require(texts.cols() == text_dim(), ErrorKind::InvalidInput, "Generator::forward: text dimension mismatch");
    require(noise.cols() == noise_dim_, ErrorKind::InvalidInput, "Generator::forward: noise dimension mismatch");
    require(texts.rows() == noise.rows(), ErrorKind::InvalidInput, "Generator::forward: batch size mismatch");
    Matrix<Scalar> encoded = embed_.empty() ? texts : embed_.forward(texts, cache ? &cache->embed : nullptr);
    Matrix<Scalar> joined(texts.rows(), encoded.cols() + noise_dim_);
    joined << encoded, noise;
    if (cache) cache->embed_width = encoded.cols();
    return trunk_.forward(joined, cache ? &cache->trunk : nullptr);
  }

  /// Gradient w.r.t. parameters of sum(out_grad .* G(t, z)).
  Vector<Scalar> backward(const Cache& cache, const Matrix<Scalar>& out_grad) const {
    auto trunk_grads = trunk_.backward(cache.trunk, out_grad);
    Vector<Scalar> out(num_params());
    if (!embed_.empty()) {
      Matrix<Scalar> embed_out_grad = trunk_grads.input.leftCols(cache.embed_width);
      auto embed_grads = embed_.backward(cache.embed, embed_out_grad);
      out << embed_grads.params, trunk_grads.params;
    } else {
      out = trunk_grads.params;
    }
    return out;
  }

 private:
  Mlp<Scalar> embed_;
  Mlp<Scalar> trunk_;
  Eigen::Index noise_dim_ = 0;
};

/// Two-headed critic: a shared body whose final identity layer has width
/// 1 + K; column 0 is the raw real/fake score, columns 1..K the class logits.
template <typename Scalar>
class Discriminator {
 public:
  using Cache = typename Mlp<Scalar>::Cache;

  struct Output {
    Vector<Scalar> real;    // m
    Matrix<Scalar> logits;  // m x K
  };

  Discriminator() = default;
  explicit Discriminator(Mlp<Scalar> net) : net_(std::move(net)) {
    require(!net_.empty(), ErrorKind::InvalidInput, "Discriminator: empty network");
    require(net_.layers().back().activation == Activation::Identity, ErrorKind::InvalidInput,
            "Discriminator: heads must be linear");
    require(net_.out_dim() >= 3, ErrorKind::InvalidInput, "Discriminator: need at least two seen classes");
  }

  static Discriminator create(const DiscriminatorArch& arch, RngStream& rng) {
    require(arch.input_dim >= 1, ErrorKind::InvalidConfig, "DiscriminatorArch: input dim must be >= 1");
    require(arch.num_classes >= 2, ErrorKind::InvalidConfig, "DiscriminatorArch: need at least two seen classes");
    std::vector<LayerSpec> specs;
    Eigen::Index in = arch.input_dim;
    for (Eigen::Index h : arch.hidden) {
      require(h >= 1, ErrorKind::InvalidConfig, "DiscriminatorArch: hidden width must be >= 1");
      specs.push_back({in, h, Activation::LeakyRelu, arch.slope});
      in = h;
    }
    specs.push_back({in, 1 + arch.num_classes, Activation::Identity, arch.slope});
    return Discriminator(Mlp<Scalar>::glorot(specs, rng));
  }

  const Mlp<Scalar>& net() const { return net_; }
  Eigen::Index input_dim() const { return net_.in_dim(); }
  Eigen::Index num_classes() const { return net_.out_dim() - 1; }
  Eigen::Index num_params() const { return net_.num_params(); }
  Vector<Scalar> params() const { return net_.params(); }
  void set_params(const Vector<Scalar>& flat) { net_.set_params(flat); }

  Output forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
    require(x.cols() == input_dim(), ErrorKind::InvalidInput, "Discriminator::forward: feature dimension mismatch");
    Matrix<Scalar> out = net_.forward(x, cache);
    return {out.col(0), out.rightCols(num_classes())};
  }

  Gradients<Scalar> backward(const Cache& cache, const Vector<Scalar>& real_grad,
                             const Matrix<Scalar>& logit_grad) const {
    Matrix<Scalar> out_grad(real_grad.size(), net_.out_dim());
    out_grad << real_grad, logit_grad;
    return net_.backward(cache, out_grad);
  }

  PenaltyResult<Scalar> gradient_penalty(const Matrix<Scalar>& x) const {
    require(x.cols() == input_dim(), ErrorKind::InvalidInput, "Discriminator::gradient_penalty: dimension mismatch");
    return net_.input_grad_penalty(x, 0);
  }

 private:
  Mlp<Scalar> net_;
};

}  // namespace cizsl
