#pragma once

// Fully connected networks with exact reverse-mode gradients, Adam, MSE and
// soft target updates. Batches are column-major: one sample per column.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "rsma/errors.hpp"
#include "rsma/random.hpp"

namespace rsma {

enum class Activation : std::uint8_t { linear = 0, relu = 1, tanh = 2, sigmoid = 3 };

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::linear: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

inline Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::linear: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }
  return z;
}

namespace detail {
// Derivative of the activation expressed through its pre-activation z and
// output y (whichever is cheaper for that function).
inline Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z,
                                             const Eigen::MatrixXd& y) {
  switch (a) {
    case Activation::linear: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: return (1.0 - y.array().square()).matrix();
    case Activation::sigmoid: return (y.array() * (1.0 - y.array())).matrix();
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}
}  // namespace detail

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct MlpGradients {
  std::vector<DenseLayer> layers;
  Eigen::MatrixXd input;  // d(objective)/d(input), in x batch
};

class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input to layer k
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of layer k
    Eigen::MatrixXd output;
  };

  Mlp() = default;

  /// Zero-initialized network with layer widths `dims` (input first).
  Mlp(const std::vector<std::size_t>& dims, Activation hidden, Activation output)
      : hidden_(hidden), output_(output) {
    if (dims.size() < 2) throw ShapeMismatch("Mlp: need at least input and output widths");
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      if (dims[k] == 0 || dims[k + 1] == 0) throw ShapeMismatch("Mlp: zero-width layer");
      layers_.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims[k + 1]),
                                               static_cast<Eigen::Index>(dims[k])),
                         Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[k + 1]))});
    }
  }

  /// Weights and biases uniform in +-1/sqrt(fan_in).
  static Mlp initialized(const std::vector<std::size_t>& dims, Activation hidden,
                         Activation output, Rng& rng) {
    Mlp net(dims, hidden, output);
    for (auto& layer : net.layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
          layer.weight(r, c) = rng.uniform(-bound, bound);
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = rng.uniform(-bound, bound);
    }
    return net;
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weight.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers_.back().weight.rows()); }
  std::size_t depth() const noexcept { return layers_.size(); }
  Activation hidden_activation() const noexcept { return hidden_; }
  Activation output_activation() const noexcept { return output_; }

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d{input_dim()};
    for (const auto& l : layers_) d.push_back(static_cast<std::size_t>(l.weight.rows()));
    return d;
  }

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const {
    check_input(x);
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    Eigen::MatrixXd a = x;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      Eigen::MatrixXd z = layers_[k].weight * a;
      z.colwise() += layers_[k].bias;
      const Activation act = k + 1 == layers_.size() ? output_ : hidden_;
      Eigen::MatrixXd next = activate(act, z);
      if (cache) {
        cache->inputs.push_back(std::move(a));
        cache->pre.push_back(std::move(z));
      }
      a = std::move(next);
    }
    if (cache) cache->output = a;
    return a;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    return forward(Eigen::MatrixXd(x)).col(0);
  }

  /// Output layer pre-activation (before the output squashing).
  Eigen::MatrixXd forward_pre_output(const Eigen::MatrixXd& x) const {
    check_input(x);
    Eigen::MatrixXd a = x;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      Eigen::MatrixXd z = layers_[k].weight * a;
      z.colwise() += layers_[k].bias;
      if (k + 1 == layers_.size()) return z;
      a = activate(hidden_, z);
    }
    return a;
  }

  /// Reverse pass for an objective whose gradient w.r.t. the output batch is
  /// `grad_output`. Parameter gradients are summed over the batch.
  MlpGradients backward(const Cache& cache, const Eigen::MatrixXd& grad_output,
                        bool want_parameters = true) const {
    if (cache.pre.size() != layers_.size()) throw ShapeMismatch("Mlp::backward: stale cache");
    if (grad_output.rows() != cache.output.rows() || grad_output.cols() != cache.output.cols()) {
      throw ShapeMismatch("Mlp::backward: output gradient shape");
    }
    MlpGradients g;
    if (want_parameters) g.layers.resize(layers_.size());
    Eigen::MatrixXd delta =
        grad_output.cwiseProduct(detail::activation_derivative(output_, cache.pre.back(), cache.output));
    for (std::size_t k = layers_.size(); k-- > 0;) {
      if (want_parameters) {
        g.layers[k].weight = delta * cache.inputs[k].transpose();
        g.layers[k].bias = delta.rowwise().sum();
      }
      Eigen::MatrixXd back = layers_[k].weight.transpose() * delta;
      if (k == 0) {
        g.input = std::move(back);
      } else {
        delta = back.cwiseProduct(
            detail::activation_derivative(hidden_, cache.pre[k - 1], cache.inputs[k]));
      }
    }
    return g;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.hidden_ != b.hidden_ || a.output_ != b.output_ || a.layers_.size() != b.layers_.size())
      return false;
    for (std::size_t k = 0; k < a.layers_.size(); ++k) {
      const auto& x = a.layers_[k];
      const auto& y = b.layers_[k];
      if (x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols()) return false;
      if (x.weight != y.weight || x.bias != y.bias) return false;
    }
    return true;
  }

 private:
  void check_input(const Eigen::MatrixXd& x) const {
    if (layers_.empty()) throw ShapeMismatch("Mlp: empty network");
    if (x.rows() != layers_.front().weight.cols()) {
      throw ShapeMismatch("Mlp: input has " + std::to_string(x.rows()) + " rows, expected " +
                          std::to_string(layers_.front().weight.cols()));
    }
  }

  std::vector<DenseLayer> layers_;
  Activation hidden_ = Activation::relu;
  Activation output_ = Activation::linear;
};

inline double gradient_norm(const MlpGradients& g) {
  double s = 0.0;
  for (const auto& l : g.layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(s);
}

struct AdamState {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<DenseLayer> first;
  std::vector<DenseLayer> second;

  static AdamState for_network(const Mlp& net, double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    for (const auto& l : net.layers()) {
      s.first.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                         Eigen::VectorXd::Zero(l.bias.size())});
    }
    s.second = s.first;
    return s;
  }
};

/// One bias-corrected Adam step minimizing the objective whose gradient is `g`.
inline void adam_step(Mlp& net, const MlpGradients& g, AdamState& s) {
  auto& layers = net.layers();
  if (g.layers.size() != layers.size() || s.first.size() != layers.size()) {
    throw ShapeMismatch("adam_step: layer count mismatch");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
      throw ShapeMismatch("adam_step: gradient shape mismatch");
    }
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
    param.array() -= s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weight, g.layers[k].weight, s.first[k].weight, s.second[k].weight);
    update(layers[k].bias, g.layers[k].bias, s.first[k].bias, s.second[k].bias);
  }
}

/// (1/B) sum (pred - target)^2 and its gradient (2/B)(pred - target).
inline std::pair<double, Eigen::RowVectorXd> mse_loss_and_grad(const Eigen::RowVectorXd& pred,
                                                               const Eigen::RowVectorXd& target) {
  if (pred.size() != target.size() || pred.size() == 0) {
    throw ShapeMismatch("mse_loss_and_grad: length mismatch");
  }
  const Eigen::RowVectorXd diff = pred - target;
  const double b = static_cast<double>(pred.size());
  return {diff.squaredNorm() / b, (2.0 / b) * diff};
}

/// target <- tau * online + (1 - tau) * target.
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
  auto& t = target.layers();
  const auto& o = online.layers();
  if (t.size() != o.size()) throw ShapeMismatch("soft_update: depth mismatch");
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k].weight.rows() != o[k].weight.rows() || t[k].weight.cols() != o[k].weight.cols()) {
      throw ShapeMismatch("soft_update: layer shape mismatch");
    }
    t[k].weight = tau * o[k].weight + (1.0 - tau) * t[k].weight;
    t[k].bias = tau * o[k].bias + (1.0 - tau) * t[k].bias;
  }
}

// Checkpoint layout (all integers and floats little-endian):
//   char[8]   magic "RSMAMLP\0"
//   u32       version (1)
//   u32       layer count L
//   u32[L+1]  widths, input first
//   u8        hidden activation, u8 output activation
//   f64...    per layer: weight row-major, then bias
namespace checkpoint {

inline constexpr std::array<char, 8> kMagic{'R', 'S', 'M', 'A', 'M', 'L', 'P', '\0'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {
template <class T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  std::array<char, sizeof(T)> bytes;
  if (!is.read(bytes.data(), sizeof(T))) throw CheckpointError("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}
}  // namespace detail

inline void write(std::ostream& os, const Mlp& net) {
  os.write(kMagic.data(), kMagic.size());
  detail::put<std::uint32_t>(os, kVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(net.depth()));
  for (std::size_t d : net.dims()) detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(net.hidden_activation()));
  detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(net.output_activation()));
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) detail::put<double>(os, l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) detail::put<double>(os, l.bias(r));
  }
  if (!os) throw CheckpointError("checkpoint: write failed");
}

inline Mlp read(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError("checkpoint: bad magic");
  }
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kVersion) throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  const auto depth = detail::get<std::uint32_t>(is);
  if (depth == 0 || depth > 64) throw CheckpointError("checkpoint: implausible layer count");
  std::vector<std::size_t> dims;
  for (std::uint32_t k = 0; k <= depth; ++k) dims.push_back(detail::get<std::uint32_t>(is));
  const auto hidden = detail::get<std::uint8_t>(is);
  const auto output = detail::get<std::uint8_t>(is);
  if (hidden > 3 || output > 3) throw CheckpointError("checkpoint: unknown activation tag");
  Mlp net(dims, static_cast<Activation>(hidden), static_cast<Activation>(output));
  for (auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = detail::get<double>(is);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = detail::get<double>(is);
  }
  return net;
}

inline void save(const std::string& path, const Mlp& net) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("checkpoint: cannot open " + path);
  write(os, net);
}

inline Mlp load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open " + path);
  return read(is);
}

}  // namespace checkpoint

}  // namespace rsma
