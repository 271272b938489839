#pragma once

// Dense numerical kernel: matrix aliases, a seeded random source, a rectifier
// perceptron with explicit forward/backward passes, and the Adam optimizer.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "asal/error.hpp"

namespace asal {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
std::string shape_of(const Eigen::EigenBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

// Seeded generator with portable output. mt19937_64's sequence is fixed by the
// standard; the distributions on top of it are implemented here because the
// standard library's are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Box–Muller; the paired sine variate is discarded so the state stays a
  // plain engine state.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (!is) throw std::invalid_argument("Rng::set_state: malformed state");
  }

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

template <typename Scalar = double>
VectorX<Scalar> gaussian_sample(Rng& rng, Index n) {
  if (n < 0) throw std::invalid_argument("gaussian_sample: negative count");
  VectorX<Scalar> out(n);
  for (Index i = 0; i < n; ++i) out(i) = static_cast<Scalar>(rng.normal());
  return out;
}

// Names a contiguous slice of a flattened parameter vector.
struct ParamBlockInfo {
  std::string name;
  Index offset = 0;
  Index size = 0;
};

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weight;  // in x out
  RowVectorX<Scalar> bias;  // 1 x out
};

// Fully connected network. Rectifier on every layer but the last, identity on
// the output. Also used as the gradient container for itself.
template <typename Scalar>
class Mlp {
 public:
  Mlp() = default;

  // Zero-initialized network with the given layer sizes (input first).
  explicit Mlp(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw DimensionError("Mlp: need at least input and output sizes");
    for (Index s : sizes_) {
      if (s <= 0) throw DimensionError("Mlp: layer sizes must be positive");
    }
    layers_.resize(sizes_.size() - 1);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].weight = MatrixX<Scalar>::Zero(sizes_[l], sizes_[l + 1]);
      layers_[l].bias = RowVectorX<Scalar>::Zero(sizes_[l + 1]);
    }
  }

  // Weights uniform in ±sqrt(6 / (fan_in + fan_out)), biases zero.
  static Mlp glorot(std::vector<Index> sizes, Rng& rng) {
    Mlp net(std::move(sizes));
    for (auto& layer : net.layers_) {
      const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
      for (Index i = 0; i < layer.weight.size(); ++i) {
        layer.weight.data()[i] = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound);
      }
    }
    return net;
  }

  Mlp zeros_like() const { return Mlp(sizes_); }

  const std::vector<Index>& sizes() const { return sizes_; }
  Index input_size() const { return sizes_.front(); }
  Index output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return layers_.size(); }

  DenseLayer<Scalar>& layer(std::size_t l) { return layers_[l]; }
  const DenseLayer<Scalar>& layer(std::size_t l) const { return layers_[l]; }

  Index parameter_count() const {
    Index n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) n += (sizes_[l] + 1) * sizes_[l + 1];
    return n;
  }

  // Flattened layout: per layer, weight (row-major) then bias.
  void pack(Eigen::Ref<VectorX<Scalar>> out) const {
    Index k = 0;
    for (const auto& layer : layers_) {
      out.segment(k, layer.weight.size()) = Eigen::Map<const VectorX<Scalar>>(layer.weight.data(), layer.weight.size());
      k += layer.weight.size();
      out.segment(k, layer.bias.size()) = layer.bias.transpose();
      k += layer.bias.size();
    }
  }

  void unpack(const Eigen::Ref<const VectorX<Scalar>>& in) {
    Index k = 0;
    for (auto& layer : layers_) {
      Eigen::Map<VectorX<Scalar>>(layer.weight.data(), layer.weight.size()) = in.segment(k, layer.weight.size());
      k += layer.weight.size();
      layer.bias = in.segment(k, layer.bias.size()).transpose();
      k += layer.bias.size();
    }
  }

  std::vector<ParamBlockInfo> blocks(const std::string& prefix, Index offset = 0) const {
    std::vector<ParamBlockInfo> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto tag = prefix + ".layer" + std::to_string(l);
      out.push_back({tag + ".weight", offset, layers_[l].weight.size()});
      offset += layers_[l].weight.size();
      out.push_back({tag + ".bias", offset, layers_[l].bias.size()});
      offset += layers_[l].bias.size();
    }
    return out;
  }

  Mlp& operator+=(const Mlp& other) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].weight += other.layers_[l].weight;
      layers_[l].bias += other.layers_[l].bias;
    }
    return *this;
  }

  Mlp& operator*=(Scalar s) {
    for (auto& layer : layers_) {
      layer.weight *= s;
      layer.bias *= s;
    }
    return *this;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.sizes_ != b.sizes_) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
      if (a.layers_[l].weight != b.layers_[l].weight || a.layers_[l].bias != b.layers_[l].bias) return false;
    }
    return true;
  }

 private:
  std::vector<Index> sizes_;
  std::vector<DenseLayer<Scalar>> layers_;
};

// Activation cache from mlp_forward: the input to each layer and each
// layer's pre-activation.
template <typename Scalar>
struct MlpTape {
  std::vector<MatrixX<Scalar>> inputs;
  std::vector<MatrixX<Scalar>> pre_activations;
};

template <typename Scalar>
struct MlpForward {
  MatrixX<Scalar> output;
  MlpTape<Scalar> tape;
};

template <typename Scalar>
struct MlpGradients {
  Mlp<Scalar> params;
  MatrixX<Scalar> input;
};

template <typename Scalar, typename Derived>
MlpForward<Scalar> mlp_forward(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& input) {
  if (input.cols() != net.input_size()) {
    throw DimensionError("mlp_forward: input is " + shape_of(input) + " but the first layer expects " +
                         std::to_string(net.input_size()) + " columns");
  }
  MlpForward<Scalar> fwd;
  MatrixX<Scalar> x = input;
  const std::size_t n_layers = net.layer_count();
  fwd.tape.inputs.reserve(n_layers);
  fwd.tape.pre_activations.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = net.layer(l);
    MatrixX<Scalar> z = x * layer.weight;
    z.rowwise() += layer.bias;
    fwd.tape.inputs.push_back(std::move(x));
    x = (l + 1 < n_layers) ? MatrixX<Scalar>(z.cwiseMax(Scalar(0))) : z;
    fwd.tape.pre_activations.push_back(std::move(z));
  }
  fwd.output = std::move(x);
  return fwd;
}

template <typename Scalar, typename Derived>
MlpGradients<Scalar> mlp_backward(const Mlp<Scalar>& net, const MlpTape<Scalar>& tape,
                                  const Eigen::MatrixBase<Derived>& output_grad) {
  const std::size_t n_layers = net.layer_count();
  if (tape.inputs.size() != n_layers || tape.pre_activations.size() != n_layers) {
    throw DimensionError("mlp_backward: tape holds " + std::to_string(tape.inputs.size()) +
                         " layers but the network has " + std::to_string(n_layers));
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (tape.inputs[l].cols() != net.layer(l).weight.rows() ||
        tape.pre_activations[l].cols() != net.layer(l).weight.cols()) {
      throw DimensionError("mlp_backward: tape layer " + std::to_string(l) + " does not match the network");
    }
  }
  const auto& last = tape.pre_activations.back();
  if (output_grad.rows() != last.rows() || output_grad.cols() != last.cols()) {
    throw DimensionError("mlp_backward: output gradient is " + shape_of(output_grad) +
                         " but the forward output was " + shape_of(last));
  }

  MlpGradients<Scalar> grads{net.zeros_like(), {}};
  MatrixX<Scalar> delta = output_grad;
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 < n_layers) {
      delta = (tape.pre_activations[l].array() > Scalar(0)).select(delta, Scalar(0));
    }
    auto& g = grads.params.layer(l);
    g.weight.noalias() = tape.inputs[l].transpose() * delta;
    g.bias = delta.colwise().sum();
    delta = (delta * net.layer(l).weight.transpose()).eval();
  }
  grads.input = std::move(delta);
  return grads;
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;
};

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  VectorX<Scalar> first_moment;
  VectorX<Scalar> second_moment;
  std::int64_t step = 0;

  static AdamState init(Index parameter_count, const AdamConfig& cfg) {
    return {cfg, VectorX<Scalar>::Zero(parameter_count), VectorX<Scalar>::Zero(parameter_count), 0};
  }
};

// One Adam update with bias correction. Weight decay is decoupled: params are
// scaled by (1 - lr * wd) before the Adam delta is applied.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Eigen::Ref<VectorX<std::type_identity_t<Scalar>>> params,
               const Eigen::Ref<const VectorX<std::type_identity_t<Scalar>>>& grads,
               std::span<const ParamBlockInfo> layout = {}) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw DimensionError("adam_step: params " + std::to_string(params.size()) + ", grads " +
                         std::to_string(grads.size()) + ", moments " + std::to_string(state.first_moment.size()));
  }
  if (!all_finite(grads)) {
    Index bad = 0;
    while (std::isfinite(static_cast<double>(grads(bad)))) ++bad;
    std::string name = "param[" + std::to_string(bad) + "]";
    for (const auto& block : layout) {
      if (bad >= block.offset && bad < block.offset + block.size) {
        name = block.name;
        break;
      }
    }
    throw NonFiniteGradient(name);
  }

  const auto& c = state.config;
  ++state.step;
  state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grads;
  state.second_moment = c.beta2 * state.second_moment + (1.0 - c.beta2) * grads.cwiseAbs2();
  const double t = static_cast<double>(state.step);
  const double m_corr = 1.0 - std::pow(c.beta1, t);
  const double v_corr = 1.0 - std::pow(c.beta2, t);

  params *= Scalar(1.0 - c.learning_rate * c.weight_decay);
  params.array() -= c.learning_rate * (state.first_moment.array() / m_corr) /
                    ((state.second_moment.array() / v_corr).sqrt() + c.epsilon);
}

}  // namespace asal
