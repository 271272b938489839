#include "asal/adapter.hpp"

#include <cmath>

#include "asal/error.hpp"
#include "asal/keyframe.hpp"
#include "asal/losses.hpp"

namespace asal {

void Adapter::pack(Eigen::Ref<Vector> out) const {
  out.head(logits.size()) = Eigen::Map<const Vector>(logits.data(), logits.size());
  refine.pack(out.segment(logits.size(), refine.parameter_count()));
}

void Adapter::unpack(const Eigen::Ref<const Vector>& in) {
  Eigen::Map<Vector>(logits.data(), logits.size()) = in.head(logits.size());
  refine.unpack(in.segment(logits.size(), refine.parameter_count()));
}

std::vector<ParamBlockInfo> Adapter::blocks(Index offset) const {
  std::vector<ParamBlockInfo> out{{"adapter.logits", offset, logits.size()}};
  auto rest = refine.blocks("adapter.refine", offset + logits.size());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

Adapter Adapter::zeros_like() const {
  return {config, Matrix::Zero(logits.rows(), logits.cols()), refine.zeros_like()};
}

Adapter& Adapter::operator+=(const Adapter& other) {
  logits += other.logits;
  refine += other.refine;
  return *this;
}

Adapter& Adapter::operator*=(double s) {
  logits *= s;
  refine *= s;
  return *this;
}

Adapter make_adapter(const AdapterConfig& config, Rng& rng) {
  if (config.frames < 1 || config.key_frames < 1 || config.key_frames > config.frames || config.dim < 1 ||
      config.hidden < 1) {
    throw ConfigError("adapter: need 1 <= K <= T, D >= 1 and hidden >= 1");
  }
  Adapter a;
  a.config = config;
  a.logits = Matrix::Zero(config.frames, config.key_frames);
  for (Index t = 0; t < config.frames; ++t) {
    const Index slot =
        config.frames == 1
            ? 0
            : static_cast<Index>(std::lround(static_cast<double>(t * (config.key_frames - 1)) /
                                             static_cast<double>(config.frames - 1)));
    a.logits(t, slot) = config.init_sharpness;
  }
  a.refine = Mlp<double>::glorot({config.dim, config.hidden, config.dim}, rng);
  a.refine.layer(1).weight.setZero();
  return a;
}

Matrix mixing_weights(const Adapter& adapter) {
  Matrix w = adapter.logits;
  const Vector row_max = w.rowwise().maxCoeff();
  w = (w.colwise() - row_max).array().exp();
  const Vector row_sum = w.rowwise().sum();
  for (Index t = 0; t < w.rows(); ++t) w.row(t) /= row_sum(t);
  return w;
}

AdapterPass adapter_forward(const Adapter& adapter, const Matrix& compressed) {
  const auto& c = adapter.config;
  if (compressed.rows() != c.key_frames || compressed.cols() != c.dim) {
    throw DimensionError("reconstruct: compressed features are " + shape_of(compressed) + ", expected " +
                         shape_string(c.key_frames, c.dim));
  }
  AdapterPass pass;
  pass.compressed = compressed;
  pass.mix = mixing_weights(adapter);
  pass.base = pass.mix * compressed;
  auto fwd = mlp_forward(adapter.refine, pass.base);
  pass.output = pass.base + fwd.output;
  pass.tape = std::move(fwd.tape);
  return pass;
}

Matrix reconstruct(const Adapter& adapter, const Matrix& compressed) {
  return adapter_forward(adapter, compressed).output;
}

Adapter adapter_backward(const Adapter& adapter, const AdapterPass& pass, const Matrix& output_grad) {
  if (output_grad.rows() != pass.output.rows() || output_grad.cols() != pass.output.cols()) {
    throw DimensionError("adapter_backward: gradient is " + shape_of(output_grad) + ", output was " +
                         shape_of(pass.output));
  }
  auto mlp_grads = mlp_backward(adapter.refine, pass.tape, output_grad);
  const Matrix base_grad = output_grad + mlp_grads.input;
  const Matrix mix_grad = base_grad * pass.compressed.transpose();
  // softmax Jacobian, row by row
  const Vector inner = (pass.mix.array() * mix_grad.array()).rowwise().sum();
  Matrix logit_grad = pass.mix.array() * (mix_grad.colwise() - inner).array();
  return {adapter.config, std::move(logit_grad), std::move(mlp_grads.params)};
}

RegGradients reg_loss_gradients(const Adapter& adapter, std::span<const Matrix* const> current, double diversity) {
  RegGradients out{0.0, adapter.zeros_like()};
  for (const Matrix* h : current) {
    const auto pass = adapter_forward(adapter, phi_select(*h, adapter.config.key_frames, diversity));
    const auto reg = reg_loss(*h, pass.output);
    out.value += reg.value;
    out.grads += adapter_backward(adapter, pass, reg.grad);
  }
  return out;
}

double adapter_train_step(Adapter& adapter, AdamState<double>& optimizer, std::span<const Matrix* const> current,
                          double diversity) {
  if (current.empty()) throw std::invalid_argument("adapter_train_step: empty batch");
  const auto reg = reg_loss_gradients(adapter, current, diversity);
  Vector params(adapter.parameter_count());
  Vector grads(adapter.parameter_count());
  adapter.pack(params);
  reg.grads.pack(grads);
  const auto layout = adapter.blocks();
  adam_step(optimizer, params, grads, layout);
  adapter.unpack(params);
  return reg.value;
}

}  // namespace asal
