#pragma once

// Feature adapter: expands a K x D key-frame sequence back to T x D.
//
//   base_t   = sum_k softmax(logits_t)_k * compressed_k
//   output_t = base_t + refine(base_t)
//
// refine is a per-frame perceptron D -> hidden -> D whose output layer starts
// at zero, so a fresh adapter is pure temporal mixing.

#include <span>

#include "asal/numkit.hpp"

namespace asal {

struct AdapterConfig {
  Index frames = 16;     // T
  Index key_frames = 3;  // K
  Index dim = 0;         // D
  Index hidden = 32;
  // Logit placed on the nearest key slot of each output row at init.
  double init_sharpness = 4.0;
};

// Also used as the gradient container for itself.
struct Adapter {
  AdapterConfig config;
  Matrix logits;  // T x K
  Mlp<double> refine;

  Index parameter_count() const { return logits.size() + refine.parameter_count(); }
  void pack(Eigen::Ref<Vector> out) const;
  void unpack(const Eigen::Ref<const Vector>& in);
  std::vector<ParamBlockInfo> blocks(Index offset = 0) const;
  Adapter zeros_like() const;

  Adapter& operator+=(const Adapter& other);
  Adapter& operator*=(double s);
};

// Interpolation-initialized logits (row t peaks on slot round(t (K-1)/(T-1))),
// Glorot hidden layer, zero output layer.
Adapter make_adapter(const AdapterConfig& config, Rng& rng);

// Row-wise softmax of the mixing logits.
Matrix mixing_weights(const Adapter& adapter);

Matrix reconstruct(const Adapter& adapter, const Matrix& compressed);

struct AdapterPass {
  Matrix compressed;
  Matrix mix;
  Matrix base;
  MlpTape<double> tape;
  Matrix output;
};

AdapterPass adapter_forward(const Adapter& adapter, const Matrix& compressed);

// Gradients w.r.t. the adapter parameters for an upstream gradient on the
// T x D output. The compressed input is treated as a constant.
Adapter adapter_backward(const Adapter& adapter, const AdapterPass& pass, const Matrix& output_grad);

struct RegGradients {
  double value = 0.0;
  Adapter grads;
};

// Sum over the batch of ||h - p(phi(h))||_2. Key-frame selection is a
// constant of the computation (no gradient through the discrete choice).
RegGradients reg_loss_gradients(const Adapter& adapter, std::span<const Matrix* const> current, double diversity);

// One optimizer step on the regularization loss alone. Returns its value
// before the step.
double adapter_train_step(Adapter& adapter, AdamState<double>& optimizer, std::span<const Matrix* const> current,
                          double diversity);

}  // namespace asal
