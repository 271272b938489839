#pragma once

// Training losses with analytic gradients.

#include <algorithm>
#include <cmath>

#include "asal/numkit.hpp"

namespace asal {

struct LossWeights {
  double lambda = 0.05;  // correlation vs. precision
  double alpha = 1.0;    // replay term
  double beta = 1.0;     // adapter regularization
};

struct LossValue {
  double value = 0.0;
  Vector grad;  // d value / d pred
};

// Variance floor below which Pearson correlation is treated as undefined.
inline constexpr double kDegenerateVariance = 1e-12;

// 1 - PLCC(pred, truth), computed within the batch.
template <typename DerivedP, typename DerivedT>
LossValue correlation_loss(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedT>& truth) {
  const Index n = pred.size();
  if (truth.size() != n) {
    throw DimensionError("correlation_loss: pred has " + std::to_string(n) + " entries, truth has " +
                         std::to_string(truth.size()));
  }
  if (n < 2) throw DegenerateBatch("correlation_loss: batch of " + std::to_string(n) + " sample(s)");

  const Vector a = pred.template cast<double>().array() - pred.template cast<double>().mean();
  const Vector b = truth.template cast<double>().array() - truth.template cast<double>().mean();
  const double saa = a.squaredNorm();
  const double sbb = b.squaredNorm();
  if (saa / n < kDegenerateVariance || sbb / n < kDegenerateVariance) {
    throw DegenerateBatch("correlation_loss: zero-variance " + std::string(saa / n < kDegenerateVariance ? "predictions" : "targets"));
  }
  const double denom = std::sqrt(saa * sbb);
  const double r = a.dot(b) / denom;

  LossValue out;
  out.value = 1.0 - std::clamp(r, -1.0, 1.0);
  out.grad = -(b / denom - (r / saa) * a);
  return out;
}

// (1 / 2N) * sum (truth - pred)^2
template <typename DerivedP, typename DerivedT>
LossValue mse_loss(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedT>& truth) {
  const Index n = pred.size();
  if (truth.size() != n) {
    throw DimensionError("mse_loss: pred has " + std::to_string(n) + " entries, truth has " +
                         std::to_string(truth.size()));
  }
  if (n < 1) throw DimensionError("mse_loss: empty batch");
  const Vector residual = pred.template cast<double>() - truth.template cast<double>();
  return {residual.squaredNorm() / (2.0 * n), residual / static_cast<double>(n)};
}

// L_cor + lambda * L_mse
template <typename DerivedP, typename DerivedT>
LossValue combined_loss(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedT>& truth,
                        double lambda) {
  LossValue cor = correlation_loss(pred, truth);
  if (lambda == 0.0) return cor;
  const LossValue mse = mse_loss(pred, truth);
  cor.value += lambda * mse.value;
  cor.grad += lambda * mse.grad;
  return cor;
}

struct RegLossValue {
  double value = 0.0;
  Matrix grad;  // d value / d reconstructed
};

// Euclidean norm of the full difference (not squared). The subgradient at a
// zero difference is taken as 0.
template <typename DerivedO, typename DerivedR>
RegLossValue reg_loss(const Eigen::MatrixBase<DerivedO>& original, const Eigen::MatrixBase<DerivedR>& reconstructed) {
  if (original.rows() != reconstructed.rows() || original.cols() != reconstructed.cols()) {
    throw DimensionError("reg_loss: original is " + shape_of(original) + " but reconstruction is " +
                         shape_of(reconstructed));
  }
  const Matrix diff = reconstructed.template cast<double>() - original.template cast<double>();
  const double norm = diff.norm();
  RegLossValue out;
  out.value = norm;
  out.grad = norm < 1e-12 ? Matrix::Zero(diff.rows(), diff.cols()) : Matrix(diff / norm);
  return out;
}

}  // namespace asal
