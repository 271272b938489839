#pragma once

// Probabilistic regression head. A perceptron maps the temporally pooled
// feature vector to (mu, log_var) of a Gaussian over the score; training
// draws s = mu + eps * sigma, evaluation returns mu.

#include <cmath>
#include <string>
#include <vector>

#include "asal/numkit.hpp"
#include "asal/types.hpp"

namespace asal {

enum class Pooling { TemporalMean };

std::string to_string(Pooling p);
Pooling pooling_from_string(const std::string& s);

struct HeadConfig {
  Pooling pooling = Pooling::TemporalMean;
  std::vector<Index> hidden{64, 32};
  ScoreRange range;
};

struct ScoreDistribution {
  double mu = 0.0;
  double log_var = 0.0;

  double sigma() const { return std::exp(0.5 * log_var); }
};

struct Head {
  HeadConfig config;
  Mlp<double> net;  // sizes: {D, hidden..., 2}; output column 0 = mu, 1 = log_var

  Index input_dim() const { return net.input_size(); }
};

// Glorot-initialized head for D-dimensional features.
Head make_head(const HeadConfig& config, Index dim, Rng& rng);
// All weights and biases zero: mu = 0, log_var = 0.
Head make_zero_head(const HeadConfig& config, Index dim);

RowVector pool(const Matrix& frames);
// Adjoint of pool: spreads a pooled gradient evenly over T frames.
Matrix pool_backward(const RowVector& pooled_grad, Index frame_count);

ScoreDistribution predict_distribution(const Head& head, const Matrix& frames);

inline double reparam_sample(const ScoreDistribution& dist, double eps) { return dist.mu + eps * dist.sigma(); }

double predict_eval(const Head& head, const Matrix& frames);

// Batched training pass over pooled rows (B x D) with one eps per row.
// With sample = false the output is mu and eps is ignored.
struct HeadPass {
  Matrix outputs;  // B x 2
  MlpTape<double> tape;
  Vector eps;
  Vector scores;
  bool sample = true;
};

HeadPass head_forward(const Head& head, const Matrix& pooled, const Vector& eps, bool sample = true);

struct HeadGradients {
  Mlp<double> net;
  Matrix pooled;  // B x D
};

HeadGradients head_backward(const Head& head, const HeadPass& pass, const Vector& score_grad);

// Pools each sequence into one row.
Matrix pool_batch(std::span<const Matrix* const> sequences);

}  // namespace asal
