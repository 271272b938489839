#include "asal/head.hpp"

#include "asal/error.hpp"

namespace asal {

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::TemporalMean:
      return "temporal_mean";
  }
  return "unknown";
}

Pooling pooling_from_string(const std::string& s) {
  if (s == "temporal_mean") return Pooling::TemporalMean;
  throw ConfigError("unknown pooling '" + s + "'");
}

namespace {

std::vector<Index> head_sizes(const HeadConfig& config, Index dim) {
  if (!(config.range.lo < config.range.hi)) throw ConfigError("head: score range must satisfy lo < hi");
  std::vector<Index> sizes{dim};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(2);
  return sizes;
}

}  // namespace

Head make_head(const HeadConfig& config, Index dim, Rng& rng) {
  return {config, Mlp<double>::glorot(head_sizes(config, dim), rng)};
}

Head make_zero_head(const HeadConfig& config, Index dim) { return {config, Mlp<double>(head_sizes(config, dim))}; }

RowVector pool(const Matrix& frames) {
  if (frames.rows() < 1) throw DimensionError("pool: sequence has no frames");
  return frames.colwise().mean();
}

Matrix pool_backward(const RowVector& pooled_grad, Index frame_count) {
  return pooled_grad.replicate(frame_count, 1) / static_cast<double>(frame_count);
}

Matrix pool_batch(std::span<const Matrix* const> sequences) {
  if (sequences.empty()) return Matrix(0, 0);
  Matrix out(static_cast<Index>(sequences.size()), sequences.front()->cols());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (sequences[i]->cols() != out.cols()) {
      throw DimensionError("pool_batch: sequence " + std::to_string(i) + " is " + shape_of(*sequences[i]) +
                           ", expected " + std::to_string(out.cols()) + " columns");
    }
    out.row(static_cast<Index>(i)) = pool(*sequences[i]);
  }
  return out;
}

ScoreDistribution predict_distribution(const Head& head, const Matrix& frames) {
  if (frames.cols() != head.input_dim()) {
    throw DimensionError("predict_distribution: features are " + shape_of(frames) + " but the head expects " +
                         std::to_string(head.input_dim()) + " columns");
  }
  const auto fwd = mlp_forward(head.net, pool(frames));
  return {fwd.output(0, 0), fwd.output(0, 1)};
}

double predict_eval(const Head& head, const Matrix& frames) { return predict_distribution(head, frames).mu; }

HeadPass head_forward(const Head& head, const Matrix& pooled, const Vector& eps, bool sample) {
  if (sample && eps.size() != pooled.rows()) {
    throw DimensionError("head_forward: " + std::to_string(pooled.rows()) + " rows but " +
                         std::to_string(eps.size()) + " noise draws");
  }
  auto fwd = mlp_forward(head.net, pooled);
  HeadPass pass;
  pass.sample = sample;
  pass.eps = sample ? eps : Vector::Zero(pooled.rows());
  pass.scores = fwd.output.col(0);
  if (sample) {
    pass.scores.array() += pass.eps.array() * (0.5 * fwd.output.col(1).array()).exp();
  }
  pass.outputs = std::move(fwd.output);
  pass.tape = std::move(fwd.tape);
  return pass;
}

HeadGradients head_backward(const Head& head, const HeadPass& pass, const Vector& score_grad) {
  if (score_grad.size() != pass.scores.size()) {
    throw DimensionError("head_backward: gradient has " + std::to_string(score_grad.size()) + " entries for " +
                         std::to_string(pass.scores.size()) + " scores");
  }
  // d s / d mu = 1, d s / d log_var = eps * sigma / 2
  Matrix out_grad(pass.outputs.rows(), 2);
  out_grad.col(0) = score_grad;
  if (pass.sample) {
    out_grad.col(1) = score_grad.array() * pass.eps.array() * 0.5 * (0.5 * pass.outputs.col(1).array()).exp();
  } else {
    out_grad.col(1).setZero();
  }
  auto g = mlp_backward(head.net, pass.tape, out_grad);
  return {std::move(g.params), std::move(g.input)};
}

}  // namespace asal
