#pragma once

// Evaluation metrics: PLCC, SRCC and RL2E, plus the pooled ("overall")
// variants that concatenate samples across sessions.

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "asal/numkit.hpp"

namespace asal {

// An empty value marks a metric that is undefined on its input (e.g. a
// constant prediction vector). It is never coerced to 0.
using Metric = std::optional<double>;

namespace detail {

template <typename Derived>
bool is_constant(const Eigen::MatrixBase<Derived>& v) {
  return v.size() == 0 || v.maxCoeff() == v.minCoeff();
}

template <typename DerivedP, typename DerivedT>
void check_same_length(const char* who, const Eigen::MatrixBase<DerivedP>& pred,
                       const Eigen::MatrixBase<DerivedT>& truth) {
  if (pred.size() != truth.size()) {
    throw DimensionError(std::string(who) + ": pred has " + std::to_string(pred.size()) + " entries, truth has " +
                         std::to_string(truth.size()));
  }
}

}  // namespace detail

template <typename DerivedP, typename DerivedT>
Metric plcc(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedT>& truth) {
  detail::check_same_length("plcc", pred, truth);
  if (pred.size() < 2 || detail::is_constant(pred) || detail::is_constant(truth)) return std::nullopt;
  const Vector a = pred.template cast<double>().array() - pred.template cast<double>().mean();
  const Vector b = truth.template cast<double>().array() - truth.template cast<double>().mean();
  const double r = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
  return std::clamp(r, -1.0, 1.0);
}

// 1-based ranks; tied values share the average of the positions they occupy.
template <typename Derived>
Vector fractional_ranks(const Eigen::MatrixBase<Derived>& v) {
  const Index n = v.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return v(i) < v(j); });
  Vector ranks(n);
  Index start = 0;
  while (start < n) {
    Index end = start + 1;
    while (end < n && v(order[end]) == v(order[start])) ++end;
    const double avg = 0.5 * static_cast<double>(start + 1 + end);  // mean of positions start+1..end
    for (Index k = start; k < end; ++k) ranks(order[k]) = avg;
    start = end;
  }
  return ranks;
}

template <typename DerivedP, typename DerivedT>
Metric srcc(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedT>& truth) {
  detail::check_same_length("srcc", pred, truth);
  if (pred.size() < 2 || detail::is_constant(pred) || detail::is_constant(truth)) return std::nullopt;
  return plcc(fractional_ranks(pred), fractional_ranks(truth));
}

// Mean of squared errors normalized by the score range.
template <typename DerivedP, typename DerivedT>
double rl2e(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedT>& truth, double s_max,
            double s_min) {
  detail::check_same_length("rl2e", pred, truth);
  if (!(s_max > s_min)) {
    throw std::invalid_argument("rl2e: score range [" + std::to_string(s_min) + ", " + std::to_string(s_max) +
                                "] is empty");
  }
  if (pred.size() < 1) throw DimensionError("rl2e: no samples");
  const double range = s_max - s_min;
  return ((pred.template cast<double>() - truth.template cast<double>()).array() / range).square().mean();
}

struct Predictions {
  Vector pred;
  Vector truth;
};

struct PooledMetrics {
  Metric plcc;
  Metric srcc;
  double rl2e = 0.0;
  Index count = 0;
};

inline Predictions concatenate(std::span<const Predictions> parts) {
  Index total = 0;
  for (const auto& p : parts) {
    detail::check_same_length("concatenate", p.pred, p.truth);
    total += p.pred.size();
  }
  Predictions all{Vector(total), Vector(total)};
  Index k = 0;
  for (const auto& p : parts) {
    all.pred.segment(k, p.pred.size()) = p.pred;
    all.truth.segment(k, p.truth.size()) = p.truth;
    k += p.pred.size();
  }
  return all;
}

// Metrics computed once over the concatenation of every session's samples,
// not an average of per-session values.
inline PooledMetrics pooled_metrics(std::span<const Predictions> per_session, double s_max, double s_min) {
  if (per_session.empty()) throw std::invalid_argument("pooled_metrics: no sessions");
  const Predictions all = concatenate(per_session);
  if (all.pred.size() < 2) throw std::invalid_argument("pooled_metrics: fewer than 2 samples in total");
  return {plcc(all.pred, all.truth), srcc(all.pred, all.truth), rl2e(all.pred, all.truth, s_max, s_min),
          all.pred.size()};
}

}  // namespace asal
