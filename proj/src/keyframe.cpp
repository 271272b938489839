#include "asal/keyframe.hpp"

#include <algorithm>
#include <limits>

#include "asal/error.hpp"

namespace asal {

Vector salience_scores(const Matrix& frames) {
  if (frames.rows() < 1) throw DimensionError("salience_scores: sequence has no frames");
  const RowVector mean = frames.colwise().mean();
  return (frames.rowwise() - mean).rowwise().norm();
}

double cosine_similarity(const RowVector& a, const RowVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

Vector normalized(const Vector& salience) {
  const double top = salience.maxCoeff();
  return top > 0.0 ? Vector(salience / top) : Vector::Zero(salience.size());
}

}  // namespace

KeyFrameSelection select_key_frames(const Matrix& frames, Index k, double diversity) {
  const Index t = frames.rows();
  if (k < 1 || k > t) {
    throw DimensionError("select_key_frames: K = " + std::to_string(k) + " is outside [1, " + std::to_string(t) + "]");
  }
  const Vector salience = salience_scores(frames);
  KeyFrameSelection sel;
  sel.config = {k, diversity};

  if (k == t) {
    sel.indices.resize(static_cast<std::size_t>(t));
    for (Index i = 0; i < t; ++i) sel.indices[static_cast<std::size_t>(i)] = i;
  } else {
    const Vector rel = normalized(salience);
    std::vector<bool> taken(static_cast<std::size_t>(t), false);
    // Running max cosine of each frame to the picks so far.
    Vector redundancy = Vector::Constant(t, -std::numeric_limits<double>::infinity());
    for (Index pick = 0; pick < k; ++pick) {
      Index best = -1;
      double best_value = -std::numeric_limits<double>::infinity();
      for (Index i = 0; i < t; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        const double value = pick == 0 ? rel(i) : rel(i) - diversity * redundancy(i);
        if (value > best_value) {
          best_value = value;
          best = i;
        }
      }
      taken[static_cast<std::size_t>(best)] = true;
      sel.indices.push_back(best);
      for (Index i = 0; i < t; ++i) {
        if (!taken[static_cast<std::size_t>(i)]) {
          redundancy(i) = std::max(redundancy(i), cosine_similarity(frames.row(i), frames.row(best)));
        }
      }
    }
    std::sort(sel.indices.begin(), sel.indices.end());
  }

  sel.salience.resize(k);
  for (Index j = 0; j < k; ++j) sel.salience(j) = salience(sel.indices[static_cast<std::size_t>(j)]);
  return sel;
}

Matrix phi_select(const Matrix& frames, Index k, double diversity) {
  const auto sel = select_key_frames(frames, k, diversity);
  Matrix out(k, frames.cols());
  for (Index j = 0; j < k; ++j) out.row(j) = frames.row(sel.indices[static_cast<std::size_t>(j)]);
  return out;
}

double selection_objective(const Matrix& frames, const std::vector<Index>& indices, double diversity) {
  const Vector rel = normalized(salience_scores(frames));
  double value = 0.0;
  for (std::size_t a = 0; a < indices.size(); ++a) {
    value += rel(indices[a]);
    for (std::size_t b = a + 1; b < indices.size(); ++b) {
      value -= diversity * cosine_similarity(frames.row(indices[a]), frames.row(indices[b]));
    }
  }
  return value;
}

}  // namespace asal
