#pragma once

#include <string>
#include <vector>

#include "asal/numkit.hpp"

namespace asal {

// Per-frame feature vectors for one video: T rows, D columns.
struct FeatureSequence {
  std::string id;
  Matrix frames;

  Index frame_count() const { return frames.rows(); }
  Index dim() const { return frames.cols(); }
};

struct ScoredSample {
  FeatureSequence features;
  double score = 0.0;
  std::string session;
  std::string variant;  // optional grouping tag, empty when absent
};

struct ScoreRange {
  double lo = 1.0;
  double hi = 5.0;

  double width() const { return hi - lo; }
};

}  // namespace asal
