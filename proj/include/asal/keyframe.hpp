#pragma once

// Key-frame selection in feature space. Relevance of a frame is its distance
// from the temporal mean; frames are picked greedily, trading relevance
// against cosine similarity to frames already chosen.

#include <vector>

#include "asal/numkit.hpp"

namespace asal {

struct KeyFrameConfig {
  Index count = 3;         // K
  double diversity = 0.5;  // weight on the redundancy penalty
};

struct KeyFrameSelection {
  std::vector<Index> indices;  // ascending, 0-based
  Vector salience;             // raw relevance of each selected frame, in index order
  KeyFrameConfig config;
};

Vector salience_scores(const Matrix& frames);

// Cosine similarity, defined as 0 when either vector has zero norm.
double cosine_similarity(const RowVector& a, const RowVector& b);

// Greedy selection. The first pick maximizes salience; each later pick
// maximizes (salience / max salience) - diversity * max cosine to the picks
// so far. Ties go to the lowest frame index.
KeyFrameSelection select_key_frames(const Matrix& frames, Index k, double diversity);

// Rows of the selected frames, in temporal order (K x D).
Matrix phi_select(const Matrix& frames, Index k, double diversity);

// Sum of normalized salience minus diversity * sum of pairwise cosine over the
// chosen set. The objective the greedy pass approximates.
double selection_objective(const Matrix& frames, const std::vector<Index>& indices, double diversity);

}  // namespace asal
