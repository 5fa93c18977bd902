#pragma once

#include <cstdint>
#include <vector>

#include "urm/model/urm.hpp"
#include "urm/tasks/augment.hpp"
#include "urm/tasks/evaluate.hpp"

namespace urm::model {

struct Candidate {
  tasks::Grid grid;
  double log_prob = 0.0;  // log-sum-exp over the views that produced it
  std::size_t votes = 0;
};

struct PredictResult {
  std::vector<Candidate> candidates;  // [0] is the plain greedy decode
  bool fewer_than_requested = false;
  double mean_act_steps = 0.0;
};

// Greedy decode of a rows x cols grid from logits rows [row0, row0 + T):
// argmax over colour tokens at each cell position. log_prob receives the sum
// of the chosen cells' log-softmax values.
template <typename Real>
tasks::Grid decode_grid(const NdArray<Real>& logits, std::size_t row0, std::size_t rows, std::size_t cols,
                        double* log_prob = nullptr);

// Non-identity views: the 7 other dihedral elements, then random dihedral +
// colour-permutation pairs. Sudoku families permute only their digits.
std::vector<tasks::Augmentation> default_views(const std::string& family, std::size_t count,
                                               std::uint64_t seed);

// Candidate 1 is the greedy decode of the unaugmented input. The remaining
// candidates come from decoding each augmented view, mapping it back with the
// inverse augmentation, merging duplicates and ranking by aggregate
// log-probability. The output grid is assumed to have the input's shape.
template <typename Real>
PredictResult predict(const UrmModel<Real>& model, const tasks::PuzzleInstance& instance, std::size_t n,
                      const std::vector<tasks::Augmentation>& views);

// Greedy decode of many instances, batched `chunk` sequences at a time.
// Element i equals predict(model, instances[i], 1, {}).
template <typename Real>
std::vector<tasks::Prediction> greedy_predictions(const UrmModel<Real>& model,
                                                  std::span<const tasks::PuzzleInstance> instances,
                                                  std::size_t chunk = 64);

// Adapter for evaluate_pass_n; uses default_views with max(8, 2n) views.
template <typename Real>
tasks::Predictor make_predictor(const UrmModel<Real>& model, std::uint64_t seed = 0);

}  // namespace urm::model
