#pragma once

#include <functional>
#include <vector>

#include <json.hpp>

#include "urm/tasks/instance.hpp"

namespace urm::tasks {

struct Prediction {
  std::vector<Grid> candidates;  // ranked, best first
  double act_steps = 1.0;        // mean ACT steps used for this instance
  bool fewer_than_requested = false;
};

using Predictor = std::function<Prediction(const PuzzleInstance&, std::size_t n)>;

struct PassMetrics {
  std::size_t instances = 0;
  std::vector<double> pass_at;  // pass_at[k-1] = pass@k, in [0, 1]
  double cell_accuracy = 0.0;   // of the top candidate
  double mean_act_steps = 0.0;

  double pass(std::size_t k) const { return pass_at.at(k - 1); }
};

nlohmann::json to_json(const PassMetrics& m);

// Exact-match grid comparison: an instance counts for pass@k when any of the
// first k candidates equals the target.
PassMetrics evaluate_pass_n(const Predictor& predictor, const std::vector<PuzzleInstance>& dataset,
                            std::size_t n);

}  // namespace urm::tasks
