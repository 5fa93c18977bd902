#include "urm/tasks/evaluate.hpp"

#include <stdexcept>

namespace urm::tasks {

nlohmann::json to_json(const PassMetrics& m) {
  nlohmann::json pass = nlohmann::json::object();
  for (std::size_t k = 1; k <= m.pass_at.size(); ++k) pass["pass@" + std::to_string(k)] = m.pass_at[k - 1];
  return {{"instances", m.instances},
          {"pass", pass},
          {"cell_accuracy", m.cell_accuracy},
          {"mean_act_steps", m.mean_act_steps}};
}

PassMetrics evaluate_pass_n(const Predictor& predictor, const std::vector<PuzzleInstance>& dataset,
                            std::size_t n) {
  if (n == 0) throw std::invalid_argument("evaluate_pass_n: n must be >= 1");
  PassMetrics m;
  m.instances = dataset.size();
  m.pass_at.assign(n, 0.0);
  if (dataset.empty()) return m;
  std::size_t cells = 0, correct_cells = 0;
  double steps = 0.0;
  for (const auto& inst : dataset) {
    const auto pred = predictor(inst, n);
    steps += pred.act_steps;
    std::size_t first_hit = n;
    for (std::size_t k = 0; k < std::min(n, pred.candidates.size()); ++k) {
      if (pred.candidates[k] == inst.target) {
        first_hit = k;
        break;
      }
    }
    for (std::size_t k = first_hit; k < n; ++k) m.pass_at[k] += 1.0;
    cells += inst.target.cells.size();
    if (!pred.candidates.empty()) {
      const auto& top = pred.candidates.front();
      if (top.rows == inst.target.rows && top.cols == inst.target.cols)
        for (std::size_t i = 0; i < top.cells.size(); ++i) correct_cells += top.cells[i] == inst.target.cells[i];
    }
  }
  for (auto& p : m.pass_at) p /= double(dataset.size());
  m.cell_accuracy = cells ? double(correct_cells) / double(cells) : 0.0;
  m.mean_act_steps = steps / double(dataset.size());
  return m;
}

}  // namespace urm::tasks
