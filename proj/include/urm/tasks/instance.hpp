#pragma once

#include <string>
#include <vector>

#include "urm/tasks/grid.hpp"

namespace urm::tasks {

struct PuzzleInstance {
  std::string family;   // e.g. "sudoku4", "gravity"
  int family_id = 0;    // index used for per-family puzzle embeddings
  int instance_id = 0;  // unique within a dataset; per-instance embeddings
  Grid input;
  Grid target;
  // Generator notes, e.g. "holes_reduced".
  std::vector<std::string> flags;

  friend bool operator==(const PuzzleInstance&, const PuzzleInstance&) = default;
};

}  // namespace urm::tasks
