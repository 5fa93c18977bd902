#pragma once

#include <cstdint>
#include <optional>

#include "urm/core/rng.hpp"
#include "urm/tasks/instance.hpp"

namespace urm::tasks {

// Box layout for the supported sides: 4 -> 2x2, 6 -> 2x3.
struct SudokuShape {
  int side;
  int box_rows;
  int box_cols;
};

SudokuShape sudoku_shape(int side);

// Cells hold 1..side, 0 marks a hole.
bool sudoku_consistent(const Grid& g, const SudokuShape& shape);

// Counts solutions up to `limit` by exhaustive backtracking; `first` receives
// the first solution found.
int count_sudoku_solutions(const Grid& puzzle, const SudokuShape& shape, int limit,
                           Grid* first = nullptr);

Grid random_sudoku_solution(const SudokuShape& shape, core::Rng& rng);

// Full grid sampled by randomized backtracking, then cells are removed in a
// random order while the puzzle stays uniquely solvable. If `holes` cannot be
// reached the instance carries the "holes_reduced" flag.
PuzzleInstance gen_mini_sudoku(int side, int holes, std::uint64_t seed);

}  // namespace urm::tasks
