#include "urm/tasks/sudoku.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace urm::tasks {

SudokuShape sudoku_shape(int side) {
  switch (side) {
    case 4: return {4, 2, 2};
    case 6: return {6, 2, 3};
    default: throw std::invalid_argument("mini sudoku side must be 4 or 6, got " + std::to_string(side));
  }
}

namespace {

bool can_place(const Grid& g, const SudokuShape& s, std::size_t r, std::size_t c, int v) {
  for (int i = 0; i < s.side; ++i) {
    if (g.at(r, i) == v || g.at(i, c) == v) return false;
  }
  const std::size_t br = r / s.box_rows * s.box_rows, bc = c / s.box_cols * s.box_cols;
  for (int i = 0; i < s.box_rows; ++i)
    for (int j = 0; j < s.box_cols; ++j)
      if (g.at(br + i, bc + j) == v) return false;
  return true;
}

// Fills holes in row-major order; returns the number of solutions seen (capped).
int solve(Grid& g, const SudokuShape& s, std::size_t pos, int limit, Grid* first, int found) {
  const std::size_t n = g.cells.size();
  while (pos < n && g.cells[pos] != 0) ++pos;
  if (pos == n) {
    if (found == 0 && first != nullptr) *first = g;
    return found + 1;
  }
  const std::size_t r = pos / g.cols, c = pos % g.cols;
  for (int v = 1; v <= s.side && found < limit; ++v) {
    if (!can_place(g, s, r, c, v)) continue;
    g.cells[pos] = v;
    found = solve(g, s, pos + 1, limit, first, found);
    g.cells[pos] = 0;
  }
  return found;
}

bool fill_random(Grid& g, const SudokuShape& s, std::size_t pos, core::Rng& rng) {
  if (pos == g.cells.size()) return true;
  std::vector<int> values(s.side);
  std::iota(values.begin(), values.end(), 1);
  rng.shuffle(values);
  const std::size_t r = pos / g.cols, c = pos % g.cols;
  for (int v : values) {
    if (!can_place(g, s, r, c, v)) continue;
    g.cells[pos] = v;
    if (fill_random(g, s, pos + 1, rng)) return true;
    g.cells[pos] = 0;
  }
  return false;
}

}  // namespace

bool sudoku_consistent(const Grid& g, const SudokuShape& s) {
  if (g.rows != std::size_t(s.side) || g.cols != std::size_t(s.side)) return false;
  Grid probe = g;
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c) {
      const int v = g.at(r, c);
      if (v == 0) continue;
      if (v < 0 || v > s.side) return false;
      probe.at(r, c) = 0;
      if (!can_place(probe, s, r, c, v)) return false;
      probe.at(r, c) = v;
    }
  return true;
}

int count_sudoku_solutions(const Grid& puzzle, const SudokuShape& shape, int limit, Grid* first) {
  if (!sudoku_consistent(puzzle, shape)) return 0;
  Grid work = puzzle;
  return solve(work, shape, 0, limit, first, 0);
}

Grid random_sudoku_solution(const SudokuShape& shape, core::Rng& rng) {
  Grid g(shape.side, shape.side, 0);
  if (!fill_random(g, shape, 0, rng)) throw std::logic_error("sudoku fill failed");
  return g;
}

PuzzleInstance gen_mini_sudoku(int side, int holes, std::uint64_t seed) {
  const auto shape = sudoku_shape(side);
  const int cells = side * side;
  if (holes < 0 || holes > cells) throw std::invalid_argument("holes outside [0, side*side]");
  core::Rng rng(seed);
  PuzzleInstance inst;
  inst.family = "sudoku" + std::to_string(side);
  inst.target = random_sudoku_solution(shape, rng);
  inst.input = inst.target;

  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  int removed = 0;
  for (std::size_t pos : order) {
    if (removed == holes) break;
    const int keep = inst.input.cells[pos];
    inst.input.cells[pos] = 0;
    if (count_sudoku_solutions(inst.input, shape, 2) == 1) {
      ++removed;
    } else {
      inst.input.cells[pos] = keep;
    }
  }
  if (removed < holes) inst.flags.push_back("holes_reduced:" + std::to_string(removed));
  return inst;
}

}  // namespace urm::tasks
