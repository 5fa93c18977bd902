#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace urm::tasks {

inline constexpr int kNumColors = 10;

// Rectangular grid of small-int cells (colors 0..9).
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> cells;  // row-major

  Grid() = default;
  Grid(std::size_t r, std::size_t c, int fill = 0) : rows(r), cols(c), cells(r * c, fill) {}
  static Grid from_rows(const std::vector<std::vector<int>>& rows);

  int& at(std::size_t r, std::size_t c) { return cells[r * cols + c]; }
  int at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
  std::vector<std::vector<int>> to_rows() const;
  std::string to_string() const;

  friend bool operator==(const Grid&, const Grid&) = default;
  friend auto operator<=>(const Grid&, const Grid&) = default;
};

}  // namespace urm::tasks
