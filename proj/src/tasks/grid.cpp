#include "urm/tasks/grid.hpp"

#include <sstream>
#include <stdexcept>

namespace urm::tasks {

Grid Grid::from_rows(const std::vector<std::vector<int>>& rows) {
  Grid g;
  g.rows = rows.size();
  g.cols = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != g.cols) throw std::invalid_argument("Grid::from_rows: ragged rows");
    g.cells.insert(g.cells.end(), r.begin(), r.end());
  }
  return g;
}

std::vector<std::vector<int>> Grid::to_rows() const {
  std::vector<std::vector<int>> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r].assign(cells.begin() + r * cols, cells.begin() + (r + 1) * cols);
  return out;
}

std::string Grid::to_string() const {
  std::ostringstream os;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) os << at(r, c);
    os << '\n';
  }
  return os.str();
}

}  // namespace urm::tasks
