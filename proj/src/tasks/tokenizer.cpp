#include "urm/tasks/tokenizer.hpp"

#include <string>

namespace urm::tasks {

std::size_t tokenized_length(std::size_t rows, std::size_t cols) { return rows * (cols + 1) + 1; }

std::size_t max_square_side(std::size_t max_len) {
  std::size_t s = 0;
  while (tokenized_length(s + 1, s + 1) <= max_len) ++s;
  return s;
}

std::vector<int> tokenize(const Grid& grid, std::size_t max_len) {
  const std::size_t need = tokenized_length(grid.rows, grid.cols);
  if (need > max_len)
    throw TokenOverflow("tokenize: " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                        " grid needs " + std::to_string(need) + " tokens, budget is " +
                        std::to_string(max_len));
  std::vector<int> out;
  out.reserve(max_len);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const int v = grid.at(r, c);
      if (v < 0 || v >= kNumColors) throw std::invalid_argument("tokenize: colour " + std::to_string(v) + " out of range");
      out.push_back(kColorBase + v);
    }
    out.push_back(kRowSepToken);
  }
  out.push_back(kEndToken);
  out.resize(max_len, kPadToken);
  return out;
}

Grid detokenize(const std::vector<int>& tokens) {
  std::vector<std::vector<int>> rows;
  std::vector<int> row;
  bool ended = false;
  for (int t : tokens) {
    if (t == kEndToken) {
      ended = true;
      break;
    }
    if (t == kRowSepToken) {
      rows.push_back(row);
      row.clear();
    } else if (t >= kColorBase && t < kColorBase + kNumColors) {
      row.push_back(t - kColorBase);
    } else {
      throw std::invalid_argument("detokenize: unexpected token " + std::to_string(t));
    }
  }
  if (!ended) throw std::invalid_argument("detokenize: missing end token");
  if (!row.empty()) throw std::invalid_argument("detokenize: row without separator");
  return Grid::from_rows(rows);
}

TokenizedPair tokenize_instance(const PuzzleInstance& inst, std::size_t max_len) {
  TokenizedPair p;
  p.inputs = tokenize(inst.input, max_len);
  p.labels = tokenize(inst.target, max_len);
  for (auto& t : p.labels)
    if (t == kPadToken) t = kIgnoreIndex;
  return p;
}

}  // namespace urm::tasks
