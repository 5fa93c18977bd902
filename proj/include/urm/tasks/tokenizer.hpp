#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "urm/core/ops.hpp"
#include "urm/tasks/instance.hpp"

namespace urm::tasks {

// Token ids: 0 pad, 1 end, 2 row separator, 3 + colour for cells.
inline constexpr int kPadToken = 0;
inline constexpr int kEndToken = 1;
inline constexpr int kRowSepToken = 2;
inline constexpr int kColorBase = 3;
inline constexpr int kVocabSize = kColorBase + kNumColors;
inline constexpr int kIgnoreIndex = core::kIgnoreIndex;

class TokenOverflow : public std::length_error {
 public:
  using std::length_error::length_error;
};

// rows * (cols + 1) + 1: each row followed by a separator, then the end token.
std::size_t tokenized_length(std::size_t rows, std::size_t cols);
// Largest square side whose grid fits in max_len tokens.
std::size_t max_square_side(std::size_t max_len);

std::vector<int> tokenize(const Grid& grid, std::size_t max_len);
Grid detokenize(const std::vector<int>& tokens);

// Token position of cell (r, c) within a tokenized grid with `cols` columns.
inline std::size_t cell_position(std::size_t r, std::size_t c, std::size_t cols) {
  return r * (cols + 1) + c;
}

struct TokenizedPair {
  std::vector<int> inputs;  // padded with kPadToken
  std::vector<int> labels;  // padding positions carry kIgnoreIndex
};

TokenizedPair tokenize_instance(const PuzzleInstance& inst, std::size_t max_len);

}  // namespace urm::tasks
