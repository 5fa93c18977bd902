#pragma once

#include <array>
#include <cstddef>

#include "urm/core/rng.hpp"
#include "urm/tasks/instance.hpp"

namespace urm::tasks {

// Dihedral element (0-3: rotations by 90*k clockwise, 4-7: transpose followed
// by the same rotation), a colour permutation, and a translation that embeds
// the grid in a larger canvas padded with 0 on the top/left.
struct Augmentation {
  int dihedral = 0;
  std::array<int, kNumColors> colors{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t row_offset = 0;
  std::size_t col_offset = 0;

  static Augmentation identity() { return {}; }
  bool is_identity() const;
  friend bool operator==(const Augmentation&, const Augmentation&) = default;
};

Grid apply_dihedral(const Grid& g, int element);
int dihedral_inverse(int element);

Grid augment_grid(const Grid& g, const Augmentation& a);
Grid invert(const Augmentation& a, const Grid& g);
PuzzleInstance augment(const PuzzleInstance& inst, const Augmentation& a);

// Random element; colours 1..palette are permuted among themselves, the rest
// stay fixed. max_offset bounds the translation.
Augmentation random_augmentation(core::Rng& rng, int palette = kNumColors - 1,
                                 std::size_t max_offset = 0);

}  // namespace urm::tasks
