#include "urm/tasks/augment.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

namespace urm::tasks {

namespace {

Grid rotate_cw(const Grid& g) {
  Grid out(g.cols, g.rows);
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c) out.at(c, g.rows - 1 - r) = g.at(r, c);
  return out;
}

Grid transpose_grid(const Grid& g) {
  Grid out(g.cols, g.rows);
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c) out.at(c, r) = g.at(r, c);
  return out;
}

}  // namespace

bool Augmentation::is_identity() const { return *this == Augmentation::identity(); }

Grid apply_dihedral(const Grid& g, int element) {
  if (element < 0 || element > 7) throw std::invalid_argument("dihedral element must be in [0, 8)");
  Grid out = element >= 4 ? transpose_grid(g) : g;
  for (int i = 0; i < element % 4; ++i) out = rotate_cw(out);
  return out;
}

int dihedral_inverse(int element) {
  if (element < 0 || element > 7) throw std::invalid_argument("dihedral element must be in [0, 8)");
  // Rotations invert to the opposite rotation; the transpose-based elements
  // are reflections and are their own inverses.
  if (element < 4) return (4 - element) % 4;
  return element;
}

Grid augment_grid(const Grid& g, const Augmentation& a) {
  Grid d = apply_dihedral(g, a.dihedral);
  for (auto& v : d.cells) v = a.colors.at(v);
  if (a.row_offset == 0 && a.col_offset == 0) return d;
  Grid out(d.rows + a.row_offset, d.cols + a.col_offset);
  for (std::size_t r = 0; r < d.rows; ++r)
    for (std::size_t c = 0; c < d.cols; ++c) out.at(r + a.row_offset, c + a.col_offset) = d.at(r, c);
  return out;
}

Grid invert(const Augmentation& a, const Grid& g) {
  if (g.rows < a.row_offset || g.cols < a.col_offset) throw std::invalid_argument("invert: grid smaller than offset");
  Grid crop(g.rows - a.row_offset, g.cols - a.col_offset);
  for (std::size_t r = 0; r < crop.rows; ++r)
    for (std::size_t c = 0; c < crop.cols; ++c) crop.at(r, c) = g.at(r + a.row_offset, c + a.col_offset);
  std::array<int, kNumColors> inverse{};
  for (int c = 0; c < kNumColors; ++c) inverse.at(a.colors[c]) = c;
  for (auto& v : crop.cells) v = inverse.at(v);
  return apply_dihedral(crop, dihedral_inverse(a.dihedral));
}

PuzzleInstance augment(const PuzzleInstance& inst, const Augmentation& a) {
  PuzzleInstance out = inst;
  out.input = augment_grid(inst.input, a);
  out.target = augment_grid(inst.target, a);
  return out;
}

Augmentation random_augmentation(core::Rng& rng, int palette, std::size_t max_offset) {
  Augmentation a;
  a.dihedral = int(rng.below(8));
  std::vector<int> perm(palette);
  std::iota(perm.begin(), perm.end(), 1);
  rng.shuffle(perm);
  for (int i = 0; i < palette; ++i) a.colors[i + 1] = perm[i];
  if (max_offset > 0) {
    a.row_offset = rng.below(max_offset + 1);
    a.col_offset = rng.below(max_offset + 1);
  }
  return a;
}

}  // namespace urm::tasks
