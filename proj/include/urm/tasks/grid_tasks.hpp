#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "urm/core/rng.hpp"
#include "urm/tasks/instance.hpp"

namespace urm::tasks {

enum class GridFamily { kRecolorMap, kMirror, kGravity, kLargestShapeFill, kBorderDraw };

std::string family_name(GridFamily f);
GridFamily grid_family_from_string(const std::string& s);
const std::vector<GridFamily>& all_grid_families();

using ColorMap = std::array<int, kNumColors>;

// Fixed family-wide recolouring: 0 stays 0, c -> c % 9 + 1 for c in 1..9.
ColorMap default_recolor_map();
inline constexpr int kFillColor = 9;
inline constexpr int kBorderColor = 8;

// Rule functions; each one is the exact oracle for its family.
Grid recolor(const Grid& g, const ColorMap& map);
Grid mirror_horizontal(const Grid& g);
// Non-zero cells fall to the bottom of their column, keeping their order.
Grid gravity(const Grid& g);
// The largest 4-connected single-colour non-zero component (first in
// row-major order on ties) is repainted with kFillColor.
Grid largest_shape_fill(const Grid& g);
// Empty cells on the perimeter of the non-zero bounding box become kBorderColor.
Grid border_draw(const Grid& g);

Grid apply_rule(GridFamily f, const Grid& g);

// Random size x size input with the family's target computed by its rule.
PuzzleInstance gen_grid_task(GridFamily family, std::size_t size, std::uint64_t seed);

}  // namespace urm::tasks
