#include "urm/tasks/grid_tasks.hpp"

#include <algorithm>
#include <stdexcept>

namespace urm::tasks {

std::string family_name(GridFamily f) {
  switch (f) {
    case GridFamily::kRecolorMap: return "recolor-map";
    case GridFamily::kMirror: return "mirror";
    case GridFamily::kGravity: return "gravity";
    case GridFamily::kLargestShapeFill: return "largest-shape-fill";
    case GridFamily::kBorderDraw: return "border-draw";
  }
  return "?";
}

const std::vector<GridFamily>& all_grid_families() {
  static const std::vector<GridFamily> kAll = {GridFamily::kRecolorMap, GridFamily::kMirror,
                                               GridFamily::kGravity, GridFamily::kLargestShapeFill,
                                               GridFamily::kBorderDraw};
  return kAll;
}

GridFamily grid_family_from_string(const std::string& s) {
  for (auto f : all_grid_families())
    if (family_name(f) == s) return f;
  throw std::invalid_argument("unknown grid task family: " + s);
}

ColorMap default_recolor_map() {
  ColorMap m{};
  m[0] = 0;
  for (int c = 1; c < kNumColors; ++c) m[c] = c % 9 + 1;
  return m;
}

Grid recolor(const Grid& g, const ColorMap& map) {
  Grid out = g;
  for (auto& v : out.cells) v = map.at(v);
  return out;
}

Grid mirror_horizontal(const Grid& g) {
  Grid out(g.rows, g.cols);
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c) out.at(r, g.cols - 1 - c) = g.at(r, c);
  return out;
}

Grid gravity(const Grid& g) {
  Grid out(g.rows, g.cols);
  for (std::size_t c = 0; c < g.cols; ++c) {
    std::size_t dst = g.rows;
    for (std::size_t r = g.rows; r-- > 0;) {
      if (g.at(r, c) != 0) out.at(--dst, c) = g.at(r, c);
    }
  }
  return out;
}

Grid largest_shape_fill(const Grid& g) {
  std::vector<int> label(g.cells.size(), -1);
  std::vector<std::size_t> best;
  std::vector<std::size_t> stack, comp;
  for (std::size_t start = 0; start < g.cells.size(); ++start) {
    if (g.cells[start] == 0 || label[start] >= 0) continue;
    comp.clear();
    stack.assign(1, start);
    label[start] = 1;
    const int color = g.cells[start];
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      comp.push_back(p);
      const std::size_t r = p / g.cols, c = p % g.cols;
      auto visit = [&](std::size_t q) {
        if (label[q] < 0 && g.cells[q] == color) {
          label[q] = 1;
          stack.push_back(q);
        }
      };
      if (r > 0) visit(p - g.cols);
      if (r + 1 < g.rows) visit(p + g.cols);
      if (c > 0) visit(p - 1);
      if (c + 1 < g.cols) visit(p + 1);
    }
    if (comp.size() > best.size()) best = comp;
  }
  Grid out = g;
  for (auto p : best) out.cells[p] = kFillColor;
  return out;
}

Grid border_draw(const Grid& g) {
  std::size_t r0 = g.rows, r1 = 0, c0 = g.cols, c1 = 0;
  bool any = false;
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c)
      if (g.at(r, c) != 0) {
        any = true;
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  Grid out = g;
  if (!any) return out;
  for (std::size_t r = r0; r <= r1; ++r)
    for (std::size_t c = c0; c <= c1; ++c) {
      const bool edge = r == r0 || r == r1 || c == c0 || c == c1;
      if (edge && out.at(r, c) == 0) out.at(r, c) = kBorderColor;
    }
  return out;
}

Grid apply_rule(GridFamily f, const Grid& g) {
  switch (f) {
    case GridFamily::kRecolorMap: return recolor(g, default_recolor_map());
    case GridFamily::kMirror: return mirror_horizontal(g);
    case GridFamily::kGravity: return gravity(g);
    case GridFamily::kLargestShapeFill: return largest_shape_fill(g);
    case GridFamily::kBorderDraw: return border_draw(g);
  }
  throw std::logic_error("unhandled grid family");
}

PuzzleInstance gen_grid_task(GridFamily family, std::size_t size, std::uint64_t seed) {
  if (size == 0 || size > 10) throw std::invalid_argument("grid task size must be in [1, 10]");
  core::Rng rng(seed);
  PuzzleInstance inst;
  inst.family = family_name(family);
  Grid in(size, size);
  const double density = rng.uniform(0.2, 0.6);
  // Fill and border tasks use few colours so shapes actually form.
  const int palette = (family == GridFamily::kLargestShapeFill) ? 3
                      : (family == GridFamily::kBorderDraw)     ? 7
                                                                : 9;
  for (auto& v : in.cells) v = rng.uniform() < density ? 1 + int(rng.below(palette)) : 0;
  if (family == GridFamily::kBorderDraw) {
    // Keep the content inside a sub-rectangle so the border is visible.
    const std::size_t r0 = rng.below(size), c0 = rng.below(size);
    const std::size_t r1 = r0 + rng.below(size - r0), c1 = c0 + rng.below(size - c0);
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c)
        if (r < r0 || r > r1 || c < c0 || c > c1) in.at(r, c) = 0;
  }
  inst.input = in;
  inst.target = apply_rule(family, in);
  return inst;
}

}  // namespace urm::tasks
