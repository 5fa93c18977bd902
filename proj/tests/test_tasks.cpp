#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <unistd.h>

#include <gtest/gtest.h>

#include "urm/tasks/augment.hpp"
#include "urm/tasks/dataset.hpp"
#include "urm/tasks/evaluate.hpp"
#include "urm/tasks/grid_tasks.hpp"
#include "urm/tasks/sudoku.hpp"
#include "urm/tasks/tokenizer.hpp"

using namespace urm;
using namespace urm::tasks;
namespace fs = std::filesystem;

namespace {

Grid random_grid(std::size_t r, std::size_t c, core::Rng& rng) {
  Grid g(r, c);
  for (auto& v : g.cells) v = int(rng.below(kNumColors));
  return g;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("urm_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Sudoku, NoHolesMeansInputIsTarget) {
  for (int side : {4, 6}) {
    const auto inst = gen_mini_sudoku(side, 0, 3);
    EXPECT_EQ(inst.input, inst.target);
    EXPECT_TRUE(sudoku_consistent(inst.target, sudoku_shape(side)));
  }
}

TEST(Sudoku, EveryPuzzleHasExactlyTheTargetAsSolution) {
  for (int side : {4, 6}) {
    const auto shape = sudoku_shape(side);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const int holes = side == 4 ? 10 : 18;
      const auto inst = gen_mini_sudoku(side, holes, seed);
      Grid solution;
      EXPECT_EQ(count_sudoku_solutions(inst.input, shape, 2, &solution), 1);
      EXPECT_EQ(solution, inst.target);
      int zeros = int(std::count(inst.input.cells.begin(), inst.input.cells.end(), 0));
      if (inst.flags.empty()) EXPECT_EQ(zeros, holes);
      // Givens agree with the target.
      for (std::size_t i = 0; i < inst.input.cells.size(); ++i)
        if (inst.input.cells[i] != 0) EXPECT_EQ(inst.input.cells[i], inst.target.cells[i]);
    }
  }
}

TEST(Sudoku, UnreachableHoleCountIsReducedAndFlagged) {
  // A 4x4 sudoku with all 16 cells empty has many solutions.
  const auto inst = gen_mini_sudoku(4, 16, 5);
  ASSERT_FALSE(inst.flags.empty());
  EXPECT_EQ(inst.flags[0].rfind("holes_reduced", 0), 0u);
  EXPECT_EQ(count_sudoku_solutions(inst.input, sudoku_shape(4), 2), 1);
  EXPECT_THROW(gen_mini_sudoku(5, 3, 0), std::invalid_argument);
}

TEST(Sudoku, FixedSeedIsDeterministic) {
  EXPECT_EQ(gen_mini_sudoku(6, 15, 42), gen_mini_sudoku(6, 15, 42));
  EXPECT_NE(gen_mini_sudoku(6, 15, 42), gen_mini_sudoku(6, 15, 43));
}

TEST(Sudoku, SolverCountsAmbiguity) {
  const auto shape = sudoku_shape(4);
  EXPECT_GT(count_sudoku_solutions(Grid(4, 4), shape, 10), 1);
  auto bad = Grid::from_rows({{1, 1, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
  EXPECT_EQ(count_sudoku_solutions(bad, shape, 10), 0);
}

TEST(GridTasks, MirrorOfSymmetricGridIsItself) {
  const auto g = Grid::from_rows({{1, 2, 2, 1}, {0, 3, 3, 0}, {4, 0, 0, 4}});
  EXPECT_EQ(mirror_horizontal(g), g);
  EXPECT_EQ(mirror_horizontal(Grid::from_rows({{1, 2, 3}})), Grid::from_rows({{3, 2, 1}}));
}

TEST(GridTasks, IdentityRecolorKeepsInput) {
  core::Rng rng(1);
  ColorMap id;
  for (int c = 0; c < kNumColors; ++c) id[c] = c;
  const auto g = random_grid(5, 6, rng);
  EXPECT_EQ(recolor(g, id), g);
}

TEST(GridTasks, GravityPreservesColumnMultisets) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = gen_grid_task(GridFamily::kGravity, 6, seed);
    const auto& in = inst.input;
    const auto& out = inst.target;
    for (std::size_t c = 0; c < in.cols; ++c) {
      std::multiset<int> a, b;
      for (std::size_t r = 0; r < in.rows; ++r) {
        if (in.at(r, c)) a.insert(in.at(r, c));
        if (out.at(r, c)) b.insert(out.at(r, c));
      }
      EXPECT_EQ(a, b);
      // Settled: no empty cell below a filled one.
      bool seen = false;
      for (std::size_t r = 0; r < out.rows; ++r) {
        if (out.at(r, c)) seen = true;
        else EXPECT_FALSE(seen);
      }
    }
  }
}

TEST(GridTasks, LargestShapeAndBorder) {
  const auto g = Grid::from_rows({{1, 1, 0, 2}, {1, 0, 0, 2}, {0, 0, 0, 0}});
  EXPECT_EQ(largest_shape_fill(g), Grid::from_rows({{9, 9, 0, 2}, {9, 0, 0, 2}, {0, 0, 0, 0}}));
  const auto b = Grid::from_rows({{0, 0, 0, 0}, {0, 3, 0, 0}, {0, 0, 0, 3}, {0, 0, 0, 0}});
  EXPECT_EQ(border_draw(b), Grid::from_rows({{0, 0, 0, 0}, {0, 3, 8, 8}, {0, 8, 8, 3}, {0, 0, 0, 0}}));
}

TEST(GridTasks, EveryFamilyPassesItsOracle) {
  for (auto f : all_grid_families()) {
    EXPECT_EQ(grid_family_from_string(family_name(f)), f);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto inst = gen_grid_task(f, 1 + seed % 10, seed);
      EXPECT_EQ(apply_rule(f, inst.input), inst.target);
      EXPECT_TRUE(verify_instance(inst));
    }
  }
  EXPECT_THROW(gen_grid_task(GridFamily::kMirror, 11, 0), std::invalid_argument);
}

TEST(Tokenizer, RoundTripOnRandomGrids) {
  core::Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto g = random_grid(1 + rng.below(10), 1 + rng.below(10), rng);
    EXPECT_EQ(detokenize(tokenize(g, 111)), g);
  }
}

TEST(Tokenizer, SingleCellAndLayout) {
  EXPECT_EQ(tokenize(Grid(1, 1), 3), (std::vector<int>{kColorBase, kRowSepToken, kEndToken}));
  const auto t = tokenize(Grid::from_rows({{1, 2}, {3, 4}}), 9);
  EXPECT_EQ(t, (std::vector<int>{4, 5, 2, 6, 7, 2, 1, 0, 0}));
  EXPECT_EQ(t[cell_position(1, 0, 2)], kColorBase + 3);
}

TEST(Tokenizer, MaximalGridFillsBudgetExactly) {
  EXPECT_EQ(tokenized_length(10, 10), 10u * 11u + 1u);
  EXPECT_EQ(max_square_side(111), 10u);
  EXPECT_EQ(max_square_side(110), 9u);
  const auto t = tokenize(Grid(10, 10, 5), 111);
  EXPECT_EQ(t.size(), 111u);
  EXPECT_EQ(t.back(), kEndToken);
  EXPECT_EQ(std::count(t.begin(), t.end(), kPadToken), 0);
  EXPECT_THROW(tokenize(Grid(10, 10), 110), TokenOverflow);
  EXPECT_THROW(tokenize(Grid::from_rows({{10}}), 5), std::invalid_argument);
}

TEST(Tokenizer, PaddingCarriesIgnoreIndex) {
  PuzzleInstance inst;
  inst.input = Grid::from_rows({{0, 1}, {1, 0}});
  inst.target = Grid::from_rows({{2, 1}, {1, 2}});
  const auto p = tokenize_instance(inst, 12);
  for (std::size_t i = 0; i < 12; ++i) {
    if (p.inputs[i] == kPadToken) EXPECT_EQ(p.labels[i], kIgnoreIndex);
    else EXPECT_NE(p.labels[i], kIgnoreIndex);
  }
  EXPECT_EQ(std::count(p.labels.begin(), p.labels.end(), kIgnoreIndex), 5);
}

TEST(Augment, IdentityAndDoubleFlip) {
  core::Rng rng(3);
  const auto g = random_grid(3, 5, rng);
  EXPECT_EQ(augment_grid(g, Augmentation::identity()), g);
  EXPECT_TRUE(Augmentation::identity().is_identity());
  int flip = -1;
  for (int e = 0; e < 8; ++e)
    if (apply_dihedral(g, e) == mirror_horizontal(g)) flip = e;
  ASSERT_GE(flip, 0);
  EXPECT_EQ(apply_dihedral(apply_dihedral(g, flip), flip), g);
  for (int e = 0; e < 8; ++e) EXPECT_EQ(apply_dihedral(apply_dihedral(g, e), dihedral_inverse(e)), g);
}

TEST(Augment, EightDistinctSymmetries) {
  core::Rng rng(4);
  const auto g = random_grid(4, 4, rng);
  std::set<Grid> images;
  for (int e = 0; e < 8; ++e) images.insert(apply_dihedral(g, e));
  EXPECT_EQ(images.size(), 8u);
}

TEST(Augment, RandomRoundTripOverHundredGrids) {
  core::Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto g = random_grid(1 + rng.below(7), 1 + rng.below(7), rng);
    const auto a = random_augmentation(rng, kNumColors - 1, 3);
    EXPECT_EQ(invert(a, augment_grid(g, a)), g);
  }
}

TEST(Augment, InstanceUsesOneTransformForBothGrids) {
  const auto inst = gen_mini_sudoku(4, 6, 9);
  core::Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_augmentation(rng, 4);
    const auto aug = augment(inst, a);
    EXPECT_EQ(invert(a, aug.input), inst.input);
    EXPECT_EQ(invert(a, aug.target), inst.target);
    // Sudoku structure survives dihedral maps and digit permutations.
    EXPECT_TRUE(verify_instance(aug));
  }
}

TEST(Evaluate, PerfectConstantAndMonotone) {
  DatasetSpec spec;
  spec.family = "mirror";
  spec.size = 3;
  spec.train_count = 0;
  spec.eval_count = 40;
  spec.seed = 1;
  const auto ds = generate_dataset(spec);
  const Predictor perfect = [](const PuzzleInstance& inst, std::size_t) {
    return Prediction{{inst.target}, 1.0, false};
  };
  const auto p = evaluate_pass_n(perfect, ds.eval, 1);
  EXPECT_EQ(p.pass(1), 1.0);
  EXPECT_EQ(p.cell_accuracy, 1.0);

  const Grid constant(3, 3, 0);
  const Predictor fixed = [&](const PuzzleInstance&, std::size_t) { return Prediction{{constant}, 2.0, false}; };
  const double expect = double(std::count_if(ds.eval.begin(), ds.eval.end(),
                                             [&](const auto& i) { return i.target == constant; })) /
                        double(ds.eval.size());
  const auto c = evaluate_pass_n(fixed, ds.eval, 1);
  EXPECT_DOUBLE_EQ(c.pass(1), expect);
  EXPECT_DOUBLE_EQ(c.mean_act_steps, 2.0);

  // Candidate lists where the right answer shows up at a random rank.
  core::Rng rng(7);
  const Predictor ranked = [&](const PuzzleInstance& inst, std::size_t n) {
    Prediction pr;
    const std::size_t at = rng.below(n + 2);
    for (std::size_t k = 0; k < n; ++k) pr.candidates.push_back(k == at ? inst.target : constant);
    return pr;
  };
  const auto r = evaluate_pass_n(ranked, ds.eval, 5);
  ASSERT_EQ(r.pass_at.size(), 5u);
  for (std::size_t k = 1; k < 5; ++k) EXPECT_LE(r.pass_at[k - 1], r.pass_at[k]);
  EXPECT_THROW(evaluate_pass_n(perfect, ds.eval, 0), std::invalid_argument);
}

TEST(Dataset, DeterministicDisjointAndVerified) {
  DatasetSpec spec;
  spec.family = "sudoku4";
  spec.holes = 8;
  spec.train_count = 60;
  spec.eval_count = 20;
  spec.seed = 11;
  const auto a = generate_dataset(spec);
  const auto b = generate_dataset(spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.eval, b.eval);
  std::set<int> ids;
  std::set<Grid> inputs;
  for (const auto* split : {&a.train, &a.eval})
    for (const auto& inst : *split) {
      EXPECT_TRUE(ids.insert(inst.instance_id).second);
      EXPECT_TRUE(inputs.insert(inst.input).second);
      EXPECT_TRUE(verify_instance(inst));
      EXPECT_EQ(inst.family_id, family_index("sudoku4"));
    }
  EXPECT_EQ(a.train.size(), 60u);
  EXPECT_EQ(a.eval.size(), 20u);
  spec.seed = 12;
  EXPECT_NE(generate_dataset(spec).train, a.train);
}

TEST(Dataset, FilesRoundTripAndRegenerateBitwise) {
  DatasetSpec spec;
  spec.family = "gravity";
  spec.size = 5;
  spec.train_count = 30;
  spec.eval_count = 10;
  spec.seed = 3;
  const auto dir1 = temp_dir("ds1"), dir2 = temp_dir("ds2");
  write_dataset(dir1, generate_dataset(spec));
  write_dataset(dir2, generate_dataset(spec));
  for (const char* f : {"train.jsonl", "eval.jsonl", "manifest.json"}) {
    std::ifstream x(dir1 / f, std::ios::binary), y(dir2 / f, std::ios::binary);
    const std::string sx((std::istreambuf_iterator<char>(x)), {}), sy((std::istreambuf_iterator<char>(y)), {});
    EXPECT_FALSE(sx.empty());
    EXPECT_EQ(sx, sy) << f;
  }
  const auto back = read_dataset(dir1);
  const auto fresh = generate_dataset(spec);
  EXPECT_EQ(back.spec, spec);
  EXPECT_EQ(back.train, fresh.train);
  EXPECT_EQ(back.eval, fresh.eval);
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST(Dataset, RejectsBadInput) {
  EXPECT_THROW(family_index("tetris"), std::invalid_argument);
  EXPECT_THROW(read_dataset(fs::temp_directory_path() / "urm_no_such_dataset"), std::runtime_error);
  nlohmann::json j = DatasetSpec{};
  j["colour"] = 1;
  EXPECT_THROW(j.get<DatasetSpec>(), std::invalid_argument);
  PuzzleInstance broken = gen_mini_sudoku(4, 6, 1);
  broken.target.cells[0] = broken.target.cells[0] % 4 + 1;
  EXPECT_FALSE(verify_instance(broken));
}
