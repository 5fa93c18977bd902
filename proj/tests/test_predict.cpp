#include <cmath>

#include <gtest/gtest.h>

#include "urm/model/predict.hpp"
#include "urm/tasks/dataset.hpp"
#include "urm/tasks/sudoku.hpp"
#include "urm/tasks/tokenizer.hpp"

using namespace urm;
using core::NdArray;
using model::UrmModel;

namespace {

nn::ModelConfig sudoku_config() {
  auto c = nn::ModelConfig::desk();
  c.hidden = 32;
  c.heads = 2;
  c.max_seq_len = 21;
  c.inner_loops = 2;
  c.forward_only_loops = 0;
  return c;
}

}  // namespace

TEST(DecodeGrid, ArgmaxOverColoursWithLogProb) {
  // 1x2 grid: positions 0 and 1 are cells, 2 is the separator, 3 the end.
  NdArray<double> logits(core::Shape{4, tasks::kVocabSize});
  logits.at(0, tasks::kColorBase + 7) = 2.0;
  logits.at(1, tasks::kColorBase + 2) = 1.0;
  logits.at(1, tasks::kPadToken) = 5.0;  // non-colour tokens are never chosen
  double lp = 0.0;
  const auto g = model::decode_grid(logits, 0, 1, 2, &lp);
  EXPECT_EQ(g, tasks::Grid::from_rows({{7, 2}}));
  const double z0 = std::log(std::exp(2.0) + 12.0), z1 = std::log(std::exp(1.0) + std::exp(5.0) + 11.0);
  EXPECT_NEAR(lp, (2.0 - z0) + (1.0 - z1), 1e-12);
}

TEST(Predict, IdentityViewsCollapseIntoOneCandidate) {
  UrmModel<float> m(sudoku_config(), 1);
  const auto inst = tasks::gen_mini_sudoku(4, 6, 2);
  const std::vector<tasks::Augmentation> views(3, tasks::Augmentation::identity());
  const auto r = model::predict(m, inst, 3, views);
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_TRUE(r.fewer_than_requested);
  EXPECT_EQ(r.candidates[0].votes, 4u);
  const auto single = model::predict(m, inst, 1, {});
  EXPECT_FALSE(single.fewer_than_requested);
  EXPECT_EQ(single.candidates[0].grid, r.candidates[0].grid);
  EXPECT_NEAR(r.candidates[0].log_prob, single.candidates[0].log_prob + std::log(4.0), 1e-4);
}

TEST(Predict, SingleCandidateIsGreedyDecode) {
  auto cfg = sudoku_config();
  UrmModel<float> m(cfg, 3);
  tasks::DatasetSpec spec;
  spec.train_count = 0;
  spec.eval_count = 10;
  const auto ds = tasks::generate_dataset(spec);
  const auto batched = model::greedy_predictions(m, std::span<const tasks::PuzzleInstance>(ds.eval), 4);
  ASSERT_EQ(batched.size(), ds.eval.size());
  for (std::size_t i = 0; i < ds.eval.size(); ++i) {
    const auto one = model::predict(m, ds.eval[i], 1, {});
    ASSERT_EQ(one.candidates.size(), 1u);
    EXPECT_EQ(batched[i].candidates.at(0), one.candidates[0].grid);
    // Direct decode from a plain forward.
    const std::vector<tasks::PuzzleInstance> just{ds.eval[i]};
    const auto logits = m.forward(model::make_batch(just, cfg)).logits.value();
    EXPECT_EQ(model::decode_grid(logits, 0, 4, 4), one.candidates[0].grid);
  }
}

TEST(Predict, CandidatesAreDistinctAndGreedyFirst) {
  UrmModel<float> m(sudoku_config(), 4);
  const auto inst = tasks::gen_mini_sudoku(4, 8, 5);
  const auto views = model::default_views(inst.family, 16, 9);
  const auto r = model::predict(m, inst, 5, views);
  ASSERT_FALSE(r.candidates.empty());
  EXPECT_EQ(r.candidates[0].grid, model::predict(m, inst, 1, {}).candidates[0].grid);
  std::size_t votes = 0;
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    votes += r.candidates[i].votes;
    EXPECT_EQ(r.candidates[i].grid.rows, 4u);
    for (std::size_t j = i + 1; j < r.candidates.size(); ++j) EXPECT_NE(r.candidates[i].grid, r.candidates[j].grid);
    if (i >= 2) EXPECT_GE(r.candidates[i - 1].log_prob, r.candidates[i].log_prob);
  }
  EXPECT_LE(r.candidates.size(), 5u);
  EXPECT_LE(votes, views.size() + 1);
}

TEST(Predict, DefaultViewsCoverDihedralsAndKeepSudokuDigits) {
  const auto views = model::default_views("sudoku4", 12, 1);
  ASSERT_EQ(views.size(), 12u);
  for (int e = 1; e < 8; ++e) EXPECT_EQ(views[e - 1].dihedral, e);
  for (const auto& v : views) {
    EXPECT_FALSE(v.is_identity());
    EXPECT_EQ(v.colors[0], 0);
    for (int c = 5; c < tasks::kNumColors; ++c) EXPECT_EQ(v.colors[c], c);
  }
  EXPECT_EQ(model::default_views("gravity", 3, 1).size(), 3u);
}

TEST(Predict, PredictorIsDeterministic) {
  UrmModel<float> m(sudoku_config(), 6);
  const auto inst = tasks::gen_mini_sudoku(4, 8, 7);
  const auto p = model::make_predictor(m, 11);
  const auto a = p(inst, 3), b = p(inst, 3);
  EXPECT_EQ(a.candidates, b.candidates);
  EXPECT_GE(a.act_steps, 1.0);
}
