#include <cmath>

#include <gtest/gtest.h>

#include "urm/model/urm.hpp"

using namespace urm;
using core::NdArray;
using core::Rng;
using T = core::Tensor<double>;
using model::Batch;
using model::UrmModel;
using nn::ModelConfig;

namespace {

ModelConfig tiny(std::size_t m, std::size_t n, std::size_t cap) {
  ModelConfig c;
  c.layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.ffn_width = 32;
  c.inner_loops = m;
  c.forward_only_loops = n;
  c.act_max_steps = cap;
  c.max_seq_len = 6;
  c.puzzle_table_size = 4;
  return c;
}

Batch random_batch(const ModelConfig& cfg, std::size_t sequences, Rng& rng) {
  Batch b;
  b.seq_len = cfg.max_seq_len;
  for (std::size_t i = 0; i < sequences * b.seq_len; ++i) {
    b.tokens.push_back(int(rng.below(cfg.vocab_size)));
    b.labels.push_back(i % 4 == 3 ? core::kIgnoreIndex : int(rng.below(cfg.vocab_size)));
  }
  for (std::size_t s = 0; s < sequences; ++s) b.puzzle_ids.push_back(int(s % cfg.puzzle_table_size));
  return b;
}

std::vector<NdArray<double>> grads(UrmModel<double>& m) {
  std::vector<NdArray<double>> g;
  for (const auto& p : m.params().entries())
    g.push_back(p.tensor.has_grad() ? p.tensor.grad() : NdArray<double>(p.tensor.shape()));
  return g;
}

double max_diff(const std::vector<NdArray<double>>& a, const std::vector<NdArray<double>>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].numel(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

// Reference truncated gradient: the first N loops are recorded like any other
// computation, then their output is replaced by a constant copy before the
// trainable loops run.
std::vector<NdArray<double>> recompute_with_constant(UrmModel<double>& m, const Batch& batch) {
  const auto& cfg = m.config();
  m.params().zero_grad();
  auto ctx = m.context(batch);
  const auto base = nn::embed_base<double>(batch.tokens, batch.seq_len, batch.puzzle_ids, m.embedding(), cfg);
  T h;
  for (std::size_t t = 0; t < cfg.forward_only_loops; ++t) h = m.stack(m.loop_input(h, base, t), ctx);
  if (h.defined()) h = T::constant(h.value());
  T loss;
  for (std::size_t t = cfg.forward_only_loops; t < cfg.inner_loops; ++t) {
    h = m.stack(m.loop_input(h, base, t), ctx);
    auto l = core::cross_entropy(m.unembed(h), batch.labels, core::kIgnoreIndex);
    loss = loss.defined() ? core::add(loss, l) : l;
  }
  loss.backward();
  return grads(m);
}

std::vector<NdArray<double>> model_grads(UrmModel<double>& m, const Batch& batch, double* loss_out = nullptr) {
  m.params().zero_grad();
  auto loss = model::tbptl_loss(m.forward(batch), batch.labels, m.config());
  if (loss_out) *loss_out = loss.item();
  loss.backward();
  return grads(m);
}

}  // namespace

TEST(Tbptl, MatchesRecomputeWithConstantOracle) {
  for (std::size_t n : {0u, 1u, 2u}) {
    UrmModel<double> m(tiny(4, n, 1), 10 + n);
    Rng rng(20 + n);
    const auto batch = random_batch(m.config(), 2, rng);
    const auto got = model_grads(m, batch);
    const auto want = recompute_with_constant(m, batch);
    EXPECT_LE(max_diff(got, want), 1e-10) << "N=" << n;
  }
}

TEST(Tbptl, TruncationChangesTheGradient) {
  // Guard against an oracle that never truncates: full backprop through all
  // four loops gives a different gradient once N > 0.
  UrmModel<double> m(tiny(4, 2, 1), 3);
  Rng rng(4);
  const auto batch = random_batch(m.config(), 2, rng);
  const auto truncated = model_grads(m, batch);
  m.params().zero_grad();
  auto ctx = m.context(batch);
  const auto base = nn::embed_base<double>(batch.tokens, batch.seq_len, batch.puzzle_ids, m.embedding(), m.config());
  T h, loss;
  for (std::size_t t = 0; t < 4; ++t) {
    h = m.stack(m.loop_input(h, base, t), ctx);
    if (t >= 2) {
      auto l = core::cross_entropy(m.unembed(h), batch.labels, core::kIgnoreIndex);
      loss = loss.defined() ? core::add(loss, l) : l;
    }
  }
  loss.backward();
  EXPECT_GT(max_diff(truncated, grads(m)), 1e-8);
}

TEST(Tbptl, TapeShrinksLinearlyWithTruncation) {
  std::vector<std::size_t> ops;
  for (std::size_t n = 0; n < 4; ++n) {
    UrmModel<double> m(tiny(4, n, 1), 5);
    Rng rng(6);
    const auto batch = random_batch(m.config(), 2, rng);
    const auto loss = model::tbptl_loss(m.forward(batch), batch.labels, m.config());
    ops.push_back(core::Tape<double>::record(loss).op_count());
  }
  EXPECT_LT(ops[2], ops[0]);
  // Each trainable loop past the first contributes the same number of ops.
  const auto per_loop = ops[1] - ops[2];
  EXPECT_GT(per_loop, 0u);
  EXPECT_EQ(ops[2] - ops[3], per_loop);
  // With N = 0 the first loop reads the embedding directly, so it lacks the
  // single state + input add that every later loop has.
  EXPECT_EQ(ops[0] - ops[1], per_loop - 1);
}

TEST(Tbptl, PerLoopLossesAndInitialValue) {
  // Near-zero unembedding at init: every trainable loop sees CE close to ln V.
  for (std::size_t n : {0u, 1u, 3u}) {
    UrmModel<double> m(tiny(4, n, 1), 7);
    Rng rng(8);
    const auto batch = random_batch(m.config(), 4, rng);
    std::vector<double> per_loop;
    const double loss = model::tbptl_loss(m.forward(batch), batch.labels, m.config(), &per_loop).item();
    EXPECT_EQ(per_loop.size(), 4 - n);
    const double expect = double(4 - n) * std::log(13.0);
    EXPECT_NEAR(loss, expect, 0.02 * expect);
  }
}

TEST(Tbptl, RejectsNotFewerForwardOnlyLoops) {
  EXPECT_THROW(UrmModel<double>(tiny(3, 3, 1), 0), model::ConfigError);
  UrmModel<double> m(tiny(3, 1, 1), 0);
  Rng rng(1);
  const auto batch = random_batch(m.config(), 1, rng);
  model::ForwardOptions opts;
  opts.forward_only_loops = 3;
  EXPECT_THROW(m.forward(batch, opts), model::ConfigError);
}

TEST(Tbptl, ReplayedTruncationReproducesTheLoss) {
  UrmModel<double> m(tiny(3, 1, 3), 9);
  Rng rng(10);
  const auto batch = random_batch(m.config(), 2, rng);
  m.set_truncation_cache(model::TruncationCache::kRecord);
  const double recorded = model::tbptl_loss(m.forward(batch), batch.labels, m.config()).item();
  m.set_truncation_cache(model::TruncationCache::kReplay);
  EXPECT_EQ(model::tbptl_loss(m.forward(batch), batch.labels, m.config()).item(), recorded);
}

TEST(Act, InvariantsOverRandomModels) {
  Rng outer(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto cfg = tiny(2, trial % 2, 1 + outer.below(5));
    cfg.layers = 1;
    cfg.halt_bias_init = outer.uniform(-3.0, 3.0);
    cfg.halt_epsilon = outer.uniform(0.01, 0.3);
    if (trial % 3 == 0) cfg.act_granularity = nn::ActGranularity::kSequence;
    UrmModel<double> m(cfg, outer.next_u64());
    // Non-zero halting weights so probabilities differ per token.
    for (auto& v : m.halt_weight().value().data()) const_cast<double&>(v) = outer.normal(0.0, 0.5);
    const auto batch = random_batch(cfg, 2, outer);
    const auto r = m.forward(batch);
    const std::size_t rows = batch.rows();
    ASSERT_EQ(r.allocations.shape(), (core::Shape{r.outer_steps, rows}));
    for (std::size_t i = 0; i < rows; ++i) {
      double total = 0.0;
      for (std::size_t t = 0; t < r.outer_steps; ++t) {
        const double d = r.allocations.at(t, i);
        EXPECT_GE(d, 0.0);
        total += d;
      }
      EXPECT_NEAR(total, 1.0, 1e-6) << "trial " << trial << " row " << i;
      EXPECT_GE(r.steps_used[i], 1);
      EXPECT_LE(std::size_t(r.steps_used[i]), cfg.act_max_steps);
    }
    EXPECT_LE(r.outer_steps, cfg.act_max_steps);
  }
}

TEST(Act, ForcedHaltIsSingleStepWithFullWeight) {
  auto cfg = tiny(2, 0, 6);
  cfg.halt_bias_init = 60.0;  // sigmoid rounds to 1
  UrmModel<double> m(cfg, 12);
  Rng rng(13);
  const auto batch = random_batch(cfg, 2, rng);
  const auto r = m.forward(batch);
  EXPECT_EQ(r.outer_steps, 1u);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    EXPECT_EQ(r.allocations.at(0, i), 1.0);
    EXPECT_EQ(r.steps_used[i], 1);
  }
  // Mixture is the single step's state, so the logits are those of loop M.
  EXPECT_EQ(r.logits.value(), r.loop_logits.back().value());
}

TEST(Act, ForcedNoHaltRunsToCapWithRemainder) {
  auto cfg = tiny(2, 0, 5);
  cfg.halt_bias_init = -3.0;
  UrmModel<double> m(cfg, 14);
  Rng rng(15);
  const auto batch = random_batch(cfg, 2, rng);
  const auto r = m.forward(batch);
  const double p = 1.0 / (1.0 + std::exp(3.0));  // 5 * p < 1 - eps, so nothing halts early
  ASSERT_EQ(r.outer_steps, 5u);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    EXPECT_EQ(r.steps_used[i], 5);
    for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(r.allocations.at(t, i), p, 1e-15);
    EXPECT_NEAR(r.allocations.at(4, i), 1.0 - 4.0 * p, 1e-15);
  }
}

TEST(Act, HaltedTokensKeepTheirState) {
  // Tokens halt at different steps; the mixture still sums to one per token
  // and loop logits keep one entry per trainable loop per outer step.
  auto cfg = tiny(2, 1, 4);
  cfg.halt_bias_init = 0.0;
  UrmModel<double> m(cfg, 16);
  for (auto& v : m.halt_weight().value().data()) const_cast<double&>(v) = 2.0;
  Rng rng(17);
  const auto batch = random_batch(cfg, 2, rng);
  const auto r = m.forward(batch);
  EXPECT_EQ(r.loop_logits.size(), r.outer_steps * cfg.trainable_loops());
}

TEST(Collapse, SingleLoopMatchesVanillaStack) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto cfg = tiny(1, 0, 1);
    cfg.conv_insertion = nn::ConvInsertion::kNone;
    UrmModel<double> m(cfg, seed);
    Rng rng(seed + 100);
    const auto batch = random_batch(cfg, 3, rng);
    const auto looped = m.forward(batch).logits.value();
    const auto vanilla = m.vanilla_forward(batch).value();
    ASSERT_EQ(looped.shape(), vanilla.shape());
    double diff = 0.0;
    for (std::size_t i = 0; i < looped.numel(); ++i) diff = std::max(diff, std::abs(looped[i] - vanilla[i]));
    EXPECT_LE(diff, 1e-12);
  }
}

TEST(Model, CopyValuesAndFloatForward) {
  const auto cfg = tiny(2, 1, 2);
  UrmModel<double> a(cfg, 1), b(cfg, 2);
  b.copy_values_from(a);
  Rng rng(3);
  const auto batch = random_batch(cfg, 2, rng);
  EXPECT_EQ(a.forward(batch).logits.value(), b.forward(batch).logits.value());
  UrmModel<float> f(cfg, 1);
  const auto lf = f.forward(batch).logits.value();
  const auto ld = a.forward(batch).logits.value();
  for (std::size_t i = 0; i < ld.numel(); ++i) EXPECT_NEAR(lf[i], ld[i], 1e-4);
}
