#include "urm/model/urm.hpp"

#include <algorithm>
#include <cmath>

#include "urm/tasks/tokenizer.hpp"

namespace urm::model {

namespace ops = urm::core;
using nn::ParamRole;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string msg = "invalid model config:";
  for (const auto& p : problems) msg += "\n  - " + p;
  return msg;
}

}  // namespace

ConfigError::ConfigError(const std::vector<std::string>& problems)
    : std::invalid_argument(join_problems(problems)), problems_(problems) {}

Batch make_batch(std::span<const tasks::PuzzleInstance> instances, const ModelConfig& cfg) {
  Batch b;
  b.seq_len = cfg.max_seq_len;
  b.tokens.reserve(instances.size() * b.seq_len);
  b.labels.reserve(instances.size() * b.seq_len);
  for (const auto& inst : instances) {
    auto pair = tasks::tokenize_instance(inst, cfg.max_seq_len);
    b.tokens.insert(b.tokens.end(), pair.inputs.begin(), pair.inputs.end());
    b.labels.insert(b.labels.end(), pair.labels.begin(), pair.labels.end());
    switch (cfg.puzzle_embedding) {
      case nn::PuzzleEmbedding::kPerFamily: b.puzzle_ids.push_back(inst.family_id); break;
      case nn::PuzzleEmbedding::kPerInstance: b.puzzle_ids.push_back(inst.instance_id); break;
      case nn::PuzzleEmbedding::kNone: b.puzzle_ids.push_back(0); break;
    }
  }
  return b;
}

template <typename Real>
UrmModel<Real>::UrmModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (auto problems = cfg.validate(); !problems.empty()) throw ConfigError(problems);
  core::Rng rng(seed);
  embedding_ = nn::make_embedding(store_, cfg_, rng);
  // One set of layer weights, reused by every loop and outer step.
  for (std::size_t l = 0; l < cfg_.layers; ++l)
    layers_.push_back(nn::make_layer(store_, "layer" + std::to_string(l), cfg_, rng));
  unembed_ = store_.add("head.unembed", nn::normal_array<Real>({cfg_.hidden, cfg_.vocab_size}, 0.01, rng),
                        ParamRole::kHead);
  halt_w_ = store_.add("head.halt_w", NdArray<Real>(core::Shape{cfg_.hidden, 1}), ParamRole::kHead);
  halt_b_ = store_.add("head.halt_b", NdArray<Real>(core::Shape{1}, Real(cfg_.halt_bias_init)),
                       ParamRole::kVector);
}

template <typename Real>
nn::BlockContext<Real> UrmModel<Real>::context(const Batch& batch) const {
  return nn::make_context<Real>(cfg_, batch.size(), batch.seq_len);
}

template <typename Real>
Tensor<Real> UrmModel<Real>::stack(const Tensor<Real>& h, const nn::BlockContext<Real>& ctx) const {
  Tensor<Real> x = h;
  for (const auto& layer : layers_) x = nn::transition_block(x, layer, ctx);
  return x;
}

template <typename Real>
Tensor<Real> UrmModel<Real>::loop_input(const Tensor<Real>& state, const Tensor<Real>& base,
                                        std::size_t t) const {
  Tensor<Real> x = state.defined() ? (cfg_.input_injection ? ops::add(state, base) : state) : base;
  auto depth = nn::depth_encoding(t, x.rows(), embedding_, cfg_);
  return depth.defined() ? ops::add(x, depth) : x;
}

template <typename Real>
RolloutResult<Real> UrmModel<Real>::inner_rollout(const Tensor<Real>& state, const Tensor<Real>& base,
                                                  const nn::BlockContext<Real>& ctx,
                                                  std::size_t forward_only) const {
  if (forward_only >= cfg_.inner_loops)
    throw ConfigError({"forward_only_loops (N) must be < inner_loops (M)"});
  RolloutResult<Real> out;
  Tensor<Real> h = state;
  if (forward_only > 0 && cache_mode_ == TruncationCache::kReplay) {
    if (replay_index_ >= truncated_.size()) throw std::logic_error("truncation cache exhausted");
    h = Tensor<Real>::constant(truncated_[replay_index_++]);
  } else if (forward_only > 0) {
    core::NoGradGuard no_grad;
    for (std::size_t t = 0; t < forward_only; ++t) h = stack(loop_input(h, base, t), ctx);
    h = ops::detach(h);
    if (cache_mode_ == TruncationCache::kRecord) truncated_.push_back(h.value());
  }
  for (std::size_t t = forward_only; t < cfg_.inner_loops; ++t) {
    h = stack(loop_input(h, base, t), ctx);
    out.loop_states.push_back(h);
  }
  out.final_state = h;
  return out;
}

template <typename Real>
void UrmModel<Real>::set_truncation_cache(TruncationCache mode) {
  cache_mode_ = mode;
  replay_index_ = 0;
}

template <typename Real>
Tensor<Real> UrmModel<Real>::unembed(const Tensor<Real>& h) const {
  return ops::matmul(h, unembed_);
}

template <typename Real>
Tensor<Real> UrmModel<Real>::halting_probability(const Tensor<Real>& h, std::size_t seq_len) const {
  auto p = ops::sigmoid(ops::add_row(ops::matmul(h, halt_w_), halt_b_));
  if (cfg_.act_granularity == nn::ActGranularity::kToken) return p;
  const std::size_t batch = p.rows() / seq_len;
  NdArray<Real> avg(core::Shape{seq_len, seq_len}, Real(1) / Real(seq_len));
  auto per_seq = ops::matmul(ops::reshape(p, {batch, seq_len}), Tensor<Real>::constant(std::move(avg)));
  return ops::reshape(per_seq, {batch * seq_len, 1});
}

template <typename Real>
ForwardResult<Real> UrmModel<Real>::forward(const Batch& batch, const ForwardOptions& options) const {
  const std::size_t forward_only = options.forward_only_loops.value_or(cfg_.forward_only_loops);
  const std::size_t rows = batch.rows();
  const std::size_t cap = cfg_.act_max_steps;
  auto ctx = context(batch);
  attention_.clear();
  replay_index_ = 0;
  if (cache_mode_ == TruncationCache::kRecord) truncated_.clear();
  if (options.record_attention) ctx.attention_sink = &attention_;

  const auto base = nn::embed_base<Real>(batch.tokens, batch.seq_len, batch.puzzle_ids, embedding_, cfg_);

  ForwardResult<Real> result;
  result.steps_used.assign(rows, 0);
  std::vector<Real> probs_log, alloc_log;
  std::vector<Real> cum_value(rows, Real(0));
  std::vector<bool> halted(rows, false);

  Tensor<Real> state;                                     // carried across outer steps
  Tensor<Real> cum = Tensor<Real>::constant(NdArray<Real>(core::Shape{rows, 1}));
  Tensor<Real> remainder = cum;
  Tensor<Real> mixture;

  for (std::size_t step = 0; step < cap; ++step) {
    auto roll = inner_rollout(state, base, ctx, forward_only);
    for (const auto& s : roll.loop_states) result.loop_logits.push_back(unembed(s));
    const auto& h = roll.final_state;
    result.outer_steps = step + 1;

    if (cap == 1) {
      // Single outer step: every token halts with Delta = 1.
      mixture = h;
      probs_log.assign(rows, Real(1));
      alloc_log.assign(rows, Real(1));
      std::fill(result.steps_used.begin(), result.steps_used.end(), 1);
      std::fill(halted.begin(), halted.end(), true);
      break;
    }

    auto p = halting_probability(h, batch.seq_len);
    NdArray<Real> halt_now(core::Shape{rows, 1}), keep_going(core::Shape{rows, 1}), running(core::Shape{rows, 1});
    const bool last = step + 1 == cap;
    const Real threshold = Real(1) - Real(cfg_.halt_epsilon);
    for (std::size_t i = 0; i < rows; ++i) {
      probs_log.push_back(p.value()[i]);
      if (halted[i]) continue;
      running[i] = Real(1);
      ++result.steps_used[i];
      if (last || cum_value[i] + p.value()[i] >= threshold) {
        halt_now[i] = Real(1);
      } else {
        keep_going[i] = Real(1);
      }
    }
    auto halt_mask = Tensor<Real>::constant(std::move(halt_now));
    auto go_mask = Tensor<Real>::constant(std::move(keep_going));
    // Delta = remainder (1 - cum) for tokens halting now, p for tokens that keep going.
    auto rest = ops::mul(halt_mask, ops::add_scalar(ops::scale(cum, Real(-1)), Real(1)));
    auto delta = ops::add(rest, ops::mul(go_mask, p));
    remainder = ops::add(remainder, rest);
    cum = ops::add(cum, delta);
    for (std::size_t i = 0; i < rows; ++i) {
      alloc_log.push_back(delta.value()[i]);
      cum_value[i] = cum.value()[i];
      if (halt_mask.value()[i] > 0) halted[i] = true;
    }
    auto weighted = ops::mul_col(h, delta);
    mixture = mixture.defined() ? ops::add(mixture, weighted) : weighted;

    // Halted tokens keep their state; running ones take the new one.
    auto run_mask = Tensor<Real>::constant(std::move(running));
    if (state.defined()) {
      NdArray<Real> frozen(core::Shape{rows, 1});
      for (std::size_t i = 0; i < rows; ++i) frozen[i] = run_mask.value()[i] > 0 ? Real(0) : Real(1);
      state = ops::add(ops::mul_col(h, run_mask), ops::mul_col(state, Tensor<Real>::constant(std::move(frozen))));
    } else {
      state = h;
    }
    if (std::all_of(halted.begin(), halted.end(), [](bool b) { return b; })) break;
  }

  const std::size_t steps = result.outer_steps;
  result.halting_probs = NdArray<Real>(core::Shape{steps, rows}, std::move(probs_log));
  result.allocations = NdArray<Real>(core::Shape{steps, rows}, std::move(alloc_log));
  result.h_final = mixture;
  result.logits = (cap == 1) ? result.loop_logits.back() : unembed(mixture);
  if (cfg_.ponder_cost > 0.0 && cap > 1) {
    double mean_steps = 0.0;
    for (int s : result.steps_used) mean_steps += s;
    mean_steps /= double(rows);
    result.ponder = ops::add_scalar(ops::mean(remainder), Real(mean_steps));
  }
  return result;
}

template <typename Real>
Tensor<Real> UrmModel<Real>::vanilla_forward(const Batch& batch) const {
  auto ctx = context(batch);
  auto h = nn::embed<Real>(batch.tokens, batch.seq_len, batch.puzzle_ids, embedding_, cfg_, 0);
  for (const auto& layer : layers_) h = nn::transition_block(h, layer, ctx);
  return ops::matmul(h, unembed_);
}

template <typename Real>
void UrmModel<Real>::copy_values_from(const UrmModel& other) {
  if (other.store_.size() != store_.size()) throw std::invalid_argument("copy_values_from: parameter sets differ");
  for (std::size_t i = 0; i < store_.size(); ++i) {
    auto& dst = store_.entries()[i];
    const auto& src = other.store_.entries()[i];
    if (dst.name != src.name || dst.tensor.shape() != src.tensor.shape())
      throw std::invalid_argument("copy_values_from: parameter mismatch at " + dst.name);
    dst.tensor.mutable_value() = src.tensor.value();
  }
}

template <typename Real>
Tensor<Real> tbptl_loss(const ForwardResult<Real>& result, std::span<const int> labels,
                        const ModelConfig& cfg, std::vector<double>* per_loop) {
  if (per_loop != nullptr) per_loop->clear();
  if (result.loop_logits.empty()) throw ConfigError({"tbptl_loss needs at least one trainable loop"});
  Tensor<Real> total;
  for (const auto& logits : result.loop_logits) {
    auto l = ops::cross_entropy(logits, labels, tasks::kIgnoreIndex);
    if (per_loop != nullptr) per_loop->push_back(double(l.item()));
    total = total.defined() ? ops::add(total, l) : l;
  }
  if (cfg.loss_mean_over_loops) total = ops::scale(total, Real(1) / Real(cfg.trainable_loops()));
  if (cfg.act_max_steps > 1 && cfg.act_supervise_mixture)
    total = ops::add(total, ops::cross_entropy(result.logits, labels, tasks::kIgnoreIndex));
  if (result.ponder.defined()) total = ops::add(total, ops::scale(result.ponder, Real(cfg.ponder_cost)));
  return total;
}

template class UrmModel<float>;
template class UrmModel<double>;
template Tensor<float> tbptl_loss(const ForwardResult<float>&, std::span<const int>, const ModelConfig&,
                                std::vector<double>*);
template Tensor<double> tbptl_loss(const ForwardResult<double>&, std::span<const int>, const ModelConfig&,
                                 std::vector<double>*);

}  // namespace urm::model
