#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "urm/nn/blocks.hpp"
#include "urm/nn/embedding.hpp"
#include "urm/tasks/instance.hpp"

namespace urm::model {

using core::NdArray;
using core::Tensor;
using nn::ModelConfig;

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::vector<std::string>& problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

// B sequences of seq_len tokens, stacked as rows.
struct Batch {
  std::vector<int> tokens;
  std::vector<int> labels;  // kIgnoreIndex on padding
  std::vector<int> puzzle_ids;
  std::size_t seq_len = 0;

  std::size_t size() const { return seq_len ? tokens.size() / seq_len : 0; }
  std::size_t rows() const { return tokens.size(); }
};

// Tokenizes instances to cfg.max_seq_len and picks puzzle ids per cfg.
Batch make_batch(std::span<const tasks::PuzzleInstance> instances, const ModelConfig& cfg);

template <typename Real>
struct RolloutResult {
  Tensor<Real> final_state;               // top-layer output of loop M
  std::vector<Tensor<Real>> loop_states;  // top-layer outputs of loops N+1..M
};

template <typename Real>
struct ForwardResult {
  Tensor<Real> logits;                    // unembed(h_final), [rows x V]
  std::vector<Tensor<Real>> loop_logits;  // every trainable loop of every outer step
  Tensor<Real> h_final;
  NdArray<Real> halting_probs;            // [outer steps x rows]
  NdArray<Real> allocations;              // [outer steps x rows], Delta
  std::vector<int> steps_used;            // per row
  std::size_t outer_steps = 0;
  Tensor<Real> ponder;                    // defined when ponder_cost > 0
};

struct ForwardOptions {
  // Overrides cfg.forward_only_loops when set.
  std::optional<std::size_t> forward_only_loops;
  // Receives every attention matrix (loop-major, layer-minor) when set.
  bool record_attention = false;
};

// Handling of the detached loop-N states inside inner_rollout. Record keeps a
// copy of each one; replay substitutes the recorded copies in order instead of
// running loops 1..N. Replay makes the truncated loss an ordinary function of
// the parameters, which is what finite differences need.
enum class TruncationCache { kOff, kRecord, kReplay };

template <typename Real>
class UrmModel {
 public:
  UrmModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore<Real>& params() { return store_; }
  const nn::ParamStore<Real>& params() const { return store_; }
  std::size_t parameter_count() const { return store_.total_elements(); }
  const std::vector<nn::LayerParams<Real>>& layers() const { return layers_; }
  const nn::EmbeddingParams<Real>& embedding() const { return embedding_; }
  const Tensor<Real>& unembedding() const { return unembed_; }
  const Tensor<Real>& halt_weight() const { return halt_w_; }
  const Tensor<Real>& halt_bias() const { return halt_b_; }

  nn::BlockContext<Real> context(const Batch& batch) const;

  // One application of the shared D-layer stack.
  Tensor<Real> stack(const Tensor<Real>& h, const nn::BlockContext<Real>& ctx) const;

  // Loop input for inner index t: base + depth(t) on the very first loop,
  // otherwise state (+ base when input injection is on) + depth(t).
  Tensor<Real> loop_input(const Tensor<Real>& state, const Tensor<Real>& base, std::size_t t) const;

  // M applications of the stack starting from `state` (undefined on the first
  // outer step). Loops 1..N run without recording; their output enters loop
  // N+1 as a constant.
  RolloutResult<Real> inner_rollout(const Tensor<Real>& state, const Tensor<Real>& base,
                                    const nn::BlockContext<Real>& ctx, std::size_t forward_only) const;

  Tensor<Real> unembed(const Tensor<Real>& h) const;
  // sigma(w^T h + b) per row, [rows x 1]; averaged per sequence at sequence
  // granularity.
  Tensor<Real> halting_probability(const Tensor<Real>& h, std::size_t seq_len) const;

  // ACT outer loop around inner_rollout.
  ForwardResult<Real> forward(const Batch& batch, const ForwardOptions& options = {}) const;

  // Plain D-layer pass with the same weights: embed, stack once, unembed.
  Tensor<Real> vanilla_forward(const Batch& batch) const;

  // Attention weights recorded by the last forward with record_attention.
  const std::vector<NdArray<Real>>& recorded_attention() const { return attention_; }

  // Copies parameter values (not graph state) from another model of the same config.
  void copy_values_from(const UrmModel& other);

  void set_truncation_cache(TruncationCache mode);

 private:
  ModelConfig cfg_;
  nn::ParamStore<Real> store_;
  nn::EmbeddingParams<Real> embedding_;
  std::vector<nn::LayerParams<Real>> layers_;
  Tensor<Real> unembed_;
  Tensor<Real> halt_w_, halt_b_;
  mutable std::vector<NdArray<Real>> attention_;
  TruncationCache cache_mode_ = TruncationCache::kOff;
  mutable std::vector<NdArray<Real>> truncated_;
  mutable std::size_t replay_index_ = 0;
};

// Sum over trainable loops (and outer steps) of the per-loop cross-entropy,
// plus the mixture loss when ACT runs more than one step and the ponder term.
// per_loop, when given, receives each trainable loop's cross-entropy.
template <typename Real>
Tensor<Real> tbptl_loss(const ForwardResult<Real>& result, std::span<const int> labels,
                        const ModelConfig& cfg, std::vector<double>* per_loop = nullptr);

extern template class UrmModel<float>;
extern template class UrmModel<double>;

}  // namespace urm::model
