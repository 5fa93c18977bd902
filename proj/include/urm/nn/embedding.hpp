#pragma once

#include <cstddef>
#include <span>

#include "urm/core/ops.hpp"
#include "urm/nn/config.hpp"
#include "urm/nn/params.hpp"

namespace urm::nn {

template <typename Real>
struct EmbeddingParams {
  Tensor<Real> token;     // [V x d]
  Tensor<Real> position;  // [max_seq_len x d], learned scheme only
  Tensor<Real> depth;     // [max_depth x d], learned depth only
  Tensor<Real> puzzle;    // [puzzle_table_size x d], when enabled
};

template <typename Real>
EmbeddingParams<Real> make_embedding(ParamStore<Real>& store, const ModelConfig& cfg,
                                     core::Rng& rng);

// table[pos, 2i] = sin(pos / 10000^(2i/d)), table[pos, 2i+1] = cos(same angle)
template <typename Real>
NdArray<Real> sinusoidal_table(std::size_t length, std::size_t width);

// Token + position + broadcast puzzle embedding for B sequences of seq_len
// tokens. puzzle_ids has one entry per sequence.
template <typename Real>
Tensor<Real> embed_base(std::span<const int> tokens, std::size_t seq_len,
                        std::span<const int> puzzle_ids, const EmbeddingParams<Real>& p,
                        const ModelConfig& cfg);

// Depth encoding for loop index `step`, broadcast to `rows` rows. Undefined
// tensor when depth encoding is off.
template <typename Real>
Tensor<Real> depth_encoding(std::size_t step, std::size_t rows, const EmbeddingParams<Real>& p,
                            const ModelConfig& cfg);

// embed_base + depth_encoding(step).
template <typename Real>
Tensor<Real> embed(std::span<const int> tokens, std::size_t seq_len, std::span<const int> puzzle_ids,
                   const EmbeddingParams<Real>& p, const ModelConfig& cfg, std::size_t step);

}  // namespace urm::nn
