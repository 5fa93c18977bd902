#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "urm/core/tensor.hpp"

namespace urm::core {

inline constexpr int kIgnoreIndex = -100;

// ---- linear algebra ------------------------------------------------------

// [m x k] x [k x n] -> [m x n]
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& x);

// ---- elementwise -----------------------------------------------------------

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real>
Tensor<Real> scale(const Tensor<Real>& x, Real s);
template <typename Real>
Tensor<Real> add_scalar(const Tensor<Real>& x, Real s);

// x[r, c] + bias[c]
template <typename Real>
Tensor<Real> add_row(const Tensor<Real>& x, const Tensor<Real>& bias);
// x[r, c] * column[r]; column has shape [rows x 1]
template <typename Real>
Tensor<Real> mul_col(const Tensor<Real>& x, const Tensor<Real>& column);

template <typename Real>
Tensor<Real> silu(const Tensor<Real>& x);
// Derivative at exactly 0 is taken as 0.
template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x);
template <typename Real>
Tensor<Real> sigmoid(const Tensor<Real>& x);

// ---- reductions --------------------------------------------------------------

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x);
template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x);

// ---- normalisation / probabilities -------------------------------------------

// Max-subtracted softmax over the last axis.
template <typename Real>
Tensor<Real> softmax_lastdim(const Tensor<Real>& x);

// y = x / sqrt(mean(x^2) + eps) * gain, per row. gain has the last extent.
template <typename Real>
Tensor<Real> rmsnorm(const Tensor<Real>& x, const Tensor<Real>& gain, Real eps);

// Mean negative log-likelihood over positions whose target is not
// ignore_index. Returns 0 (with zero gradient) when every position is ignored.
template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, std::span<const int> targets,
                           int ignore_index = kIgnoreIndex);

// ---- sequence ops --------------------------------------------------------------

// Depthwise 1-D convolution along the row (token) axis. x is [B*T x m] holding
// B sequences of length seq_len; kernel is [m x k] with tap k-1 on the current
// token and tap 0 on token t-k+1. Requires pad_left == k-1. Positions before the
// start of each sequence read as zero, so sequences never mix.
template <typename Real>
Tensor<Real> dwconv1d(const Tensor<Real>& x, const Tensor<Real>& kernel, std::size_t pad_left,
                      std::size_t seq_len);
template <typename Real>
Tensor<Real> dwconv1d(const Tensor<Real>& x, const Tensor<Real>& kernel, std::size_t pad_left) {
  return dwconv1d(x, kernel, pad_left, x.rows());
}

struct AttentionSpec {
  std::size_t heads = 1;
  std::size_t seq_len = 0;
  bool causal = false;
  bool softmax = true;
};

// Multi-head scaled dot-product attention over B sequences stacked as rows.
// q, k, v are [B*T x d], heads split d into contiguous blocks. When
// probabilities is non-null it receives the [B x heads x T x T] attention
// weights (the scaled scores when softmax is off).
template <typename Real>
Tensor<Real> scaled_dot_attention(const Tensor<Real>& q, const Tensor<Real>& k,
                                  const Tensor<Real>& v, const AttentionSpec& spec,
                                  NdArray<Real>* probabilities = nullptr);

// ---- plumbing ------------------------------------------------------------------

// Same values, no gradient path to anything upstream.
template <typename Real>
Tensor<Real> detach(const Tensor<Real>& x);

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape);

template <typename Real>
Tensor<Real> concat_cols(const std::vector<Tensor<Real>>& parts);
template <typename Real>
Tensor<Real> slice_cols(const Tensor<Real>& x, std::size_t begin, std::size_t end);
// Stacks `times` copies of x vertically.
template <typename Real>
Tensor<Real> repeat_rows(const Tensor<Real>& x, std::size_t times);

// table [V x d], ids in [0, V) -> [len(ids) x d]
template <typename Real>
Tensor<Real> embedding(const Tensor<Real>& table, std::span<const int> ids);

}  // namespace urm::core
