#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "urm/core/ops.hpp"
#include "urm/nn/config.hpp"
#include "urm/nn/params.hpp"

namespace urm::nn {

template <typename Real>
struct AttentionParams {
  Tensor<Real> w_q, w_k, w_v, w_o;  // each [d x d], heads are contiguous column blocks
  std::size_t heads = 1;
  // Short conv for insertion points (a)-(e): [head_dim x k] shared by all heads
  // for (a)-(d), [d x k] for (e). Undefined otherwise.
  Tensor<Real> conv;
};

template <typename Real>
struct ConvSwiGLUParams {
  Tensor<Real> w_up;      // [d x 2m] for gated activations, [d x m] otherwise
  Tensor<Real> w_dwconv;  // [m x k]; undefined when the conv is disabled
  Tensor<Real> w_down;    // [m x d]
  std::size_t expansion = 0;
  std::size_t kernel = 0;
};

template <typename Real>
struct LayerParams {
  AttentionParams<Real> attn;
  ConvSwiGLUParams<Real> ffn;
  Tensor<Real> norm_attn;  // [d]
  Tensor<Real> norm_ffn;   // [d]
};

// Per-forward constants shared by every block call.
template <typename Real>
struct BlockContext {
  const ModelConfig* cfg = nullptr;
  std::size_t seq_len = 0;
  // Rotary tables broadcast to [B*T x d] plus the pair-rotation matrix [d x d].
  Tensor<Real> rope_cos, rope_sin, rope_rotate;
  // When set, every attention call appends its [B x h x T x T] weights.
  std::vector<NdArray<Real>>* attention_sink = nullptr;
};

template <typename Real>
BlockContext<Real> make_context(const ModelConfig& cfg, std::size_t batch, std::size_t seq_len);

template <typename Real>
LayerParams<Real> make_layer(ParamStore<Real>& store, const std::string& prefix,
                             const ModelConfig& cfg, core::Rng& rng);

template <typename Real>
Tensor<Real> norm(const Tensor<Real>& x, const Tensor<Real>& gain, const ModelConfig& cfg);

// sigma(dwconv(x)) with left padding k-1; sigma is SiLU unless cfg.conv_silu
// is off.
template <typename Real>
Tensor<Real> short_conv(const Tensor<Real>& x, const Tensor<Real>& kernel, bool apply_silu,
                        std::size_t seq_len);

// Y = [SiLU(W_dwconv * (SiLU(G) . U))] W_down with [G, U] = X W_up. Without a
// conv kernel this is plain SwiGLU.
template <typename Real>
Tensor<Real> conv_swiglu(const Tensor<Real>& x, const ConvSwiGLUParams<Real>& p,
                         std::size_t seq_len, bool conv_silu = true);

// Transition function selected by cfg.ffn_activation, conv placed per cfg.
template <typename Real>
Tensor<Real> feed_forward(const Tensor<Real>& x, const ConvSwiGLUParams<Real>& p,
                          const BlockContext<Real>& ctx);

// Attention output after W_O, before the residual.
template <typename Real>
Tensor<Real> attention(const Tensor<Real>& h, const AttentionParams<Real>& p,
                       const BlockContext<Real>& ctx, NdArray<Real>* probabilities = nullptr);

template <typename Real>
struct MhsaOutput {
  Tensor<Real> out;
  NdArray<Real> attn;  // [B x h x T x T]
};

// Attention sublayer with residual and norm (post-norm: Norm(H + MHA(H))).
template <typename Real>
MhsaOutput<Real> mhsa(const Tensor<Real>& h, const AttentionParams<Real>& p,
                      const Tensor<Real>& norm_gain, const BlockContext<Real>& ctx);

// One full layer: attention sublayer then transition sublayer.
template <typename Real>
Tensor<Real> transition_block(const Tensor<Real>& h, const LayerParams<Real>& layer,
                              const BlockContext<Real>& ctx);

}  // namespace urm::nn
