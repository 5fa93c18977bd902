#include "urm/nn/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace urm::nn {

using core::Rng;
namespace ops = urm::core;

template <typename Real>
BlockContext<Real> make_context(const ModelConfig& cfg, std::size_t batch, std::size_t seq_len) {
  BlockContext<Real> ctx;
  ctx.cfg = &cfg;
  ctx.seq_len = seq_len;
  if (cfg.positional == PositionalScheme::kRotary) {
    const std::size_t d = cfg.hidden, hd = cfg.head_dim();
    NdArray<Real> cos_t(Shape{seq_len, d}), sin_t(Shape{seq_len, d}), rot(Shape{d, d});
    for (std::size_t t = 0; t < seq_len; ++t) {
      for (std::size_t c = 0; c < d; ++c) {
        const std::size_t pair = (c % hd) / 2;
        const double theta = double(t) / std::pow(10000.0, 2.0 * double(pair) / double(hd));
        cos_t.at(t, c) = Real(std::cos(theta));
        sin_t.at(t, c) = Real(std::sin(theta));
      }
    }
    for (std::size_t c = 0; c + 1 < d; c += 2) {
      rot.at(c + 1, c) = Real(-1);
      rot.at(c, c + 1) = Real(1);
    }
    ctx.rope_cos = ops::repeat_rows(Tensor<Real>::constant(std::move(cos_t)), batch);
    ctx.rope_sin = ops::repeat_rows(Tensor<Real>::constant(std::move(sin_t)), batch);
    ctx.rope_rotate = Tensor<Real>::constant(std::move(rot));
  }
  return ctx;
}

template <typename Real>
LayerParams<Real> make_layer(ParamStore<Real>& store, const std::string& prefix,
                             const ModelConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.hidden, m = cfg.expansion(), k = cfg.conv_kernel;
  const double sd = 1.0 / std::sqrt(double(d));
  LayerParams<Real> layer;
  auto& a = layer.attn;
  a.heads = cfg.heads;
  a.w_q = store.add(prefix + ".attn.w_q", normal_array<Real>({d, d}, sd, rng), ParamRole::kHiddenMatrix);
  a.w_k = store.add(prefix + ".attn.w_k", normal_array<Real>({d, d}, sd, rng), ParamRole::kHiddenMatrix);
  a.w_v = store.add(prefix + ".attn.w_v", normal_array<Real>({d, d}, sd, rng), ParamRole::kHiddenMatrix);
  a.w_o = store.add(prefix + ".attn.w_o", normal_array<Real>({d, d}, sd, rng), ParamRole::kHiddenMatrix);

  auto conv_init = [&](std::size_t channels) {
    // Uniform(-1/sqrt(k), 1/sqrt(k)), the usual depthwise fan-in bound.
    NdArray<Real> w(Shape{channels, k});
    const double bound = 1.0 / std::sqrt(double(k));
    for (auto& v : w.data()) v = Real(rng.uniform(-bound, bound));
    return w;
  };
  switch (cfg.conv_insertion) {
    case ConvInsertion::kAfterSdpa:
    case ConvInsertion::kAfterValue:
    case ConvInsertion::kAfterKey:
    case ConvInsertion::kAfterQuery:
      a.conv = store.add(prefix + ".attn.conv", conv_init(cfg.head_dim()), ParamRole::kConvKernel);
      break;
    case ConvInsertion::kBeforeOutputProj:
      a.conv = store.add(prefix + ".attn.conv", conv_init(d), ParamRole::kConvKernel);
      break;
    default:
      break;
  }

  auto& f = layer.ffn;
  f.expansion = m;
  f.kernel = k;
  const std::size_t up_width = cfg.ffn_activation == FfnActivation::kSwiGlu ? 2 * m : m;
  f.w_up = store.add(prefix + ".ffn.w_up", normal_array<Real>({d, up_width}, sd, rng),
                     ParamRole::kHiddenMatrix);
  if (cfg.conv_insertion == ConvInsertion::kAfterMlpExpansion)
    f.w_dwconv = store.add(prefix + ".ffn.w_dwconv", conv_init(m), ParamRole::kConvKernel);
  f.w_down = store.add(prefix + ".ffn.w_down", normal_array<Real>({m, d}, 1.0 / std::sqrt(double(m)), rng),
                       ParamRole::kHiddenMatrix);

  layer.norm_attn = store.add(prefix + ".norm_attn", NdArray<Real>(Shape{d}, Real(1)), ParamRole::kVector);
  layer.norm_ffn = store.add(prefix + ".norm_ffn", NdArray<Real>(Shape{d}, Real(1)), ParamRole::kVector);
  return layer;
}

template <typename Real>
Tensor<Real> norm(const Tensor<Real>& x, const Tensor<Real>& gain, const ModelConfig& cfg) {
  return ops::rmsnorm(x, gain, Real(cfg.norm_eps));
}

template <typename Real>
Tensor<Real> short_conv(const Tensor<Real>& x, const Tensor<Real>& kernel, bool apply_silu,
                        std::size_t seq_len) {
  auto y = ops::dwconv1d(x, kernel, kernel.cols() - 1, seq_len);
  return apply_silu ? ops::silu(y) : y;
}

namespace {

// Per-head layout: the [head_dim x k] kernel is shared by every head.
template <typename Real>
Tensor<Real> per_head_conv(const Tensor<Real>& x, const AttentionParams<Real>& p,
                           const BlockContext<Real>& ctx) {
  return short_conv(x, ops::repeat_rows(p.conv, p.heads), ctx.cfg->conv_silu, ctx.seq_len);
}

template <typename Real>
Tensor<Real> apply_rotary(const Tensor<Real>& x, const BlockContext<Real>& ctx) {
  return ops::add(ops::mul(x, ctx.rope_cos), ops::mul(ops::matmul(x, ctx.rope_rotate), ctx.rope_sin));
}

}  // namespace

template <typename Real>
Tensor<Real> conv_swiglu(const Tensor<Real>& x, const ConvSwiGLUParams<Real>& p,
                         std::size_t seq_len, bool conv_silu) {
  const std::size_t m = p.expansion;
  auto up = ops::matmul(x, p.w_up);
  auto gate = ops::slice_cols(up, 0, m);
  auto value = ops::slice_cols(up, m, 2 * m);
  auto hidden = ops::mul(ops::silu(gate), value);
  if (p.w_dwconv.defined()) hidden = short_conv(hidden, p.w_dwconv, conv_silu, seq_len);
  return ops::matmul(hidden, p.w_down);
}

template <typename Real>
Tensor<Real> feed_forward(const Tensor<Real>& x, const ConvSwiGLUParams<Real>& p,
                          const BlockContext<Real>& ctx) {
  const auto& cfg = *ctx.cfg;
  if (cfg.ffn_activation == FfnActivation::kSwiGlu) return conv_swiglu(x, p, ctx.seq_len, cfg.conv_silu);
  auto up = ops::matmul(x, p.w_up);
  auto hidden = cfg.ffn_activation == FfnActivation::kSilu ? ops::silu(up) : ops::relu(up);
  if (p.w_dwconv.defined()) hidden = short_conv(hidden, p.w_dwconv, cfg.conv_silu, ctx.seq_len);
  return ops::matmul(hidden, p.w_down);
}

template <typename Real>
Tensor<Real> attention(const Tensor<Real>& h, const AttentionParams<Real>& p,
                       const BlockContext<Real>& ctx, NdArray<Real>* probabilities) {
  const auto& cfg = *ctx.cfg;
  const auto where = cfg.conv_insertion;
  auto q = ops::matmul(h, p.w_q);
  auto k = ops::matmul(h, p.w_k);
  auto v = ops::matmul(h, p.w_v);
  if (where == ConvInsertion::kAfterQuery) q = per_head_conv(q, p, ctx);
  if (where == ConvInsertion::kAfterKey) k = per_head_conv(k, p, ctx);
  if (where == ConvInsertion::kAfterValue) v = per_head_conv(v, p, ctx);
  if (cfg.positional == PositionalScheme::kRotary) {
    q = apply_rotary(q, ctx);
    k = apply_rotary(k, ctx);
  }
  core::AttentionSpec spec{p.heads, ctx.seq_len, cfg.causal, cfg.attention_softmax};
  auto o = ops::scaled_dot_attention(q, k, v, spec, probabilities);
  if (where == ConvInsertion::kAfterSdpa) o = per_head_conv(o, p, ctx);
  if (where == ConvInsertion::kBeforeOutputProj) o = short_conv(o, p.conv, cfg.conv_silu, ctx.seq_len);
  return ops::matmul(o, p.w_o);
}

template <typename Real>
MhsaOutput<Real> mhsa(const Tensor<Real>& h, const AttentionParams<Real>& p,
                      const Tensor<Real>& norm_gain, const BlockContext<Real>& ctx) {
  MhsaOutput<Real> result;
  if (ctx.cfg->norm_placement == NormPlacement::kPost) {
    result.out = norm(ops::add(h, attention(h, p, ctx, &result.attn)), norm_gain, *ctx.cfg);
  } else {
    result.out = ops::add(h, attention(norm(h, norm_gain, *ctx.cfg), p, ctx, &result.attn));
  }
  if (ctx.attention_sink != nullptr) ctx.attention_sink->push_back(result.attn);
  return result;
}

template <typename Real>
Tensor<Real> transition_block(const Tensor<Real>& h, const LayerParams<Real>& layer,
                              const BlockContext<Real>& ctx) {
  auto mid = mhsa(h, layer.attn, layer.norm_attn, ctx).out;
  if (ctx.cfg->norm_placement == NormPlacement::kPost)
    return norm(ops::add(mid, feed_forward(mid, layer.ffn, ctx)), layer.norm_ffn, *ctx.cfg);
  return ops::add(mid, feed_forward(norm(mid, layer.norm_ffn, *ctx.cfg), layer.ffn, ctx));
}

#define URM_INSTANTIATE_BLOCKS(Real)                                                              \
  template BlockContext<Real> make_context<Real>(const ModelConfig&, std::size_t, std::size_t);   \
  template LayerParams<Real> make_layer(ParamStore<Real>&, const std::string&, const ModelConfig&, \
                                        Rng&);                                                    \
  template Tensor<Real> norm(const Tensor<Real>&, const Tensor<Real>&, const ModelConfig&);       \
  template Tensor<Real> short_conv(const Tensor<Real>&, const Tensor<Real>&, bool, std::size_t);  \
  template Tensor<Real> conv_swiglu(const Tensor<Real>&, const ConvSwiGLUParams<Real>&,           \
                                    std::size_t, bool);                                           \
  template Tensor<Real> feed_forward(const Tensor<Real>&, const ConvSwiGLUParams<Real>&,          \
                                     const BlockContext<Real>&);                                  \
  template Tensor<Real> attention(const Tensor<Real>&, const AttentionParams<Real>&,              \
                                  const BlockContext<Real>&, NdArray<Real>*);                     \
  template MhsaOutput<Real> mhsa(const Tensor<Real>&, const AttentionParams<Real>&,               \
                                 const Tensor<Real>&, const BlockContext<Real>&);                 \
  template Tensor<Real> transition_block(const Tensor<Real>&, const LayerParams<Real>&,           \
                                         const BlockContext<Real>&);

URM_INSTANTIATE_BLOCKS(float)
URM_INSTANTIATE_BLOCKS(double)

}  // namespace urm::nn
