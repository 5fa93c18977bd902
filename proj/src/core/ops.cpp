#include "urm/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace urm::core {

namespace {

template <typename Real>
using NodePtr = std::shared_ptr<Node<Real>>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

template <typename Real>
void require_2d(const char* op, const Tensor<Real>& x) {
  require(x.value().ndim() == 2, std::string(op) + ": expected a 2-D tensor, got " +
                                     shape_string(x.shape()));
}

// C[m x n] (+)= A[m x k] * B[k x n]; saxpy form so the inner loop vectorises
// without reassociation.
template <typename Real>
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Real>
std::vector<Real> transposed(const Real* x, std::size_t r, std::size_t c) {
  std::vector<Real> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return out;
}

template <typename Real>
Real sigmoid_scalar(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

template <typename Real, typename F, typename DF>
Tensor<Real> unary(std::string_view name, const Tensor<Real>& x, F f, DF df) {
  NdArray<Real> out(x.shape());
  auto src = x.value().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return make_result<Real>(name, std::move(out), {x.node()}, [df](Node<Real>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto g = self.grad.data();
    auto xv = in.value.data();
    auto& gb = in.grad_buffer();
    auto dst = gb.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * df(xv[i]);
  });
}

}  // namespace

// ---- linear algebra ------------------------------------------------------

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw_shape_mismatch("matmul", a.shape(), b.shape());
  NdArray<Real> out(Shape{m, n});
  gemm_nn(a.value().data().data(), b.value().data().data(), out.data().data(), m, k, n);
  return make_result<Real>("matmul", std::move(out), {a.node(), b.node()},
                           [m, k, n](Node<Real>& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    const Real* g = self.grad.data().data();
    if (na.requires_grad) {
      // dA = G * B^T
      auto bt = transposed(nb.value.data().data(), k, n);
      gemm_nn(g, bt.data(), na.grad_buffer().data().data(), m, n, k);
    }
    if (nb.requires_grad) {
      // dB = A^T * G
      auto at = transposed(na.value.data().data(), m, k);
      gemm_nn(at.data(), g, nb.grad_buffer().data().data(), k, m, n);
    }
  });
}

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& x) {
  require_2d("transpose", x);
  const std::size_t r = x.rows(), c = x.cols();
  NdArray<Real> out(Shape{c, r}, transposed(x.value().data().data(), r, c));
  return make_result<Real>("transpose", std::move(out), {x.node()}, [r, c](Node<Real>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto back = transposed(self.grad.data().data(), c, r);
    in.accumulate_grad(back);
  });
}

// ---- elementwise -----------------------------------------------------------

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) throw_shape_mismatch("add", a.shape(), b.shape());
  NdArray<Real> out(a.shape());
  auto x = a.value().data(), y = b.value().data();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] + y[i];
  return make_result<Real>("add", std::move(out), {a.node(), b.node()}, [](Node<Real>& self) {
    for (auto& in : self.inputs)
      if (in->requires_grad) in->accumulate_grad(self.grad.data());
  });
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) throw_shape_mismatch("sub", a.shape(), b.shape());
  NdArray<Real> out(a.shape());
  auto x = a.value().data(), y = b.value().data();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - y[i];
  return make_result<Real>("sub", std::move(out), {a.node(), b.node()}, [](Node<Real>& self) {
    auto g = self.grad.data();
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate_grad(g);
    if (self.inputs[1]->requires_grad) {
      auto dst = self.inputs[1]->grad_buffer().data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] -= g[i];
    }
  });
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) throw_shape_mismatch("mul", a.shape(), b.shape());
  NdArray<Real> out(a.shape());
  auto x = a.value().data(), y = b.value().data();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] * y[i];
  return make_result<Real>("mul", std::move(out), {a.node(), b.node()}, [](Node<Real>& self) {
    auto g = self.grad.data();
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) {
      auto dst = na.grad_buffer().data();
      auto y = nb.value.data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * y[i];
    }
    if (nb.requires_grad) {
      auto dst = nb.grad_buffer().data();
      auto x = na.value.data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * x[i];
    }
  });
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& x, Real s) {
  return unary<Real>("scale", x, [s](Real v) { return v * s; }, [s](Real) { return s; });
}

template <typename Real>
Tensor<Real> add_scalar(const Tensor<Real>& x, Real s) {
  return unary<Real>("add_scalar", x, [s](Real v) { return v + s; }, [](Real) { return Real(1); });
}

template <typename Real>
Tensor<Real> add_row(const Tensor<Real>& x, const Tensor<Real>& bias) {
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.numel() != c) throw_shape_mismatch("add_row", x.shape(), bias.shape());
  NdArray<Real> out(x.shape());
  auto src = x.value().data(), bv = bias.value().data();
  auto d = out.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) d[i * c + j] = src[i * c + j] + bv[j];
  return make_result<Real>("add_row", std::move(out), {x.node(), bias.node()},
                           [r, c](Node<Real>& self) {
    auto g = self.grad.data();
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate_grad(g);
    if (self.inputs[1]->requires_grad) {
      auto dst = self.inputs[1]->grad_buffer().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dst[j] += g[i * c + j];
    }
  });
}

template <typename Real>
Tensor<Real> mul_col(const Tensor<Real>& x, const Tensor<Real>& column) {
  const std::size_t r = x.rows(), c = x.cols();
  if (column.numel() != r) throw_shape_mismatch("mul_col", x.shape(), column.shape());
  NdArray<Real> out(x.shape());
  auto src = x.value().data(), cv = column.value().data();
  auto d = out.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) d[i * c + j] = src[i * c + j] * cv[i];
  return make_result<Real>("mul_col", std::move(out), {x.node(), column.node()},
                           [r, c](Node<Real>& self) {
    auto g = self.grad.data();
    auto& nx = *self.inputs[0];
    auto& nc = *self.inputs[1];
    if (nx.requires_grad) {
      auto dst = nx.grad_buffer().data();
      auto cv = nc.value.data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += g[i * c + j] * cv[i];
    }
    if (nc.requires_grad) {
      auto dst = nc.grad_buffer().data();
      auto xv = nx.value.data();
      for (std::size_t i = 0; i < r; ++i) {
        Real acc = 0;
        for (std::size_t j = 0; j < c; ++j) acc += g[i * c + j] * xv[i * c + j];
        dst[i] += acc;
      }
    }
  });
}

template <typename Real>
Tensor<Real> silu(const Tensor<Real>& x) {
  return unary<Real>(
      "silu", x, [](Real v) { return v * sigmoid_scalar(v); },
      [](Real v) {
        const Real s = sigmoid_scalar(v);
        return s * (Real(1) + v * (Real(1) - s));
      });
}

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x) {
  return unary<Real>(
      "relu", x, [](Real v) { return v > 0 ? v : Real(0); },
      [](Real v) { return v > 0 ? Real(1) : Real(0); });
}

template <typename Real>
Tensor<Real> sigmoid(const Tensor<Real>& x) {
  return unary<Real>(
      "sigmoid", x, [](Real v) { return sigmoid_scalar(v); },
      [](Real v) {
        const Real s = sigmoid_scalar(v);
        return s * (Real(1) - s);
      });
}

// ---- reductions --------------------------------------------------------------

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
  Real acc = 0;
  for (Real v : x.value().data()) acc += v;
  return make_result<Real>("sum", NdArray<Real>::scalar(acc), {x.node()}, [](Node<Real>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    const Real g = self.grad[0];
    for (auto& v : in.grad_buffer().data()) v += g;
  });
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x) {
  const std::size_t n = x.numel();
  require(n > 0, "mean: empty tensor");
  Real acc = 0;
  for (Real v : x.value().data()) acc += v;
  return make_result<Real>("mean", NdArray<Real>::scalar(acc / Real(n)), {x.node()},
                           [n](Node<Real>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    const Real g = self.grad[0] / Real(n);
    for (auto& v : in.grad_buffer().data()) v += g;
  });
}

// ---- normalisation / probabilities -------------------------------------------

template <typename Real>
Tensor<Real> softmax_lastdim(const Tensor<Real>& x) {
  require(x.value().ndim() >= 1 && x.shape().back() >= 1, "softmax_lastdim: last extent must be >= 1");
  const std::size_t c = x.shape().back();
  const std::size_t r = x.numel() / c;
  NdArray<Real> out(x.shape());
  auto src = x.value().data();
  auto d = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    const Real* row = src.data() + i * c;
    Real* o = d.data() + i * c;
    const Real mx = *std::max_element(row, row + c);
    Real z = 0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(row[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= z;
  }
  return make_result<Real>("softmax", std::move(out), {x.node()}, [r, c](Node<Real>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto g = self.grad.data();
    auto y = self.value.data();
    auto dst = in.grad_buffer().data();
    for (std::size_t i = 0; i < r; ++i) {
      Real dot = 0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

template <typename Real>
Tensor<Real> rmsnorm(const Tensor<Real>& x, const Tensor<Real>& gain, Real eps) {
  const std::size_t c = x.shape().empty() ? 1 : x.shape().back();
  if (gain.numel() != c) throw_shape_mismatch("rmsnorm", x.shape(), gain.shape());
  const std::size_t r = x.numel() / c;
  NdArray<Real> out(x.shape());
  std::vector<Real> inv_rms(r);
  auto src = x.value().data();
  auto gv = gain.value().data();
  auto d = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    Real ms = 0;
    for (std::size_t j = 0; j < c; ++j) ms += src[i * c + j] * src[i * c + j];
    ms /= Real(c);
    const Real inv = Real(1) / std::sqrt(ms + eps);
    inv_rms[i] = inv;
    for (std::size_t j = 0; j < c; ++j) d[i * c + j] = src[i * c + j] * inv * gv[j];
  }
  return make_result<Real>("rmsnorm", std::move(out), {x.node(), gain.node()},
                           [r, c, inv_rms = std::move(inv_rms)](Node<Real>& self) {
    auto& nx = *self.inputs[0];
    auto& ng = *self.inputs[1];
    auto g = self.grad.data();
    auto xv = nx.value.data();
    auto gv = ng.value.data();
    if (ng.requires_grad) {
      auto dst = ng.grad_buffer().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) dst[j] += g[i * c + j] * xv[i * c + j] * inv_rms[i];
    }
    if (nx.requires_grad) {
      auto dst = nx.grad_buffer().data();
      for (std::size_t i = 0; i < r; ++i) {
        const Real inv = inv_rms[i];
        Real dot = 0;  // sum_j dxhat_j * xhat_j
        for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * gv[j] * xv[i * c + j] * inv;
        dot /= Real(c);
        for (std::size_t j = 0; j < c; ++j) {
          const Real xhat = xv[i * c + j] * inv;
          dst[i * c + j] += inv * (g[i * c + j] * gv[j] - xhat * dot);
        }
      }
    }
  });
}

template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, std::span<const int> targets,
                           int ignore_index) {
  require_2d("cross_entropy", logits);
  const std::size_t r = logits.rows(), v = logits.cols();
  require(targets.size() == r, "cross_entropy: " + std::to_string(targets.size()) +
                                   " targets for " + std::to_string(r) + " rows");
  std::vector<int> tgt(targets.begin(), targets.end());
  std::size_t count = 0;
  for (int t : tgt) {
    if (t == ignore_index) continue;
    require(t >= 0 && static_cast<std::size_t>(t) < v,
            "cross_entropy: target " + std::to_string(t) + " outside [0, " + std::to_string(v) + ")");
    ++count;
  }
  auto src = logits.value().data();
  // Softmax probabilities are kept for the backward pass.
  std::vector<Real> probs(count ? r * v : 0);
  Real total = 0;
  if (count) {
    for (std::size_t i = 0; i < r; ++i) {
      if (tgt[i] == ignore_index) continue;
      const Real* row = src.data() + i * v;
      const Real mx = *std::max_element(row, row + v);
      Real z = 0;
      for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
      const Real lse = mx + std::log(z);
      total += lse - row[tgt[i]];
      for (std::size_t j = 0; j < v; ++j) probs[i * v + j] = std::exp(row[j] - lse);
    }
    total /= Real(count);
  }
  return make_result<Real>(
      "cross_entropy", NdArray<Real>::scalar(total), {logits.node()},
      [r, v, count, ignore_index, tgt = std::move(tgt), probs = std::move(probs)](Node<Real>& self) {
        auto& in = *self.inputs[0];
        if (!in.requires_grad || count == 0) return;
        const Real g = self.grad[0] / Real(count);
        auto dst = in.grad_buffer().data();
        for (std::size_t i = 0; i < r; ++i) {
          if (tgt[i] == ignore_index) continue;
          for (std::size_t j = 0; j < v; ++j) dst[i * v + j] += g * probs[i * v + j];
          dst[i * v + tgt[i]] -= g;
        }
      });
}

// ---- sequence ops --------------------------------------------------------------

template <typename Real>
Tensor<Real> dwconv1d(const Tensor<Real>& x, const Tensor<Real>& kernel, std::size_t pad_left,
                      std::size_t seq_len) {
  require_2d("dwconv1d", x);
  require_2d("dwconv1d", kernel);
  const std::size_t rows = x.rows(), m = x.cols(), k = kernel.cols();
  if (kernel.rows() != m) throw_shape_mismatch("dwconv1d (channels)", x.shape(), kernel.shape());
  require(k >= 1, "dwconv1d: kernel size must be >= 1");
  require(pad_left == k - 1, "dwconv1d: pad_left must equal kernel size - 1 (got " +
                                 std::to_string(pad_left) + ", k=" + std::to_string(k) + ")");
  require(seq_len > 0 && rows % seq_len == 0,
          "dwconv1d: " + std::to_string(rows) + " rows is not a multiple of seq_len " +
              std::to_string(seq_len));
  NdArray<Real> out(x.shape());
  auto xv = x.value().data();
  auto kv = kernel.value().data();
  auto d = out.data();
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t t = row % seq_len;
    for (std::size_t j = 0; j < k; ++j) {
      // tap j reads token t - (k-1) + j
      const std::size_t back = k - 1 - j;
      if (back > t) continue;
      const Real* src = xv.data() + (row - back) * m;
      Real* dst = d.data() + row * m;
      for (std::size_t c = 0; c < m; ++c) dst[c] += kv[c * k + j] * src[c];
    }
  }
  return make_result<Real>("dwconv1d", std::move(out), {x.node(), kernel.node()},
                           [rows, m, k, seq_len](Node<Real>& self) {
    auto& nx = *self.inputs[0];
    auto& nk = *self.inputs[1];
    auto g = self.grad.data();
    auto xv = nx.value.data();
    auto kv = nk.value.data();
    Real* dx = nx.requires_grad ? nx.grad_buffer().data().data() : nullptr;
    Real* dk = nk.requires_grad ? nk.grad_buffer().data().data() : nullptr;
    for (std::size_t row = 0; row < rows; ++row) {
      const std::size_t t = row % seq_len;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t back = k - 1 - j;
        if (back > t) continue;
        const std::size_t src_row = row - back;
        for (std::size_t c = 0; c < m; ++c) {
          const Real gv = g[row * m + c];
          if (dx) dx[src_row * m + c] += kv[c * k + j] * gv;
          if (dk) dk[c * k + j] += xv[src_row * m + c] * gv;
        }
      }
    }
  });
}

template <typename Real>
Tensor<Real> scaled_dot_attention(const Tensor<Real>& q, const Tensor<Real>& k,
                                  const Tensor<Real>& v, const AttentionSpec& spec,
                                  NdArray<Real>* probabilities) {
  require_2d("attention", q);
  if (k.shape() != q.shape()) throw_shape_mismatch("attention (key)", q.shape(), k.shape());
  if (v.shape() != q.shape()) throw_shape_mismatch("attention (value)", q.shape(), v.shape());
  const std::size_t rows = q.rows(), d = q.cols(), h = spec.heads, T = spec.seq_len;
  require(h > 0 && d % h == 0, "attention: width " + std::to_string(d) +
                                   " not divisible by heads " + std::to_string(h));
  require(T > 0 && rows % T == 0, "attention: rows " + std::to_string(rows) +
                                      " not a multiple of seq_len " + std::to_string(T));
  const std::size_t B = rows / T, hd = d / h;
  const Real sc = Real(1) / std::sqrt(Real(hd));
  const bool causal = spec.causal, use_softmax = spec.softmax;

  // probs[b][head][i][j]
  std::vector<Real> probs(B * h * T * T, Real(0));
  NdArray<Real> out(Shape{rows, d});
  auto qv = q.value().data(), kv = k.value().data(), vv = v.value().data();
  auto o = out.data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t hh = 0; hh < h; ++hh) {
      Real* P = probs.data() + (b * h + hh) * T * T;
      const std::size_t c0 = hh * hd;
      for (std::size_t i = 0; i < T; ++i) {
        const Real* qi = qv.data() + (b * T + i) * d + c0;
        const std::size_t jmax = causal ? i + 1 : T;
        for (std::size_t j = 0; j < jmax; ++j) {
          const Real* kj = kv.data() + (b * T + j) * d + c0;
          Real s = 0;
          for (std::size_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
          P[i * T + j] = s * sc;
        }
        if (use_softmax) {
          const Real mx = *std::max_element(P + i * T, P + i * T + jmax);
          Real z = 0;
          for (std::size_t j = 0; j < jmax; ++j) {
            P[i * T + j] = std::exp(P[i * T + j] - mx);
            z += P[i * T + j];
          }
          for (std::size_t j = 0; j < jmax; ++j) P[i * T + j] /= z;
        }
        Real* oi = o.data() + (b * T + i) * d + c0;
        for (std::size_t j = 0; j < jmax; ++j) {
          const Real p = P[i * T + j];
          const Real* vj = vv.data() + (b * T + j) * d + c0;
          for (std::size_t c = 0; c < hd; ++c) oi[c] += p * vj[c];
        }
      }
    }
  }
  if (probabilities != nullptr) *probabilities = NdArray<Real>(Shape{B, h, T, T}, probs);

  return make_result<Real>(
      "attention", std::move(out), {q.node(), k.node(), v.node()},
      [B, h, T, d, hd, sc, causal, use_softmax, probs = std::move(probs)](Node<Real>& self) {
        auto& nq = *self.inputs[0];
        auto& nk = *self.inputs[1];
        auto& nv = *self.inputs[2];
        auto g = self.grad.data();
        auto qv = nq.value.data(), kv = nk.value.data(), vv = nv.value.data();
        Real* dq = nq.requires_grad ? nq.grad_buffer().data().data() : nullptr;
        Real* dk = nk.requires_grad ? nk.grad_buffer().data().data() : nullptr;
        Real* dv = nv.requires_grad ? nv.grad_buffer().data().data() : nullptr;
        std::vector<Real> dP(T * T);
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t hh = 0; hh < h; ++hh) {
            const Real* P = probs.data() + (b * h + hh) * T * T;
            const std::size_t c0 = hh * hd;
            std::fill(dP.begin(), dP.end(), Real(0));
            for (std::size_t i = 0; i < T; ++i) {
              const Real* gi = g.data() + (b * T + i) * d + c0;
              const std::size_t jmax = causal ? i + 1 : T;
              for (std::size_t j = 0; j < jmax; ++j) {
                const Real* vj = vv.data() + (b * T + j) * d + c0;
                Real s = 0;
                for (std::size_t c = 0; c < hd; ++c) s += gi[c] * vj[c];
                dP[i * T + j] = s;
                if (dv) {
                  Real* dvj = dv + (b * T + j) * d + c0;
                  const Real p = P[i * T + j];
                  for (std::size_t c = 0; c < hd; ++c) dvj[c] += p * gi[c];
                }
              }
              // dS = P * (dP - <dP, P>) with softmax, dS = dP without.
              if (use_softmax) {
                Real dot = 0;
                for (std::size_t j = 0; j < jmax; ++j) dot += dP[i * T + j] * P[i * T + j];
                for (std::size_t j = 0; j < jmax; ++j)
                  dP[i * T + j] = P[i * T + j] * (dP[i * T + j] - dot);
              }
              const Real* qi = qv.data() + (b * T + i) * d + c0;
              for (std::size_t j = 0; j < jmax; ++j) {
                const Real ds = dP[i * T + j] * sc;
                if (ds == Real(0)) continue;
                const Real* kj = kv.data() + (b * T + j) * d + c0;
                if (dq) {
                  Real* dqi = dq + (b * T + i) * d + c0;
                  for (std::size_t c = 0; c < hd; ++c) dqi[c] += ds * kj[c];
                }
                if (dk) {
                  Real* dkj = dk + (b * T + j) * d + c0;
                  for (std::size_t c = 0; c < hd; ++c) dkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

// ---- plumbing ------------------------------------------------------------------

template <typename Real>
Tensor<Real> detach(const Tensor<Real>& x) {
  return Tensor<Real>::constant(x.value());
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape) {
  auto out = x.value().reshaped(std::move(shape));
  return make_result<Real>("reshape", std::move(out), {x.node()}, [](Node<Real>& self) {
    auto& in = *self.inputs[0];
    if (in.requires_grad) in.accumulate_grad(self.grad.data());
  });
}

template <typename Real>
Tensor<Real> concat_cols(const std::vector<Tensor<Real>>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  std::vector<std::shared_ptr<Node<Real>>> inputs;
  for (const auto& p : parts) {
    require_2d("concat_cols", p);
    if (p.rows() != r) throw_shape_mismatch("concat_cols", parts[0].shape(), p.shape());
    widths.push_back(p.cols());
    total += p.cols();
    inputs.push_back(p.node());
  }
  NdArray<Real> out(Shape{r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].value().data();
    const std::size_t w = widths[k];
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(src.data() + i * w, w, out.data().data() + i * total + off);
    off += w;
  }
  return make_result<Real>("concat_cols", std::move(out), std::move(inputs),
                           [r, total, widths = std::move(widths)](Node<Real>& self) {
    auto g = self.grad.data();
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      const std::size_t w = widths[k];
      auto& in = *self.inputs[k];
      if (in.requires_grad) {
        auto dst = in.grad_buffer().data();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < w; ++j) dst[i * w + j] += g[i * total + off + j];
      }
      off += w;
    }
  });
}

template <typename Real>
Tensor<Real> slice_cols(const Tensor<Real>& x, std::size_t begin, std::size_t end) {
  require_2d("slice_cols", x);
  const std::size_t r = x.rows(), c = x.cols();
  require(begin <= end && end <= c, "slice_cols: range [" + std::to_string(begin) + ", " +
                                        std::to_string(end) + ") outside " + shape_string(x.shape()));
  const std::size_t w = end - begin;
  NdArray<Real> out(Shape{r, w});
  auto src = x.value().data();
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(src.data() + i * c + begin, w, out.data().data() + i * w);
  return make_result<Real>("slice_cols", std::move(out), {x.node()},
                           [r, c, w, begin](Node<Real>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto g = self.grad.data();
    auto dst = in.grad_buffer().data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) dst[i * c + begin + j] += g[i * w + j];
  });
}

template <typename Real>
Tensor<Real> repeat_rows(const Tensor<Real>& x, std::size_t times) {
  require_2d("repeat_rows", x);
  require(times >= 1, "repeat_rows: times must be >= 1");
  const std::size_t n = x.numel();
  NdArray<Real> out(Shape{x.rows() * times, x.cols()});
  for (std::size_t t = 0; t < times; ++t)
    std::copy_n(x.value().data().data(), n, out.data().data() + t * n);
  return make_result<Real>("repeat_rows", std::move(out), {x.node()}, [n, times](Node<Real>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto g = self.grad.data();
    auto dst = in.grad_buffer().data();
    for (std::size_t t = 0; t < times; ++t)
      for (std::size_t i = 0; i < n; ++i) dst[i] += g[t * n + i];
  });
}

template <typename Real>
Tensor<Real> embedding(const Tensor<Real>& table, std::span<const int> ids) {
  require_2d("embedding", table);
  const std::size_t V = table.rows(), d = table.cols();
  std::vector<int> idx(ids.begin(), ids.end());
  for (int id : idx) {
    require(id >= 0 && static_cast<std::size_t>(id) < V,
            "embedding: id " + std::to_string(id) + " outside table of " + std::to_string(V) + " rows");
  }
  NdArray<Real> out(Shape{idx.size(), d});
  auto src = table.value().data();
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(src.data() + static_cast<std::size_t>(idx[i]) * d, d, out.data().data() + i * d);
  return make_result<Real>("embedding", std::move(out), {table.node()},
                           [d, idx = std::move(idx)](Node<Real>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto g = self.grad.data();
    auto dst = in.grad_buffer().data();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) dst[static_cast<std::size_t>(idx[i]) * d + j] += g[i * d + j];
  });
}

#define URM_INSTANTIATE_OPS(Real)                                                              \
  template Tensor<Real> matmul(const Tensor<Real>&, const Tensor<Real>&);                      \
  template Tensor<Real> transpose(const Tensor<Real>&);                                        \
  template Tensor<Real> add(const Tensor<Real>&, const Tensor<Real>&);                         \
  template Tensor<Real> sub(const Tensor<Real>&, const Tensor<Real>&);                         \
  template Tensor<Real> mul(const Tensor<Real>&, const Tensor<Real>&);                         \
  template Tensor<Real> scale(const Tensor<Real>&, Real);                                      \
  template Tensor<Real> add_scalar(const Tensor<Real>&, Real);                                 \
  template Tensor<Real> add_row(const Tensor<Real>&, const Tensor<Real>&);                     \
  template Tensor<Real> mul_col(const Tensor<Real>&, const Tensor<Real>&);                     \
  template Tensor<Real> silu(const Tensor<Real>&);                                             \
  template Tensor<Real> relu(const Tensor<Real>&);                                             \
  template Tensor<Real> sigmoid(const Tensor<Real>&);                                          \
  template Tensor<Real> sum(const Tensor<Real>&);                                              \
  template Tensor<Real> mean(const Tensor<Real>&);                                             \
  template Tensor<Real> softmax_lastdim(const Tensor<Real>&);                                  \
  template Tensor<Real> rmsnorm(const Tensor<Real>&, const Tensor<Real>&, Real);               \
  template Tensor<Real> cross_entropy(const Tensor<Real>&, std::span<const int>, int);         \
  template Tensor<Real> dwconv1d(const Tensor<Real>&, const Tensor<Real>&, std::size_t,        \
                                 std::size_t);                                                 \
  template Tensor<Real> scaled_dot_attention(const Tensor<Real>&, const Tensor<Real>&,         \
                                             const Tensor<Real>&, const AttentionSpec&,        \
                                             NdArray<Real>*);                                  \
  template Tensor<Real> detach(const Tensor<Real>&);                                           \
  template Tensor<Real> reshape(const Tensor<Real>&, Shape);                                   \
  template Tensor<Real> concat_cols(const std::vector<Tensor<Real>>&);                         \
  template Tensor<Real> slice_cols(const Tensor<Real>&, std::size_t, std::size_t);             \
  template Tensor<Real> repeat_rows(const Tensor<Real>&, std::size_t);                         \
  template Tensor<Real> embedding(const Tensor<Real>&, std::span<const int>);

URM_INSTANTIATE_OPS(float)
URM_INSTANTIATE_OPS(double)

}  // namespace urm::core
