#include "urm/optim/muon.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace urm::optim {

namespace {

// Row-major dense helpers in double.
using Mat = std::vector<double>;

// c = a [n x k] * b^T, b is [m x k]
void mul_abt(const Mat& a, const Mat& b, Mat& c, std::size_t n, std::size_t k, std::size_t m) {
  c.assign(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i * k + t] * b[j * k + t];
      c[i * m + j] = s;
    }
}

// c = a [n x k] * b [k x m]
void mul_ab(const Mat& a, const Mat& b, Mat& c, std::size_t n, std::size_t k, std::size_t m) {
  c.assign(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a[i * k + t];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) c[i * m + j] += av * b[t * m + j];
    }
}

}  // namespace

template <typename Real>
NdArray<Real> newton_schulz(const NdArray<Real>& g, std::size_t steps, NewtonSchulzCoefficients co) {
  if (g.ndim() != 2) throw core::DimensionError("newton_schulz: expected a matrix, got " + core::shape_string(g.shape()));
  const std::size_t r = g.rows(), c = g.cols();
  double norm = 0.0;
  for (Real v : g.data()) norm += double(v) * double(v);
  norm = std::sqrt(norm);
  if (norm == 0.0) return g;

  // Work on the wide orientation so X X^T is the smaller Gram matrix.
  const bool tall = r > c;
  const std::size_t n = tall ? c : r, k = tall ? r : c;
  Mat x(n * k);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double v = double(g.at(i, j)) / (norm + 1e-7);
      if (tall) x[j * k + i] = v; else x[i * k + j] = v;
    }
  Mat a, b, bx;
  for (std::size_t it = 0; it < steps; ++it) {
    mul_abt(x, x, a, n, k, n);              // A = X X^T
    mul_ab(a, a, b, n, n, n);               // A^2
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = co.b * a[i] + co.c * b[i];
    mul_ab(b, x, bx, n, n, k);              // (bA + cA^2) X
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = co.a * x[i] + bx[i];
  }
  NdArray<Real> out(g.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = Real(tall ? x[j * k + i] : x[i * k + j]);
  return out;
}

template <typename Real>
void muon_step(NdArray<Real>& param, const NdArray<Real>& grad, NdArray<Real>& buffer, double lr, double wd,
               const MuonConfig& cfg) {
  if (param.ndim() != 2) throw core::DimensionError("muon_step: parameter is not 2-D: " + core::shape_string(param.shape()));
  if (grad.shape() != param.shape()) core::throw_shape_mismatch("muon_step", param.shape(), grad.shape());
  if (!grad.all_finite()) throw core::NumericError("muon_step: non-finite gradient");
  if (buffer.shape() != param.shape()) buffer = NdArray<Real>(param.shape());
  for (std::size_t i = 0; i < buffer.numel(); ++i) buffer[i] = Real(cfg.momentum * double(buffer[i]) + double(grad[i]));
  const auto update = newton_schulz(buffer, cfg.ns_steps, cfg.coefficients);
  const double scale = std::sqrt(std::max(1.0, double(param.rows()) / double(param.cols())));
  const double decay = 1.0 - lr * wd;
  for (std::size_t i = 0; i < param.numel(); ++i)
    param[i] = Real(double(param[i]) * decay - lr * scale * double(update[i]));
}

template NdArray<float> newton_schulz(const NdArray<float>&, std::size_t, NewtonSchulzCoefficients);
template NdArray<double> newton_schulz(const NdArray<double>&, std::size_t, NewtonSchulzCoefficients);
template void muon_step(NdArray<float>&, const NdArray<float>&, NdArray<float>&, double, double, const MuonConfig&);
template void muon_step(NdArray<double>&, const NdArray<double>&, NdArray<double>&, double, double,
                        const MuonConfig&);

}  // namespace urm::optim
