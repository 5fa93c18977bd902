#include "urm/optim/adam_atan2.hpp"

#include <cmath>

namespace urm::optim {

template <typename Real>
void adam_atan2_step(NdArray<Real>& param, const NdArray<Real>& grad, AdamMoments<Real>& state,
                     std::size_t step, double lr, double wd, const AdamAtan2Config& cfg) {
  if (grad.shape() != param.shape()) core::throw_shape_mismatch("adam_atan2_step", param.shape(), grad.shape());
  if (!grad.all_finite()) throw core::NumericError("adam_atan2_step: non-finite gradient");
  if (step == 0) throw std::invalid_argument("adam_atan2_step: step is 1-based");
  if (state.m.shape() != param.shape()) state.m = NdArray<Real>(param.shape());
  if (state.v.shape() != param.shape()) state.v = NdArray<Real>(param.shape());

  const double c1 = 1.0 - std::pow(cfg.beta1, double(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(step));
  const double decay = 1.0 - lr * wd;
  auto p = param.data();
  auto m = state.m.data();
  auto v = state.v.data();
  auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i];
    m[i] = Real(cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * gi);
    v[i] = Real(cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * gi * gi);
    const double m_hat = double(m[i]) / c1;
    const double v_hat = double(v[i]) / c2;
    const double update = cfg.a * std::atan2(m_hat, cfg.b * std::sqrt(v_hat));
    p[i] = Real(double(p[i]) * decay - lr * update);
  }
}

template void adam_atan2_step(NdArray<float>&, const NdArray<float>&, AdamMoments<float>&, std::size_t,
                              double, double, const AdamAtan2Config&);
template void adam_atan2_step(NdArray<double>&, const NdArray<double>&, AdamMoments<double>&, std::size_t,
                              double, double, const AdamAtan2Config&);

}  // namespace urm::optim
