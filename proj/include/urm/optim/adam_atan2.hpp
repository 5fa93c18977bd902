#pragma once

#include <cstddef>

#include "urm/core/ndarray.hpp"

namespace urm::optim {

using core::NdArray;

struct AdamAtan2Config {
  double beta1 = 0.9;
  double beta2 = 0.95;
  // update = a * atan2(m_hat, b * sqrt(v_hat))
  double a = 1.0;
  double b = 1.0;
};

template <typename Real>
struct AdamMoments {
  NdArray<Real> m;
  NdArray<Real> v;
};

// One AdamAtan2 step on a single tensor. `step` is the 1-based count after
// this update (used for bias correction). Decoupled weight decay scales the
// parameter by (1 - lr * wd) before the update. Throws NumericError without
// touching anything when the gradient is not finite.
template <typename Real>
void adam_atan2_step(NdArray<Real>& param, const NdArray<Real>& grad, AdamMoments<Real>& state,
                     std::size_t step, double lr, double wd, const AdamAtan2Config& cfg);

}  // namespace urm::optim
