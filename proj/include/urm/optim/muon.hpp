#pragma once

#include <cstddef>

#include "urm/core/ndarray.hpp"

namespace urm::optim {

using core::NdArray;

// p(x) = a x + b x^3 + c x^5 applied to the singular values.
struct NewtonSchulzCoefficients {
  double a, b, c;
};

inline constexpr NewtonSchulzCoefficients kQuinticNewtonSchulz{3.4445, -4.7750, 2.0315};
// Classic cubic iteration; converges to 1 but needs more steps.
inline constexpr NewtonSchulzCoefficients kCubicNewtonSchulz{1.5, -0.5, 0.0};

struct MuonConfig {
  double momentum = 0.95;
  std::size_t ns_steps = 5;
  NewtonSchulzCoefficients coefficients = kQuinticNewtonSchulz;
};

// Approximate orthogonalization of a 2-D matrix (polar factor). The input is
// scaled by its Frobenius norm first. A zero matrix is returned unchanged.
template <typename Real>
NdArray<Real> newton_schulz(const NdArray<Real>& g, std::size_t steps,
                            NewtonSchulzCoefficients coefficients = kQuinticNewtonSchulz);

// buffer <- momentum * buffer + grad; param <- param (1 - lr wd) - lr * s * NS(buffer),
// s = sqrt(max(1, rows / cols)). Rejects non 2-D parameters.
template <typename Real>
void muon_step(NdArray<Real>& param, const NdArray<Real>& grad, NdArray<Real>& buffer, double lr,
               double wd, const MuonConfig& cfg);

}  // namespace urm::optim
