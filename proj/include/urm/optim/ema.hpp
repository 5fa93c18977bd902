#pragma once

#include <vector>

#include "urm/nn/params.hpp"

namespace urm::optim {

using core::NdArray;

// shadow <- decay * shadow + (1 - decay) * param
template <typename Real>
void ema_update(NdArray<Real>& shadow, const NdArray<Real>& param, double decay);

// Shadow copies of every parameter in a store, in store order.
template <typename Real>
class EmaShadow {
 public:
  EmaShadow() = default;
  EmaShadow(const nn::ParamStore<Real>& store, double decay);

  double decay() const { return decay_; }
  void update(const nn::ParamStore<Real>& store);
  // Overwrites the store's parameter values with the shadow.
  void copy_to(nn::ParamStore<Real>& store) const;

  const std::vector<NdArray<Real>>& values() const { return shadow_; }
  std::vector<NdArray<Real>>& values() { return shadow_; }

 private:
  double decay_ = 0.999;
  std::vector<NdArray<Real>> shadow_;
};

}  // namespace urm::optim
