#include "urm/optim/ema.hpp"

#include <stdexcept>

namespace urm::optim {

template <typename Real>
void ema_update(NdArray<Real>& shadow, const NdArray<Real>& param, double decay) {
  if (shadow.shape() != param.shape()) core::throw_shape_mismatch("ema_update", shadow.shape(), param.shape());
  for (std::size_t i = 0; i < shadow.numel(); ++i)
    shadow[i] = Real(decay * double(shadow[i]) + (1.0 - decay) * double(param[i]));
}

template <typename Real>
EmaShadow<Real>::EmaShadow(const nn::ParamStore<Real>& store, double decay) : decay_(decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw std::invalid_argument("ema decay must be in [0, 1]");
  for (const auto& p : store.entries()) shadow_.push_back(p.tensor.value());
}

template <typename Real>
void EmaShadow<Real>::update(const nn::ParamStore<Real>& store) {
  if (store.size() != shadow_.size()) throw std::invalid_argument("ema: parameter count changed");
  for (std::size_t i = 0; i < shadow_.size(); ++i) ema_update(shadow_[i], store.entries()[i].tensor.value(), decay_);
}

template <typename Real>
void EmaShadow<Real>::copy_to(nn::ParamStore<Real>& store) const {
  if (store.size() != shadow_.size()) throw std::invalid_argument("ema: parameter count changed");
  for (std::size_t i = 0; i < shadow_.size(); ++i) store.entries()[i].tensor.mutable_value() = shadow_[i];
}

template void ema_update(NdArray<float>&, const NdArray<float>&, double);
template void ema_update(NdArray<double>&, const NdArray<double>&, double);
template class EmaShadow<float>;
template class EmaShadow<double>;

}  // namespace urm::optim
