#include "urm/nn/params.hpp"

#include <stdexcept>

namespace urm::nn {

template <typename Real>
Tensor<Real> ParamStore<Real>::add(std::string name, NdArray<Real> init, ParamRole role) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
  auto t = Tensor<Real>::parameter(std::move(init));
  params_.push_back({std::move(name), t, role});
  return t;
}

template <typename Real>
std::size_t ParamStore<Real>::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

template <typename Real>
const NamedParam<Real>* ParamStore<Real>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename Real>
NamedParam<Real>* ParamStore<Real>::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename Real>
void ParamStore<Real>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename Real>
NdArray<Real> normal_array(Shape shape, double stddev, core::Rng& rng) {
  NdArray<Real> out(std::move(shape));
  for (auto& v : out.data()) v = static_cast<Real>(rng.normal(0.0, stddev));
  return out;
}

template class ParamStore<float>;
template class ParamStore<double>;
template NdArray<float> normal_array(Shape, double, core::Rng&);
template NdArray<double> normal_array(Shape, double, core::Rng&);

}  // namespace urm::nn
