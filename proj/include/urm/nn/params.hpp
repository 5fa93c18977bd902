#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "urm/core/rng.hpp"
#include "urm/core/tensor.hpp"

namespace urm::nn {

using core::NdArray;
using core::Shape;
using core::Tensor;

// How the optimizer layer treats a parameter.
enum class ParamRole {
  kHiddenMatrix,     // recurrent-stack weight matrices (Muon eligible)
  kEmbedding,        // token / positional / depth tables
  kPuzzleEmbedding,  // separate learning-rate group
  kHead,             // unembedding and halting head
  kVector,           // norm gains, biases
  kConvKernel,
};

template <typename Real>
struct NamedParam {
  std::string name;
  Tensor<Real> tensor;
  ParamRole role;
};

// Ordered, named collection of leaf parameters. Order is registration order
// and is the serialization order.
template <typename Real>
class ParamStore {
 public:
  Tensor<Real> add(std::string name, NdArray<Real> init, ParamRole role);

  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  const std::vector<NamedParam<Real>>& entries() const { return params_; }
  std::vector<NamedParam<Real>>& entries() { return params_; }
  const NamedParam<Real>* find(const std::string& name) const;
  NamedParam<Real>* find(const std::string& name);

  void zero_grad();

 private:
  std::vector<NamedParam<Real>> params_;
};

template <typename Real>
NdArray<Real> normal_array(Shape shape, double stddev, core::Rng& rng);

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace urm::nn
